#pragma once

#include <iholo/field.hpp>
#include <iholo/grid.hpp>
#include <iholo/phase_mask.hpp>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace iholo {

enum class SourceKind { coherent, thermal, heralded_single_photon };

std::string to_string(SourceKind kind);
SourceKind parse_source_kind(const std::string &name);

/// Photon statistics of one input beam.
struct SourceSpec {
  SourceKind kind{SourceKind::coherent};
  /// Mean photons per trial. Ignored for heralded sources (one photon per
  /// heralded trial) and for the reference, whose mean follows from epsilon.
  double mean_photons{1.0};
  std::optional<double> g2_override;

  /// Second-order coherence implied by the kind (1, 2, 0) unless overridden.
  double g2() const noexcept;
};

/// Camera and herald-detector imperfections.
struct DetectorModel {
  double efficiency{1.0};
  double jitter_sigma_ns{0.0}; ///< Gaussian timestamp noise; FWHM = 2.355 sigma
  double blur_sigma_px{0.0};   ///< Gaussian displacement of the reported pixel
  double dark_rate_per_s{0.0}; ///< per camera region
  double dead_time_ns{0.0};    ///< per pixel, non-paralyzable
  double herald_efficiency{0.6};
  double herald_jitter_sigma_ns{0.0};

  static DetectorModel ideal();
  /// Intensified time-tagging camera: 8.3 ns FWHM, 7% efficiency, ~1 us dead
  /// time, 2 px effective blur, 5e4 dark counts/s over the sensor.
  static DetectorModel tpx3cam();
};

struct ClockModel {
  double pulse_period_ns{12.5};
  /// Consecutive trials sharing one global phase (and thermal amplitude).
  std::uint64_t coherence_trials{1};

  double trials_per_second() const noexcept { return 1e9 / pulse_period_ns; }
  std::uint64_t pulse_period_ps() const;
};

/// Full description of a simulated acquisition.
struct ExperimentConfig {
  PixelGrid grid{60, 60};
  SourceSpec signal{};
  SourceSpec reference{};
  double epsilon{1.0};      ///< <I_r> / <I_s>
  double mode_overlap{1.0}; ///< fraction of the signal indistinguishable from the reference
  BeamSpec beam{};
  nlohmann::json mask_spec = {{"type", "flat"}};
  PhaseMask mask{PixelGrid{60, 60}};
  std::optional<ShearSpec> shear;
  DetectorModel detector{};
  ClockModel clock{};
  std::uint64_t trials{1};
  std::uint64_t rng_seed{0};
  /// Relative three-photon probability above which the two-photon backend
  /// reports a validity warning.
  double three_photon_bound{1e-2};

  /// Total signal phase phi(r) + shear, relative to the reference.
  PhaseMask signal_phase() const;
  double signal_mean_photons() const noexcept;
  double reference_mean_photons() const noexcept;

  nlohmann::json to_json() const;
  /// SHA-256 of the canonical JSON serialization.
  std::string digest() const;
};

/// Parses and validates; errors name the offending field ("config.epsilon: ...").
/// Relative mask paths resolve against `base_dir`.
ExperimentConfig parse_config(const nlohmann::json &doc,
                              const std::filesystem::path &base_dir = {});
ExperimentConfig load_config(const std::filesystem::path &path);

/// Builds the mask described by a mask JSON object.
PhaseMask build_mask(PixelGrid grid, const nlohmann::json &spec,
                     const std::filesystem::path &base_dir = {});

} // namespace iholo
