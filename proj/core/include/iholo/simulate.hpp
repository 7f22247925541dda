#pragma once

#include <iholo/config.hpp>
#include <iholo/events.hpp>
#include <iholo/field.hpp>

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

/// Monte Carlo generation of time-tagged detections.
///
/// Coherent and thermal inputs use a semiclassical backend: per coherence block
/// a global phase theta and (for thermal light) a Gamma-distributed intensity
/// factor are drawn, and photodetection is Poissonian in the output intensities
/// I_{c,d}(r) = 1/2 |a(r) +/- b(r) e^{i theta}|^2. A heralded single photon uses
/// an amplitude-level two-photon backend against a weak coherent reference.
namespace iholo::sim {

using Rng = std::mt19937_64;

/// Samples pixel indices with probability proportional to a weight map.
class PixelSampler {
public:
  PixelSampler() = default;
  explicit PixelSampler(std::span<const double> weights);

  std::size_t operator()(Rng &rng) const;
  std::size_t size() const noexcept { return cumulative_.size(); }

private:
  std::vector<double> cumulative_;
};

/// Precomputed modes and rates shared by all workers (read-only).
class SimulationModel {
public:
  explicit SimulationModel(const ExperimentConfig &config);

  const ExperimentConfig &config() const noexcept { return config_; }
  const PixelGrid &grid() const noexcept { return config_.grid; }
  std::span<const Complex> signal_mode() const noexcept { return psi_s_; }
  std::span<const Complex> reference_mode() const noexcept { return psi_r_; }
  const PixelSampler &signal_sampler() const noexcept { return sample_s_; }
  const PixelSampler &reference_sampler() const noexcept { return sample_r_; }
  double mu_s() const noexcept { return mu_s_; }
  double mu_r() const noexcept { return mu_r_; }
  bool heralded() const noexcept { return heralded_; }

  /// Time of the first pulse; leaves room for negative jitter.
  std::uint64_t start_offset_ps() const noexcept { return start_offset_ps_; }
  std::uint64_t pulse_time_ps(std::uint64_t trial) const noexcept {
    return start_offset_ps_ + trial * period_ps_;
  }
  /// Largest amount by which a recorded timestamp can precede its pulse.
  std::uint64_t early_guard_ps() const noexcept { return guard_ps_; }

  /// Intensity factor |g|^2 for a source with the given g2 (Gamma with shape
  /// 1/(g2 - 1); constant 1 when g2 == 1).
  double sample_intensity_factor(double g2, Rng &rng) const;

private:
  ExperimentConfig config_;
  std::vector<Complex> psi_s_;
  std::vector<Complex> psi_r_;
  PixelSampler sample_s_;
  PixelSampler sample_r_;
  double mu_s_{0.0};
  double mu_r_{0.0};
  bool heralded_{false};
  std::uint64_t period_ps_{0};
  std::uint64_t start_offset_ps_{0};
  std::uint64_t guard_ps_{0};
};

/// Field state of one coherence block.
struct TrialOutcome {
  const SimulationModel *model{nullptr};
  double theta{0.0};           ///< global phase in [0, 2 pi)
  double signal_factor{1.0};   ///< |g_s|^2 intensity factor
  double reference_factor{1.0};///< |g_r|^2

  Complex signal_amplitude(std::size_t pixel) const;
  Complex reference_amplitude(std::size_t pixel) const; ///< includes e^{i theta}
  /// Expected photon numbers per pixel.
  std::vector<double> intensity_s() const;
  std::vector<double> intensity_r() const;
  std::vector<double> intensity_c() const;
  std::vector<double> intensity_d() const;
  /// Probability that a photon found at `pixel` leaves through port c.
  double port_c_probability(std::size_t pixel) const;
};

/// Draws theta and the thermal intensity factors for one block.
/// Heralded signals are rejected here (they use the two-photon backend).
TrialOutcome sample_trial_fields(const SimulationModel &model, Rng &rng);

/// Poisson photodetection of one trial plus the detector model. Appends to `out`
/// (unsorted).
void sample_detections(const TrialOutcome &trial, std::uint64_t trial_index, Rng &rng,
                       std::vector<events::DetectionEvent> &out);

struct PhotonHit {
  int port{0}; ///< 0 = c (left camera), 1 = d (right camera)
  std::size_t pixel{0};
};

enum class TwoPhotonBranch { signal_only, signal_reference, reference_pair };

struct TwoPhotonOutcome {
  TwoPhotonBranch branch{TwoPhotonBranch::signal_only};
  std::vector<PhotonHit> photons;
};

/// Photon content of one heralded trial before detection.
TwoPhotonOutcome sample_two_photon_outcome(const SimulationModel &model, Rng &rng);

/// Heralded trial with detector model applied (herald, camera hits, darks).
void sample_two_photon_trial(const SimulationModel &model, std::uint64_t trial_index,
                             Rng &rng, std::vector<events::DetectionEvent> &out);

struct TwoPhotonValidity {
  /// P(signal + >= 2 reference photons) / P(signal + 1 reference photon).
  double three_photon_ratio{0.0};
  bool within_bound{true};
};

TwoPhotonValidity two_photon_validity(const ExperimentConfig &config);
std::vector<std::string> simulation_warnings(const ExperimentConfig &config);

struct SimulationOptions {
  unsigned threads{0};              ///< 0 = hardware concurrency
  std::uint64_t batch_trials{1u << 16};
};

using EventSink = std::function<void(std::span<const events::DetectionEvent>)>;

/// Header written ahead of a simulated stream; metadata records the config.
events::StreamHeader simulation_header(const ExperimentConfig &config);

/// Streams time-sorted events to `sink` in bounded batches. Output does not
/// depend on the thread count.
void simulate(const ExperimentConfig &config, const SimulationOptions &options,
              const EventSink &sink);

events::EventStream run_simulation(const ExperimentConfig &config,
                           const SimulationOptions &options = {});

/// Threads from IHOLO_THREADS, else hardware concurrency (at least 1).
unsigned default_threads();

} // namespace iholo::sim
