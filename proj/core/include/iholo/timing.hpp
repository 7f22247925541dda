#pragma once

#include <iholo/correlator.hpp>
#include <iholo/field.hpp>
#include <iholo/phase_mask.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace iholo::corr {

/// Histogram of (t_camera - t_herald) over a symmetric span.
struct TimestampHistogram {
  std::uint64_t bin_width_ps{100};
  std::int64_t origin_ps{0}; ///< left edge of bin 0
  std::uint64_t pulse_period_ps{12500};
  std::vector<std::uint64_t> counts;

  double bin_center_ps(std::size_t i) const noexcept {
    return static_cast<double>(origin_ps) +
           (static_cast<double>(i) + 0.5) * static_cast<double>(bin_width_ps);
  }
  std::uint64_t total() const;
};

/// Empty (all-zero) when the stream has no herald events.
TimestampHistogram timestamp_histogram(std::span<const DetectionEvent> events,
                                       std::uint64_t bin_width_ps, std::uint64_t span_ps,
                                       std::uint64_t pulse_period_ps);

/// Gaussians at centre + k * period (|k| <= max_order) with a shared width on
/// a flat background; max_order covers every peak that reaches the span.
struct PeakFit {
  int max_order{1};
  std::vector<double> amplitude; ///< peak heights (counts/bin), index k + max_order
  double height(int k) const { return amplitude.at(static_cast<std::size_t>(k + max_order)); }
  double center_ps{0.0};
  double sigma_ps{0.0};
  double background{0.0};
  double period_ps{0.0};
  double reduced_chi2{0.0};
};

PeakFit fit_pulse_peaks(const TimestampHistogram &hist);

struct AccidentalEstimate {
  double fraction{0.0};           ///< of coincidences with >= 1 neighbour-pulse photon
  double per_photon_leakage{0.0}; ///< neighbour-peak share of in-window counts
  PeakFit fit;
};

/// Neighbour-pulse leakage into the coincidence window, from fitted peaks. A
/// coincidence involving `camera_photons` independent camera timestamps is
/// accidental if any of them leaked: 1 - (1 - leakage)^camera_photons.
AccidentalEstimate accidental_fraction(const TimestampHistogram &hist, std::uint64_t tau_w_ps,
                                       int camera_photons = 2,
                                       WindowConvention window = WindowConvention::centered);
/// Same quantity from known peak parameters, integrated analytically.
double leakage_from_peaks(const PeakFit &fit, double half_window_ps);

struct G2Estimate {
  double g2{0.0};
  double std_error{0.0};
  double mean{0.0};
  std::size_t trials{0};
};

/// <n(n-1)> / <n>^2 over per-trial photon counts (delta-method error).
G2Estimate estimate_g2(std::span<const std::uint32_t> counts);

/// Photon counts per pulse for the selected camera channels. With
/// heralded_only, only pulses containing a herald event contribute.
std::vector<std::uint32_t> per_trial_counts(std::span<const DetectionEvent> events,
                                            const events::StreamHeader &header,
                                            bool left, bool right, bool heralded_only);

struct FirstOrderFringe {
  double visibility{0.0}; ///< |mean| of the per-batch complex fringe estimate
  double sigma{0.0};      ///< per-component standard error from batch scatter
  Complex mean{};
  std::size_t batches{0};
};

/// First-order fringe in the singles: per time batch,
/// V_b = 2 sum_events s e^{-i phi(r)} / N_b with s = +1 (left), -1 (right).
/// Under a random global phase E[V] = 0 and |V| / sigma is Rayleigh(1).
FirstOrderFringe singles_fringe(std::span<const DetectionEvent> events, const PhaseMask &phase,
                                std::size_t batches = 32);

} // namespace iholo::corr
