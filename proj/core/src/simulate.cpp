#include <iholo/error.hpp>
#include <iholo/rng.hpp>
#include <iholo/simulate.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

namespace iholo::sim {

using events::Channel;
using events::DetectionEvent;

namespace {

constexpr double kJitterCut = 6.0;

std::uint64_t ceil_ps(double ns) { return static_cast<std::uint64_t>(std::ceil(ns * 1000.0)); }

double truncated_normal(Rng &rng) {
  std::normal_distribution<double> n;
  for (;;) {
    double z = n(rng);
    if (std::abs(z) <= kJitterCut) return z;
  }
}

/// Detector-side handling shared by both backends.
class Detector {
public:
  Detector(const SimulationModel &model)
      : model_(model), det_(model.config().detector),
        jitter_ps_(det_.jitter_sigma_ns * 1000.0),
        herald_jitter_ps_(det_.herald_jitter_sigma_ns * 1000.0),
        period_ps_(model.config().clock.pulse_period_ps()),
        dark_mean_(det_.dark_rate_per_s * model.config().clock.pulse_period_ns * 1e-9) {}

  std::uint64_t stamp(std::uint64_t pulse, double sigma_ps, Rng &rng) const {
    if (sigma_ps <= 0.0) return pulse;
    auto dt = std::llround(sigma_ps * truncated_normal(rng));
    return static_cast<std::uint64_t>(static_cast<std::int64_t>(pulse) + dt);
  }

  /// A photon arriving at `pixel` of the given port (0 = c, 1 = d), already
  /// past the efficiency cut.
  void camera(int port, std::size_t pixel, std::uint64_t pulse, Rng &rng,
              std::vector<DetectionEvent> &out) const {
    const PixelGrid &g = model_.grid();
    Pixel p = g.pixel(pixel);
    int x = p.x, y = p.y;
    if (det_.blur_sigma_px > 0.0) {
      std::normal_distribution<double> n(0.0, det_.blur_sigma_px);
      x = static_cast<int>(std::lround(p.x + n(rng)));
      y = static_cast<int>(std::lround(p.y + n(rng)));
      if (!g.contains(x, y)) return;
    }
    out.push_back({stamp(pulse, jitter_ps_, rng), static_cast<std::uint16_t>(x),
                   static_cast<std::uint16_t>(y), port == 0 ? Channel::left : Channel::right});
  }

  bool detect(Rng &rng) const {
    if (det_.efficiency >= 1.0) return true;
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < det_.efficiency;
  }

  void herald(std::uint64_t pulse, Rng &rng, std::vector<DetectionEvent> &out) const {
    out.push_back({stamp(pulse, herald_jitter_ps_, rng), 0, 0, Channel::herald});
  }

  void dark_counts(std::uint64_t pulse, Rng &rng, std::vector<DetectionEvent> &out) const {
    if (dark_mean_ <= 0.0) return;
    const PixelGrid &g = model_.grid();
    std::poisson_distribution<int> count(dark_mean_);
    std::uniform_int_distribution<int> ux(0, g.width() - 1), uy(0, g.height() - 1);
    std::uniform_int_distribution<std::uint64_t> ut(0, period_ps_ - 1);
    const std::uint64_t lo = pulse - period_ps_ / 2;
    for (Channel ch : {Channel::left, Channel::right}) {
      int n = count(rng);
      for (int i = 0; i < n; ++i) {
        auto x = static_cast<std::uint16_t>(ux(rng));
        auto y = static_cast<std::uint16_t>(uy(rng));
        out.push_back({lo + ut(rng), x, y, ch});
      }
    }
  }

private:
  const SimulationModel &model_;
  const DetectorModel &det_;
  double jitter_ps_;
  double herald_jitter_ps_;
  std::uint64_t period_ps_;
  double dark_mean_;
};

std::vector<double> intensities(std::span<const Complex> amp) {
  std::vector<double> w(amp.size());
  for (std::size_t i = 0; i < amp.size(); ++i) w[i] = std::norm(amp[i]);
  return w;
}

/// Non-paralyzable per-pixel dead time over a sorted stream, carried across calls.
class DeadTimeFilter {
public:
  DeadTimeFilter(const PixelGrid &grid, double dead_time_ns)
      : width_(static_cast<std::size_t>(grid.width())),
        dead_ps_(static_cast<std::uint64_t>(std::llround(dead_time_ns * 1000.0))) {
    if (dead_ps_ > 0) last_.assign(2 * grid.size(), kNever);
  }

  void apply(std::vector<DetectionEvent> &events) {
    if (dead_ps_ == 0) return;
    std::size_t plane = last_.size() / 2;
    auto keep = std::remove_if(events.begin(), events.end(), [&](const DetectionEvent &e) {
      if (!events::is_camera(e.channel)) return false;
      std::size_t k = static_cast<std::size_t>(e.channel) * plane + e.y * width_ + e.x;
      if (last_[k] != kNever && e.t - last_[k] < dead_ps_) return true;
      last_[k] = e.t;
      return false;
    });
    events.erase(keep, events.end());
  }

private:
  static constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();
  std::size_t width_;
  std::uint64_t dead_ps_;
  std::vector<std::uint64_t> last_;
};

void sample_block(const SimulationModel &model, std::uint64_t block, std::vector<DetectionEvent> &out) {
  const ExperimentConfig &c = model.config();
  const std::uint64_t per_block = c.clock.coherence_trials;
  const std::uint64_t first = block * per_block;
  const std::uint64_t last = std::min(c.trials, first + per_block);
  Rng rng = substream(c.rng_seed, block);
  if (model.heralded()) {
    for (std::uint64_t t = first; t < last; ++t) sample_two_photon_trial(model, t, rng, out);
    return;
  }
  TrialOutcome fields = sample_trial_fields(model, rng);
  for (std::uint64_t t = first; t < last; ++t) sample_detections(fields, t, rng, out);
}

} // namespace

PixelSampler::PixelSampler(std::span<const double> weights) : cumulative_(weights.size()) {
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i]))
      throw config_error("pixel weights must be finite and non-negative");
    s += weights[i];
    cumulative_[i] = s;
  }
  if (!(s > 0.0)) throw config_error("pixel weights sum to zero");
}

std::size_t PixelSampler::operator()(Rng &rng) const {
  double u = std::uniform_real_distribution<double>(0.0, cumulative_.back())(rng);
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  auto i = static_cast<std::size_t>(it - cumulative_.begin());
  // Skip zero-weight pixels that share the same cumulative value.
  return std::min(i, cumulative_.size() - 1);
}

SimulationModel::SimulationModel(const ExperimentConfig &config) : config_(config) {
  ComplexField beam = gaussian_beam(config.grid, config.beam);
  ComplexField s = beam.with_phase(config.signal_phase());
  psi_s_.assign(s.amplitudes().begin(), s.amplitudes().end());
  psi_r_.assign(beam.amplitudes().begin(), beam.amplitudes().end());
  sample_s_ = PixelSampler(intensities(psi_s_));
  sample_r_ = PixelSampler(intensities(psi_r_));
  mu_s_ = config.signal_mean_photons();
  mu_r_ = config.reference_mean_photons();
  heralded_ = config.signal.kind == SourceKind::heralded_single_photon;
  period_ps_ = config.clock.pulse_period_ps();
  const DetectorModel &d = config.detector;
  std::uint64_t jitter = std::max(ceil_ps(kJitterCut * d.jitter_sigma_ns),
                                  ceil_ps(kJitterCut * d.herald_jitter_sigma_ns));
  guard_ps_ = std::max(jitter, period_ps_ / 2 + 1);
  start_offset_ps_ = guard_ps_;
}

double SimulationModel::sample_intensity_factor(double g2, Rng &rng) const {
  if (g2 <= 1.0) return 1.0;
  double scale = g2 - 1.0;
  return std::gamma_distribution<double>(1.0 / scale, scale)(rng);
}

Complex TrialOutcome::signal_amplitude(std::size_t pixel) const {
  return std::sqrt(signal_factor * model->mu_s()) * model->signal_mode()[pixel];
}

Complex TrialOutcome::reference_amplitude(std::size_t pixel) const {
  return std::sqrt(reference_factor * model->mu_r()) * model->reference_mode()[pixel] *
         std::polar(1.0, theta);
}

std::vector<double> TrialOutcome::intensity_s() const {
  std::vector<double> v(model->signal_mode().size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::norm(signal_amplitude(i));
  return v;
}

std::vector<double> TrialOutcome::intensity_r() const {
  std::vector<double> v(model->reference_mode().size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::norm(reference_amplitude(i));
  return v;
}

std::vector<double> TrialOutcome::intensity_c() const {
  auto s = intensity_s(), r = intensity_r();
  std::vector<double> v(s.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (s[i] + r[i]) * port_c_probability(i);
  return v;
}

std::vector<double> TrialOutcome::intensity_d() const {
  auto s = intensity_s(), r = intensity_r();
  std::vector<double> v(s.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (s[i] + r[i]) * (1.0 - port_c_probability(i));
  return v;
}

double TrialOutcome::port_c_probability(std::size_t pixel) const {
  Complex a = signal_amplitude(pixel), b = reference_amplitude(pixel);
  double I = std::norm(a) + std::norm(b);
  if (!(I > 0.0)) return 0.5;
  return 0.5 + std::sqrt(model->config().mode_overlap) * (std::conj(a) * b).real() / I;
}

TrialOutcome sample_trial_fields(const SimulationModel &model, Rng &rng) {
  const ExperimentConfig &c = model.config();
  if (model.heralded())
    throw config_error("heralded single photons are simulated by the two-photon backend");
  TrialOutcome out;
  out.model = &model;
  out.theta = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
  out.signal_factor = model.sample_intensity_factor(c.signal.g2(), rng);
  out.reference_factor = model.sample_intensity_factor(c.reference.g2(), rng);
  return out;
}

void sample_detections(const TrialOutcome &trial, std::uint64_t trial_index, Rng &rng,
                       std::vector<DetectionEvent> &out) {
  const SimulationModel &m = *trial.model;
  Detector det(m);
  const double eta = m.config().detector.efficiency;
  const double ms = trial.signal_factor * m.mu_s();
  const double mr = trial.reference_factor * m.mu_r();
  const std::uint64_t pulse = m.pulse_time_ps(trial_index);
  const double total = eta * (ms + mr);
  if (total > 0.0) {
    int n = std::poisson_distribution<int>(total)(rng);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
      std::size_t pixel = u(rng) * (ms + mr) < ms ? m.signal_sampler()(rng) : m.reference_sampler()(rng);
      int port = u(rng) < trial.port_c_probability(pixel) ? 0 : 1;
      det.camera(port, pixel, pulse, rng, out);
    }
  }
  det.dark_counts(pulse, rng, out);
}

TwoPhotonOutcome sample_two_photon_outcome(const SimulationModel &model, Rng &rng) {
  const double mu = model.mu_r();
  const double p0 = std::exp(-mu);
  const double p1 = mu * p0;
  const double p2 = 0.5 * mu * mu * p0;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> port(0, 1);
  auto psi_s = model.signal_mode();
  auto psi_r = model.reference_mode();

  TwoPhotonOutcome out;
  double branch = u(rng);
  if (branch >= p0 && branch < p0 + p1) {
    out.branch = TwoPhotonBranch::signal_reference;
    if (u(rng) >= model.config().mode_overlap) {
      // Distinguishable pair: no two-photon interference.
      out.photons = {{port(rng), model.signal_sampler()(rng)},
                     {port(rng), model.reference_sampler()(rng)}};
      return out;
    }
    // Exact sampling of |A(r1, p; r2, q)|^2 by rejection from the
    // distinguishable proposal.
    static constexpr int s_amp[2] = {1, 1};
    static constexpr int t_amp[2] = {1, -1};
    for (;;) {
      bool swapped = u(rng) < 0.5;
      std::size_t r1 = swapped ? model.reference_sampler()(rng) : model.signal_sampler()(rng);
      std::size_t r2 = swapped ? model.signal_sampler()(rng) : model.reference_sampler()(rng);
      int p = port(rng), q = port(rng);
      Complex A = psi_s[r1] * psi_r[r2];
      Complex B = psi_r[r1] * psi_s[r2];
      Complex amp = static_cast<double>(s_amp[p] * t_amp[q]) * A +
                    static_cast<double>(t_amp[p] * s_amp[q]) * B;
      double accept = std::norm(amp) / (2.0 * (std::norm(A) + std::norm(B)));
      if (u(rng) < accept) {
        out.photons = {{p, r1}, {q, r2}};
        return out;
      }
    }
  }
  if (branch >= p0 + p1 && branch < p0 + p1 + p2) {
    out.branch = TwoPhotonBranch::reference_pair;
    out.photons = {{port(rng), model.reference_sampler()(rng)},
                   {port(rng), model.reference_sampler()(rng)}};
    return out;
  }
  out.branch = TwoPhotonBranch::signal_only;
  out.photons = {{port(rng), model.signal_sampler()(rng)}};
  return out;
}

void sample_two_photon_trial(const SimulationModel &model, std::uint64_t trial_index, Rng &rng,
                             std::vector<DetectionEvent> &out) {
  Detector det(model);
  const std::uint64_t pulse = model.pulse_time_ps(trial_index);
  const double herald_eff = model.config().detector.herald_efficiency;
  if (herald_eff > 0.0 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < herald_eff)
    det.herald(pulse, rng, out);
  TwoPhotonOutcome photons = sample_two_photon_outcome(model, rng);
  for (const PhotonHit &h : photons.photons)
    if (det.detect(rng)) det.camera(h.port, h.pixel, pulse, rng, out);
  det.dark_counts(pulse, rng, out);
}

TwoPhotonValidity two_photon_validity(const ExperimentConfig &config) {
  TwoPhotonValidity v;
  double mu = config.reference_mean_photons();
  double e = std::exp(-mu);
  // (1 - e^-mu (1 + mu)) / (mu e^-mu)
  if (mu > 0.0) v.three_photon_ratio = (-std::expm1(-mu) - mu * e) / (mu * e);
  v.within_bound = v.three_photon_ratio <= config.three_photon_bound;
  return v;
}

std::vector<std::string> simulation_warnings(const ExperimentConfig &config) {
  std::vector<std::string> w;
  if (config.signal.kind == SourceKind::heralded_single_photon) {
    auto v = two_photon_validity(config);
    if (!v.within_bound) {
      std::ostringstream s;
      s << "two-photon approximation: three-photon probability ratio " << v.three_photon_ratio
        << " exceeds bound " << config.three_photon_bound << " (reduce epsilon)";
      w.push_back(s.str());
    }
  }
  return w;
}

events::StreamHeader simulation_header(const ExperimentConfig &config) {
  SimulationModel model(config);
  events::StreamHeader h;
  h.width = static_cast<std::uint16_t>(config.grid.width());
  h.height = static_cast<std::uint16_t>(config.grid.height());
  h.pulse_period_ps = config.clock.pulse_period_ps();
  h.metadata = {{"config", config.to_json()},
                {"config_digest", config.digest()},
                {"trials", config.trials},
                {"start_offset_ps", model.start_offset_ps()},
                {"tool_version", IHOLO_VERSION},
                {"warnings", simulation_warnings(config)}};
  return h;
}

unsigned default_threads() {
  if (const char *env = std::getenv("IHOLO_THREADS")) {
    char *end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void simulate(const ExperimentConfig &config, const SimulationOptions &options,
              const EventSink &sink) {
  const SimulationModel model(config);
  const unsigned threads = options.threads ? options.threads : default_threads();
  const std::uint64_t per_block = config.clock.coherence_trials;
  const std::uint64_t blocks = (config.trials + per_block - 1) / per_block;
  const std::uint64_t blocks_per_batch =
      std::max<std::uint64_t>(1, options.batch_trials / per_block);
  DeadTimeFilter dead(config.grid, config.detector.dead_time_ns);
  std::vector<DetectionEvent> carry;

  for (std::uint64_t b0 = 0; b0 < blocks; b0 += blocks_per_batch) {
    const std::uint64_t b1 = std::min(blocks, b0 + blocks_per_batch);
    const std::uint64_t n = b1 - b0;
    const unsigned workers = static_cast<unsigned>(std::min<std::uint64_t>(threads, n));
    std::vector<std::vector<DetectionEvent>> parts(workers + 1);
    auto run = [&](unsigned w) {
      std::uint64_t lo = b0 + n * w / workers, hi = b0 + n * (w + 1) / workers;
      for (std::uint64_t b = lo; b < hi; ++b) sample_block(model, b, parts[w]);
      std::sort(parts[w].begin(), parts[w].end(), events::stream_less);
    };
    if (workers == 1) {
      run(0);
    } else {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
    }
    parts[workers] = std::move(carry);
    std::vector<DetectionEvent> merged = events::merge_sorted(std::move(parts));
    carry.clear();
    if (b1 < blocks) {
      // Later batches cannot produce events before this cutoff.
      std::uint64_t cutoff = model.pulse_time_ps(b1 * per_block) - model.early_guard_ps();
      auto split = std::lower_bound(merged.begin(), merged.end(), cutoff,
                                    [](const DetectionEvent &e, std::uint64_t t) { return e.t < t; });
      carry.assign(split, merged.end());
      merged.erase(split, merged.end());
    }
    dead.apply(merged);
    if (!merged.empty()) sink(merged);
  }
}

events::EventStream run_simulation(const ExperimentConfig &config, const SimulationOptions &options) {
  events::EventStream s{simulation_header(config), {}};
  simulate(config, options, [&](std::span<const DetectionEvent> batch) {
    s.events.insert(s.events.end(), batch.begin(), batch.end());
  });
  return s;
}

} // namespace iholo::sim
