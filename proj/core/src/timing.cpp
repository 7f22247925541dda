#include "lm.hpp"

#include <iholo/error.hpp>
#include <iholo/timing.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace iholo::corr {

using events::Channel;

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Parameters: amplitudes for k = -K..K, then centre, sigma, background.
// Heights and background enter as squares so they stay non-negative; peaks
// centred outside the span are otherwise free to go negative.
double peak_model(const Eigen::VectorXd &p, int K, double period, double t) {
  const Eigen::Index base = 2 * K + 1;
  double s = p[base + 2] * p[base + 2];
  for (int k = -K; k <= K; ++k) {
    double z = (t - p[base] - k * period) / p[base + 1];
    s += p[k + K] * p[k + K] * std::exp(-0.5 * z * z);
  }
  return s;
}

} // namespace

std::uint64_t TimestampHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

TimestampHistogram timestamp_histogram(std::span<const DetectionEvent> events,
                                       std::uint64_t bin_width_ps, std::uint64_t span_ps,
                                       std::uint64_t pulse_period_ps) {
  if (bin_width_ps == 0) throw config_error("histogram bin width must be positive");
  TimestampHistogram h;
  h.bin_width_ps = bin_width_ps;
  h.pulse_period_ps = pulse_period_ps;
  const auto half_bins = static_cast<std::int64_t>((span_ps + bin_width_ps - 1) / bin_width_ps);
  h.counts.assign(static_cast<std::size_t>(2 * half_bins + 1), 0);
  const auto bw = static_cast<std::int64_t>(bin_width_ps);
  // Bin 0 of the centre sits on zero delay.
  h.origin_ps = -half_bins * bw - bw / 2;

  std::vector<std::uint64_t> heralds;
  for (const auto &e : events)
    if (e.channel == Channel::herald) heralds.push_back(e.t);
  // Whole bins only: the outer edges may extend slightly past span_ps.
  const auto reach = static_cast<std::uint64_t>(half_bins * bw + bw / 2 + bw);
  for (const auto &e : events) {
    if (!events::is_camera(e.channel)) continue;
    auto lo = std::lower_bound(heralds.begin(), heralds.end(), e.t >= reach ? e.t - reach : 0);
    for (auto it = lo; it != heralds.end() && *it <= e.t + reach; ++it) {
      std::int64_t d = static_cast<std::int64_t>(e.t) - static_cast<std::int64_t>(*it) - h.origin_ps;
      if (d < 0) continue;
      auto bin = static_cast<std::size_t>(d / bw);
      if (bin < h.counts.size()) ++h.counts[bin];
    }
  }
  return h;
}

PeakFit fit_pulse_peaks(const TimestampHistogram &hist) {
  if (hist.total() == 0) throw Error(ErrorKind::no_data, "timestamp histogram is empty");
  const double T = static_cast<double>(hist.pulse_period_ps);
  const auto n = static_cast<Eigen::Index>(hist.counts.size());
  std::vector<double> t(hist.counts.size()), y(hist.counts.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = hist.bin_center_ps(i);
    y[i] = static_cast<double>(hist.counts[i]);
  }

  // Starting point from the tallest bin near zero delay.
  std::size_t best = 0;
  double best_y = -1.0;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (std::abs(t[i]) <= T / 2 && y[i] > best_y) {
      best_y = y[i];
      best = i;
    }
  const double bg0 = *std::min_element(y.begin(), y.end());
  const double mu0 = t[best];
  double w = 0, m2 = 0;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (std::abs(t[i] - mu0) <= T / 2) {
      double c = std::max(0.0, y[i] - bg0);
      w += c;
      m2 += c * (t[i] - mu0) * (t[i] - mu0);
    }
  double sigma0 = w > 0 ? std::sqrt(m2 / w) : T / 6;
  sigma0 = std::clamp(sigma0, static_cast<double>(hist.bin_width_ps), T);
  auto value_near = [&](double at) {
    std::size_t k = 0;
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < t.size(); ++i)
      if (std::abs(t[i] - at) < d) {
        d = std::abs(t[i] - at);
        k = i;
      }
    return std::max(0.0, y[k] - bg0);
  };
  // Every peak whose centre lies within one period of the histogram edge.
  const double reach = std::max(std::abs(t.front()), std::abs(t.back()));
  const int K = std::max(1, static_cast<int>(std::ceil(reach / T)));
  const Eigen::Index base = 2 * K + 1;
  Eigen::VectorXd p(base + 3);
  for (int k = -K; k <= K; ++k) p[k + K] = std::sqrt(std::max(1.0, k == 0 ? best_y - bg0 : value_near(mu0 + k * T)));
  p[base] = mu0;
  p[base + 1] = sigma0;
  p[base + 2] = std::sqrt(std::max(0.0, bg0));

  detail::Residuals f = [&](const Eigen::VectorXd &q, Eigen::VectorXd &r) {
    for (Eigen::Index i = 0; i < n; ++i) {
      auto ui = static_cast<std::size_t>(i);
      r[i] = (peak_model(q, K, T, t[ui]) - y[ui]) / std::sqrt(std::max(1.0, y[ui]));
    }
  };
  auto res = detail::levenberg_marquardt(f, n, p);
  const Eigen::VectorXd &q = res.params;
  if (!q.allFinite() || q[base + 1] == 0.0) throw numeric_error("pulse-peak fit failed to converge");

  PeakFit fit;
  fit.max_order = K;
  fit.amplitude.resize(static_cast<std::size_t>(base));
  for (Eigen::Index i = 0; i < base; ++i) fit.amplitude[static_cast<std::size_t>(i)] = q[i] * q[i];
  fit.center_ps = q[base];
  fit.sigma_ps = std::abs(q[base + 1]);
  fit.background = q[base + 2] * q[base + 2];
  fit.period_ps = T;
  fit.reduced_chi2 = res.sse / std::max<double>(1.0, static_cast<double>(n - q.size()));
  return fit;
}

double leakage_from_peaks(const PeakFit &fit, double half_window_ps) {
  auto mass = [&](int k) {
    double a = std::max(0.0, fit.height(k));
    double lo = (-half_window_ps - k * fit.period_ps) / fit.sigma_ps;
    double hi = (half_window_ps - k * fit.period_ps) / fit.sigma_ps;
    return a * fit.sigma_ps * (normal_cdf(hi) - normal_cdf(lo));
  };
  double central = mass(0), neighbours = 0.0;
  for (int k = 1; k <= fit.max_order; ++k) neighbours += mass(-k) + mass(k);
  if (!(central + neighbours > 0.0)) throw numeric_error("no fitted counts inside the window");
  return neighbours / (central + neighbours);
}

AccidentalEstimate accidental_fraction(const TimestampHistogram &hist, std::uint64_t tau_w_ps,
                                       int camera_photons, WindowConvention window) {
  if (camera_photons < 1) throw config_error("camera_photons must be >= 1");
  AccidentalEstimate out;
  out.fit = fit_pulse_peaks(hist);
  double half = window == WindowConvention::centered ? tau_w_ps / 2.0 : static_cast<double>(tau_w_ps);
  out.per_photon_leakage = leakage_from_peaks(out.fit, half);
  out.fraction = 1.0 - std::pow(1.0 - out.per_photon_leakage, camera_photons);
  return out;
}

G2Estimate estimate_g2(std::span<const std::uint32_t> counts) {
  constexpr std::size_t min_trials = 1000;
  if (counts.size() < min_trials)
    throw Error(ErrorKind::no_data, "g2 estimate needs at least 1000 trials, got " +
                                        std::to_string(counts.size()));
  const double N = static_cast<double>(counts.size());
  double sy = 0, sx = 0, syy = 0, sxx = 0, sxy = 0;
  for (auto c : counts) {
    double y = c, x = y * (y - 1.0);
    sy += y;
    sx += x;
    syy += y * y;
    sxx += x * x;
    sxy += x * y;
  }
  const double my = sy / N, mx = sx / N;
  if (my == 0.0) throw numeric_error("g2 undefined: no photons counted");
  const double vy = syy / N - my * my, vx = sxx / N - mx * mx, cxy = sxy / N - mx * my;
  G2Estimate g;
  g.trials = counts.size();
  g.mean = my;
  g.g2 = mx / (my * my);
  // Delta method for X / Y^2.
  const double dx = 1.0 / (my * my), dy = -2.0 * mx / (my * my * my);
  double var = (dx * dx * vx + dy * dy * vy + 2 * dx * dy * cxy) / N;
  g.std_error = std::sqrt(std::max(0.0, var));
  return g;
}

std::vector<std::uint32_t> per_trial_counts(std::span<const DetectionEvent> events,
                                            const events::StreamHeader &header, bool left,
                                            bool right, bool heralded_only) {
  const auto &m = header.metadata;
  const std::uint64_t offset = m.is_object() ? m.value("start_offset_ps", std::uint64_t{0}) : 0;
  const double period = static_cast<double>(header.pulse_period_ps);
  if (period <= 0.0) throw config_error("stream has no pulse period");
  std::uint64_t trials = trials_of(header, events);
  if (!m.is_object() || !m.contains("trials")) {
    trials = 0;
    for (const auto &e : events) {
      double k = std::round((static_cast<double>(e.t) - static_cast<double>(offset)) / period);
      if (k >= 0) trials = std::max(trials, static_cast<std::uint64_t>(k) + 1);
    }
  }
  std::vector<std::uint32_t> n(trials, 0);
  std::vector<char> heralded(heralded_only ? trials : 0, 0);
  for (const auto &e : events) {
    double k = std::round((static_cast<double>(e.t) - static_cast<double>(offset)) / period);
    if (k < 0 || k >= static_cast<double>(trials)) continue;
    auto i = static_cast<std::size_t>(k);
    if (e.channel == Channel::herald) {
      if (heralded_only) heralded[i] = 1;
    } else if ((e.channel == Channel::left && left) || (e.channel == Channel::right && right)) {
      ++n[i];
    }
  }
  if (!heralded_only) return n;
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < n.size(); ++i)
    if (heralded[i]) out.push_back(n[i]);
  return out;
}

FirstOrderFringe singles_fringe(std::span<const DetectionEvent> events, const PhaseMask &phase,
                                std::size_t batches) {
  if (batches < 2) throw config_error("singles fringe test needs at least 2 batches");
  std::vector<const DetectionEvent *> cam;
  for (const auto &e : events)
    if (events::is_camera(e.channel)) cam.push_back(&e);
  if (cam.size() < 2 * batches) throw Error(ErrorKind::no_data, "too few camera events for the fringe test");
  std::vector<Complex> v(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    std::size_t lo = cam.size() * b / batches, hi = cam.size() * (b + 1) / batches;
    Complex s{};
    for (std::size_t i = lo; i < hi; ++i) {
      const auto &e = *cam[i];
      double sign = e.channel == Channel::left ? 1.0 : -1.0;
      s += sign * std::polar(1.0, -phase.at(e.x, e.y));
    }
    v[b] = 2.0 * s / static_cast<double>(hi - lo);
  }
  FirstOrderFringe f;
  f.batches = batches;
  for (auto c : v) f.mean += c;
  f.mean /= static_cast<double>(batches);
  double vr = 0, vi = 0;
  for (auto c : v) {
    vr += (c.real() - f.mean.real()) * (c.real() - f.mean.real());
    vi += (c.imag() - f.mean.imag()) * (c.imag() - f.mean.imag());
  }
  const double B = static_cast<double>(batches);
  f.sigma = std::sqrt(0.5 * (vr + vi) / (B - 1.0) / B);
  f.visibility = std::abs(f.mean);
  return f;
}

} // namespace iholo::corr
