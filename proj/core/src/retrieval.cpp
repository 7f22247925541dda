#include "lm.hpp"

#include <iholo/error.hpp>
#include <iholo/retrieval.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace iholo::retrieval {
namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Sample {
  double x1, x2, g, w;
};

} // namespace

std::vector<double> unwrap(std::span<const double> phase) {
  std::vector<double> out(phase.begin(), phase.end());
  double prev = kNaN, shift = 0.0;
  for (double &p : out) {
    if (!std::isfinite(p)) continue;
    if (std::isfinite(prev)) {
      double d = p + shift - prev;
      shift -= two_pi * std::round(d / two_pi);
    }
    p += shift;
    prev = p;
  }
  return out;
}

QuadraticFit fit_quadratic(std::span<const double> phase, std::span<const double> weights,
                           double center) {
  if (!weights.empty() && weights.size() != phase.size())
    throw config_error("weights must match the phase profile length");
  std::vector<double> u = unwrap(phase);
  std::vector<std::size_t> use;
  for (std::size_t i = 0; i < u.size(); ++i)
    if (std::isfinite(u[i]) && (weights.empty() || weights[i] > 0.0)) use.push_back(i);
  if (use.size() < 3) throw numeric_error("quadratic fit needs at least 3 valid points");

  const auto n = static_cast<Eigen::Index>(use.size());
  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd y(n), sw(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    std::size_t i = use[static_cast<std::size_t>(k)];
    double x = static_cast<double>(i) - center;
    sw[k] = std::sqrt(weights.empty() ? 1.0 : weights[i]);
    A.row(k) << sw[k] * x * x, sw[k] * x, sw[k];
    y[k] = sw[k] * u[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < 3) throw numeric_error("quadratic fit is rank deficient");
  Eigen::Vector3d c = qr.solve(y);
  Eigen::VectorXd r = y - A * c;

  QuadraticFit f;
  f.a = c[0];
  f.b = c[1];
  f.c = c[2];
  f.points = use.size();
  double wsum = sw.squaredNorm();
  f.rms_residual = std::sqrt(r.squaredNorm() / wsum);
  if (n > 3) {
    Eigen::Matrix3d cov = (A.transpose() * A).inverse() * (r.squaredNorm() / static_cast<double>(n - 3));
    f.a_stderr = std::sqrt(std::max(0.0, cov(0, 0)));
  }
  return f;
}

AlignedPhase align_gauge(std::span<const double> estimate, std::span<const double> truth,
                         std::span<const std::uint8_t> mask) {
  if (estimate.size() != truth.size() || (!mask.empty() && mask.size() != truth.size()))
    throw config_error("gauge alignment needs equally sized maps");
  auto used = [&](std::size_t i) {
    return (mask.empty() || mask[i]) && std::isfinite(estimate[i]) && std::isfinite(truth[i]);
  };
  AlignedPhase best;
  double best_r = -1.0;
  for (int sign : {1, -1}) {
    Complex z{};
    for (std::size_t i = 0; i < truth.size(); ++i)
      if (used(i)) z += std::polar(1.0, truth[i] - sign * estimate[i]);
    if (std::abs(z) > best_r) {
      best_r = std::abs(z);
      best.gauge = {sign, std::arg(z)};
    }
  }
  if (best_r <= 0.0) throw Error(ErrorKind::no_data, "no pixels to align");
  best.phase.resize(estimate.size());
  double s2 = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    best.phase[i] = wrap_phase(best.gauge.sign * estimate[i] + best.gauge.offset);
    if (used(i)) {
      double d = wrap_phase(best.phase[i] - truth[i]);
      s2 += d * d;
      ++n;
    }
  }
  best.rmse = std::sqrt(s2 / static_cast<double>(n));
  return best;
}

VisibilityFit fit_visibility(const Eigen::MatrixXd &gtilde_x, const VisibilityFitOptions &options,
                             const Eigen::MatrixXd *weights) {
  const Eigen::Index W = gtilde_x.rows();
  if (gtilde_x.cols() != W || W < 2) throw config_error("visibility fit needs a square x-marginal");
  if (weights && (weights->rows() != W || weights->cols() != W))
    throw config_error("visibility weights must match the marginal shape");
  const double xc = options.center.value_or((static_cast<double>(W) - 1.0) / 2.0);

  std::vector<Sample> pts;
  for (Eigen::Index i = 0; i < W; ++i)
    for (Eigen::Index j = 0; j < W; ++j) {
      double g = gtilde_x(i, j), w = weights ? (*weights)(i, j) : 1.0;
      if (std::isfinite(g) && w > 0.0) pts.push_back({static_cast<double>(i), static_cast<double>(j), g, w});
    }
  if (pts.size() < 8) throw Error(ErrorKind::no_data, "too few points for a visibility fit");
  auto arg = [&](const Sample &s, double k, double q) {
    return k * (s.x1 - s.x2) + q * ((s.x1 - xc) * (s.x1 - xc) - (s.x2 - xc) * (s.x2 - xc));
  };

  // Grid scan: for fixed (k, q) the model is linear in (c0, c1 cos p, c1 sin p).
  double best_sse = std::numeric_limits<double>::infinity();
  Eigen::VectorXd start(5);
  std::vector<double> qs{options.curvature_hint};
  if (options.fit_curvature)
    for (int m = -12; m <= 12; ++m) qs.push_back(options.curvature_hint + 0.0025 * m);
  const auto n = static_cast<Eigen::Index>(pts.size());
  for (int step = 0; step <= 80; ++step) {
    double k = options.k0_hint * (0.8 + 0.4 * step / 80.0);
    for (double q : qs) {
      Eigen::Matrix3d AtA = Eigen::Matrix3d::Zero();
      Eigen::Vector3d Aty = Eigen::Vector3d::Zero();
      for (const Sample &s : pts) {
        double a = arg(s, k, q);
        Eigen::Vector3d row(1.0, -std::cos(a), std::sin(a));
        AtA += s.w * row * row.transpose();
        Aty += s.w * s.g * row;
      }
      Eigen::Vector3d c = AtA.ldlt().solve(Aty);
      double sse = 0.0;
      for (const Sample &s : pts) {
        double a = arg(s, k, q);
        double r = c[0] - c[1] * std::cos(a) + c[2] * std::sin(a) - s.g;
        sse += s.w * r * r;
      }
      if (sse < best_sse) {
        best_sse = sse;
        start << c[0], std::hypot(c[1], c[2]), k, q, std::atan2(c[2], c[1]);
      }
    }
  }

  const bool curv = options.fit_curvature;
  Eigen::VectorXd p0 = start;
  if (!curv) {
    p0.resize(4);
    p0 << start[0], start[1], start[2], start[4];
  }
  const double q_fixed = options.curvature_hint;
  detail::Residuals f = [&](const Eigen::VectorXd &p, Eigen::VectorXd &r) {
    double q = curv ? p[3] : q_fixed, ph = curv ? p[4] : p[3];
    for (Eigen::Index i = 0; i < n; ++i) {
      const Sample &s = pts[static_cast<std::size_t>(i)];
      r[i] = std::sqrt(s.w) * (p[0] - p[1] * std::cos(arg(s, p[2], q) + ph) - s.g);
    }
  };
  auto res = detail::levenberg_marquardt(f, n, p0);
  const Eigen::VectorXd &p = res.params;
  if (!p.allFinite()) throw numeric_error("visibility fit diverged");

  VisibilityFit v;
  v.c0 = p[0];
  v.c1 = p[1];
  v.k0_fit = p[2];
  v.curvature = curv ? p[3] : q_fixed;
  v.phase_offset = curv ? p[4] : p[3];
  if (v.c1 < 0) {
    v.c1 = -v.c1;
    v.phase_offset += std::numbers::pi;
  }
  v.phase_offset = wrap_phase(v.phase_offset);
  v.center = xc;
  if (!(v.c0 > 0.0)) throw numeric_error("visibility fit gave a non-positive offset");
  v.V = v.c1 / v.c0;
  v.A_fit = 4.0 * v.c0;
  const auto &C = res.covariance;
  double var = C(1, 1) / (v.c0 * v.c0) + v.c1 * v.c1 * C(0, 0) / std::pow(v.c0, 4) -
               2.0 * v.c1 * C(0, 1) / std::pow(v.c0, 3);
  v.V_stderr = std::sqrt(std::max(0.0, var));
  v.reduced_chi2 = res.sse / std::max<double>(1.0, static_cast<double>(n - p.size()));
  v.iterations = res.iterations;
  v.converged = res.converged;
  return v;
}

double circular_std(std::span<const double> phases) {
  if (phases.empty()) throw config_error("circular std of an empty set");
  Complex z{};
  for (double p : phases) z += std::polar(1.0, p);
  double R = std::abs(z) / static_cast<double>(phases.size());
  if (R >= 1.0) return 0.0;
  return std::sqrt(-2.0 * std::log(R));
}

std::vector<std::vector<std::size_t>> checkerboard_regions(const PixelGrid &grid, int square) {
  if (square < 1) throw config_error("checkerboard square must be >= 1");
  const int nx = (grid.width() + square - 1) / square, ny = (grid.height() + square - 1) / square;
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(nx * ny));
  for (int y = 0; y < grid.height(); ++y)
    for (int x = 0; x < grid.width(); ++x)
      out[static_cast<std::size_t>((y / square) * nx + x / square)].push_back(grid.index(x, y));
  return out;
}

std::vector<std::size_t> central_regions(const PixelGrid &grid, int square, std::size_t count) {
  auto regions = checkerboard_regions(grid, square);
  const double cx = (grid.width() - 1) / 2.0, cy = (grid.height() - 1) / 2.0;
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    double sx = 0, sy = 0;
    for (auto k : regions[i]) {
      sx += grid.pixel(k).x;
      sy += grid.pixel(k).y;
    }
    double m = static_cast<double>(regions[i].size());
    d.push_back({std::hypot(sx / m - cx, sy / m - cy), i});
  }
  std::sort(d.begin(), d.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(count, d.size()); ++i) out.push_back(d[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

PhasePrecision phase_precision(const RetrievalResult &result,
                               std::span<const std::vector<std::size_t>> regions,
                               std::span<const std::size_t> central) {
  PhasePrecision p;
  for (const auto &region : regions) {
    if (region.empty()) throw config_error("phase precision: empty region");
    std::vector<double> v;
    for (auto i : region) {
      if (i >= result.phase.size()) throw config_error("phase precision: region outside the map");
      if (result.valid.empty() || result.valid[i]) v.push_back(result.phase[i]);
    }
    p.per_region.push_back(v.empty() ? kNaN : circular_std(v));
  }
  if (central.empty()) {
    p.mean_central = kNaN;
    return p;
  }
  double s = 0.0;
  for (auto i : central) {
    if (i >= p.per_region.size()) throw config_error("phase precision: unknown central region");
    s += p.per_region[i];
  }
  p.mean_central = s / static_cast<double>(central.size());
  return p;
}

double mode_fidelity(const ComplexField &a, const ComplexField &b) {
  if (a.amplitudes().size() != b.amplitudes().size())
    throw config_error("fidelity needs fields over the same grid");
  double na = a.norm_squared(), nb = b.norm_squared();
  if (!(na > 0.0) || !(nb > 0.0)) throw numeric_error("fidelity undefined for a zero-norm field");
  Complex overlap{};
  for (std::size_t i = 0; i < a.amplitudes().size(); ++i)
    overlap += std::conj(a.amplitudes()[i]) * b.amplitudes()[i];
  return std::norm(overlap) / (na * nb);
}

PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw config_error("power-law fit needs >= 2 points");
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd A(n, 2);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto k = static_cast<std::size_t>(i);
    if (!(x[k] > 0.0) || !(y[k] > 0.0)) throw numeric_error("power-law fit needs positive data");
    A.row(i) << std::log(x[k]), 1.0;
    b[i] = std::log(y[k]);
  }
  Eigen::Vector2d c = A.colPivHouseholderQr().solve(b);
  PowerLawFit f;
  f.exponent = c[0];
  f.prefactor = std::exp(c[1]);
  if (n > 2) {
    double s2 = (b - A * c).squaredNorm() / static_cast<double>(n - 2);
    f.exponent_stderr = std::sqrt(s2 * (A.transpose() * A).inverse()(0, 0));
  }
  return f;
}

nlohmann::json to_json(const VisibilityFit &f) {
  return {{"V", f.V},
          {"V_stderr", f.V_stderr},
          {"A_fit", f.A_fit},
          {"c0", f.c0},
          {"c1", f.c1},
          {"k0_fit", f.k0_fit},
          {"curvature", f.curvature},
          {"phase_offset", f.phase_offset},
          {"center", f.center},
          {"reduced_chi2", f.reduced_chi2},
          {"iterations", f.iterations},
          {"converged", f.converged}};
}

} // namespace iholo::retrieval
