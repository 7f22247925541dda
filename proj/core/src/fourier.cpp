#include <iholo/error.hpp>
#include <iholo/retrieval.hpp>

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>

namespace iholo::retrieval {
namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

// FFTW planning is not thread-safe.
std::mutex &planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n)
      : data(static_cast<fftw_complex *>(fftw_malloc(sizeof(fftw_complex) * n))) {
    if (!data) throw numeric_error("FFTW allocation failed");
  }
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer &) = delete;
  FftwBuffer &operator=(const FftwBuffer &) = delete;
  std::complex<double> *get() { return reinterpret_cast<std::complex<double> *>(data); }
  fftw_complex *data;
};

struct Plan {
  Plan(int n, FftwBuffer &buf, int sign) {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_2d(n, n, buf.data, buf.data, sign, FFTW_ESTIMATE);
    if (!plan) throw numeric_error("FFTW planning failed");
  }
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  Plan(const Plan &) = delete;
  Plan &operator=(const Plan &) = delete;
  void run() { fftw_execute(plan); }
  fftw_plan plan;
};

double frequency(int f, int n) {
  int g = f <= n / 2 ? f : f - n;
  return two_pi * g / n;
}

} // namespace

RetrievalResult fourier_retrieve_1d(const Eigen::MatrixXd &gx, const FourierOptions &options) {
  const auto W = static_cast<int>(gx.rows());
  if (W < 4 || gx.cols() != gx.rows())
    throw config_error("Fourier retrieval needs a square x-marginal of width >= 4");
  const double k0 = options.k0;
  const double k_min = 2.0 * two_pi / W;
  if (!(std::abs(k0) >= k_min) || std::abs(k0) > std::numbers::pi)
    throw numeric_error("shear k0 = " + std::to_string(k0) +
                        " rad/px leaves the sideband indistinguishable from DC (needs " +
                        std::to_string(k_min) + " <= |k0| <= pi)");
  const double sigma = options.window_sigma.value_or(std::abs(k0) / 4.0);
  if (!(sigma > 0.0)) throw config_error("window sigma must be positive");
  if (options.refinements < 0) throw config_error("refinements must be >= 0");

  // Mean-free data, non-finite entries as zero.
  double mean = 0.0;
  std::size_t finite = 0;
  for (int i = 0; i < W; ++i)
    for (int j = 0; j < W; ++j)
      if (std::isfinite(gx(i, j))) {
        mean += gx(i, j);
        ++finite;
      }
  if (finite == 0) throw Error(ErrorKind::no_data, "x-marginal has no finite entries");
  mean /= static_cast<double>(finite);

  const int N = 2 * W; // zero padding against wrap-around
  const auto NN = static_cast<std::size_t>(N) * static_cast<std::size_t>(N);
  FftwBuffer buf(NN);
  Plan forward(N, buf, FFTW_FORWARD), backward(N, buf, FFTW_BACKWARD);
  std::vector<double> window(NN);
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b) {
      double ka = frequency(a, N), kb = frequency(b, N);
      window[static_cast<std::size_t>(a) * N + b] = std::exp(-(ka * ka + kb * kb) / (2 * sigma * sigma));
    }

  // The background is A/4 times the product of the one-sided intensity
  // profiles, so the outer product of the row and column sums removes it up to
  // the small fringe contribution to those sums.
  std::vector<double> rows(W, 0.0), cols(W, 0.0);
  double total = 0.0;
  for (int i = 0; i < W; ++i)
    for (int j = 0; j < W; ++j)
      if (std::isfinite(gx(i, j))) {
        rows[i] += gx(i, j);
        cols[j] += gx(i, j);
        total += gx(i, j);
      }
  std::vector<double> data(static_cast<std::size_t>(W) * W);
  for (int i = 0; i < W; ++i)
    for (int j = 0; j < W; ++j) {
      double bg = total != 0.0 ? rows[i] * cols[j] / total : mean;
      data[static_cast<std::size_t>(i) * W + j] = std::isfinite(gx(i, j)) ? gx(i, j) - bg : 0.0;
    }

  std::vector<double> carrier(W), theta(W), amp(W), phi_total(W);
  for (int x = 0; x < W; ++x) carrier[x] = k0 * x;
  const double xc = (W - 1) / 2.0;
  QuadraticFit fit{};
  int passes = 0;
  bool converged = false;
  std::vector<std::string> warnings;
  for (int pass = 0; pass <= options.refinements; ++pass) {
    auto *d = buf.get();
    std::fill(d, d + NN, std::complex<double>{});
    for (int i = 0; i < W; ++i)
      for (int j = 0; j < W; ++j) {
        d[static_cast<std::size_t>(i) * N + j] =
            data[static_cast<std::size_t>(i) * W + j] * std::polar(1.0, -(carrier[i] - carrier[j]));
      }
    forward.run();
    for (std::size_t k = 0; k < NN; ++k) d[k] *= window[k];
    backward.run();

    theta[0] = 0.0;
    for (int x = 0; x < W; ++x) {
      double s = 0.0;
      for (int j = 0; j < W; ++j) s += std::norm(d[static_cast<std::size_t>(x) * N + j]);
      amp[x] = std::sqrt(s) / static_cast<double>(NN);
      if (x + 1 < W) {
        std::complex<double> z{};
        for (int j = 0; j < W; ++j)
          z += d[static_cast<std::size_t>(x + 1) * N + j] * std::conj(d[static_cast<std::size_t>(x) * N + j]);
        theta[x + 1] = theta[x] + std::arg(z);
      }
    }
    for (int x = 0; x < W; ++x) phi_total[x] = carrier[x] + theta[x];
    if (pass == options.refinements || converged) break;
    std::vector<double> w(W);
    for (int x = 0; x < W; ++x) w[x] = amp[x] * amp[x];
    fit = fit_quadratic(phi_total, w, xc);
    // The constant term is a free gauge; only the local slope counts.
    const std::vector<double> previous = carrier;
    for (int x = 0; x < W; ++x) {
      double u = x - xc;
      carrier[x] = fit.a * u * u + fit.b * u + fit.c;
    }
    double moved = 0.0;
    for (int x = 1; x < W; ++x)
      moved = std::max(moved, std::abs((carrier[x] - carrier[x - 1]) - (previous[x] - previous[x - 1])));
    ++passes;
    // One more pass demodulates with the settled carrier.
    converged = moved < options.refine_tolerance;
  }
  if (options.refinements > 0 && !converged && passes == options.refinements)
    warnings.push_back("carrier refinement stopped at the iteration limit");

  RetrievalResult r;
  r.grid = PixelGrid(W, 1);
  r.amplitude = amp;
  double peak = 0.0;
  int bright = 0;
  for (int x = 0; x < W; ++x)
    if (amp[x] > peak) {
      peak = amp[x];
      bright = x;
    }
  if (!(peak > 0.0)) throw numeric_error("no sideband signal found at the given k0");
  const double offset = phi_total[bright] - k0 * bright;
  r.phase.resize(W);
  r.valid.resize(W);
  for (int x = 0; x < W; ++x) {
    r.phase[x] = wrap_phase(phi_total[x] - k0 * x - offset);
    r.valid[x] = amp[x] >= options.amplitude_floor * peak;
  }
  r.gauge = {1, offset};
  r.diagnostics = {{"method", "fourier"},
                   {"k0", k0},
                   {"window_sigma", sigma},
                   {"refinements", passes},
                   {"refinement_converged", converged || options.refinements == 0},
                   {"warnings", warnings},
                   {"reference_pixel", bright},
                   {"amplitude_floor", options.amplitude_floor}};
  return r;
}

} // namespace iholo::retrieval
