#include <iholo/config.hpp>
#include <iholo/correlator.hpp>
#include <iholo/error.hpp>
#include <iholo/retrieval.hpp>
#include <iholo/simulate.hpp>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace iholo;
using namespace iholo::retrieval;
constexpr double pi = std::numbers::pi;

namespace {

const std::vector<double> kLevels{0.0, pi / 2, pi, 3 * pi / 2};

// G(x1, x2) = I(x1) I(x2) (A - 2 M cos[Phi(x1) - Phi(x2)]) with Phi = phi + k0 x.
Eigen::MatrixXd synthetic_marginal(int W, const std::function<double(double)> &phi, double k0,
                                   double waist, double A = 4.0, double M = 1.0) {
  const double xc = (W - 1) / 2.0;
  Eigen::MatrixXd g(W, W);
  for (int i = 0; i < W; ++i)
    for (int j = 0; j < W; ++j) {
      double Ii = std::exp(-2 * (i - xc) * (i - xc) / (waist * waist));
      double Ij = std::exp(-2 * (j - xc) * (j - xc) / (waist * waist));
      g(i, j) = Ii * Ij * (A - 2 * M * std::cos(phi(i) + k0 * i - phi(j) - k0 * j));
    }
  return g;
}

// Hologram columns I_n(r) = Is(r) Ir(r_n) (A/4 - M cos[phi(r) - phi(r_n) - delta] / 2).
Eigen::MatrixXd synthetic_holograms(const PhaseMask &mask, double delta = 0.0,
                                    std::span<const double> Is = {}) {
  const auto P = static_cast<Eigen::Index>(mask.grid().size());
  Eigen::MatrixXd X(P, P);
  for (Eigen::Index n = 0; n < P; ++n)
    for (Eigen::Index r = 0; r < P; ++r) {
      double s = Is.empty() ? 1.0 : Is[r];
      X(r, n) = s * (1.0 - 0.5 * std::cos(mask.values()[r] - mask.values()[n] - delta));
    }
  return X;
}

double weighted_a(const RetrievalResult &r, double center) {
  std::vector<double> w(r.amplitude.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = r.valid[i] ? r.amplitude[i] * r.amplitude[i] : 0.0;
  return fit_quadratic(r.phase, w, center).a;
}

} // namespace

TEST(Fourier, RecoversQuadraticCoefficient) {
  const double a = 0.0132;
  auto g = synthetic_marginal(60, [&](double x) { return a * (x - 29.5) * (x - 29.5); }, 0.62, 15);
  auto r = fourier_retrieve_1d(g, {0.62});
  EXPECT_NEAR(weighted_a(r, 29.5), a, 0.01 * a);
  EXPECT_TRUE(r.diagnostics["refinement_converged"].get<bool>());
  EXPECT_EQ(r.grid.width(), 60);
}

TEST(Fourier, ConstantPhaseIsFlat) {
  auto g = synthetic_marginal(48, [](double) { return 0.7; }, 0.62, 14);
  auto r = fourier_retrieve_1d(g, {0.62});
  for (std::size_t x = 0; x < r.phase.size(); ++x)
    if (r.valid[x]) EXPECT_NEAR(r.phase[x], 0.0, 1e-3) << x;
}

TEST(Fourier, PlainFilterStillFindsCarrier) {
  FourierOptions o{0.62};
  o.refinements = 0;
  auto g = synthetic_marginal(48, [](double) { return 0.0; }, 0.62, 14);
  auto r = fourier_retrieve_1d(g, o);
  EXPECT_EQ(r.diagnostics["refinements"], 0);
  for (std::size_t x = 0; x < r.phase.size(); ++x)
    if (r.valid[x]) EXPECT_NEAR(r.phase[x], 0.0, 1e-3);
}

TEST(Fourier, RejectsCarrierAtDc) {
  auto g = synthetic_marginal(32, [](double) { return 0.0; }, 0.62, 10);
  try {
    fourier_retrieve_1d(g, {0.1});
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::numeric);
  }
  EXPECT_THROW(fourier_retrieve_1d(g, {0.0}), Error);
  EXPECT_THROW(fourier_retrieve_1d(Eigen::MatrixXd::Zero(3, 3), {0.62}), Error);
}

TEST(Quadratic, ExactAndWrappedInput) {
  std::vector<double> phase(41), wrapped(41), w(41, 1.0);
  for (int x = 0; x < 41; ++x) {
    double u = x - 20.0;
    phase[x] = 0.0132 * u * u - 0.2 * u + 0.4;
    wrapped[x] = wrap_phase(phase[x]);
  }
  auto f = fit_quadratic(phase, w, 20.0);
  EXPECT_NEAR(f.a, 0.0132, 1e-9);
  EXPECT_NEAR(f.b, -0.2, 1e-9);
  EXPECT_NEAR(f.c, 0.4, 1e-9);
  ASSERT_GT(phase.front() - phase.back(), 2 * pi);
  auto g = fit_quadratic(wrapped, w, 20.0);
  EXPECT_NEAR(g.a, 0.0132, 1e-9);
  std::vector<double> few{0.0, 1.0}, fw{1.0, 1.0};
  EXPECT_THROW(fit_quadratic(few, fw), Error);
}

TEST(Quadratic, UnwrapRemovesJumps) {
  std::vector<double> truth(100), w(100);
  for (int i = 0; i < 100; ++i) {
    truth[i] = 0.3 * i;
    w[i] = wrap_phase(truth[i]);
  }
  auto u = unwrap(w);
  for (int i = 0; i < 100; ++i) EXPECT_NEAR(u[i] - u[0], truth[i] - truth[0], 1e-9);
}

TEST(Pca, NoiselessCheckerboardIsExact) {
  PixelGrid g(16, 16);
  auto mask = make_checkerboard_mask(g, 4, kLevels);
  auto r = pca_retrieve_2d(g, synthetic_holograms(mask));
  auto al = align_gauge(r.phase, mask.canonicalized().values());
  EXPECT_LT(al.rmse, 1e-6);
  ASSERT_GE(r.singular_values.size(), 3u);
  EXPECT_GE(r.singular_values[0], r.singular_values[1]);
}

TEST(Pca, SubspacePathOnLargeGrid) {
  PixelGrid g(20, 20); // 400 pixels: block subspace iteration
  auto mask = make_checkerboard_mask(g, 5, kLevels);
  auto r = pca_retrieve_2d(g, synthetic_holograms(mask));
  EXPECT_LT(align_gauge(r.phase, mask.canonicalized().values()).rmse, 1e-6);
}

TEST(Pca, GaugeCovariance) {
  PixelGrid g(12, 12);
  auto mask = make_checkerboard_mask(g, 3, kLevels);
  auto base = pca_retrieve_2d(g, synthetic_holograms(mask));
  for (double delta : {0.4, 2.0, -1.3}) {
    auto shifted = pca_retrieve_2d(g, synthetic_holograms(mask, delta));
    EXPECT_LT(align_gauge(shifted.phase, base.phase).rmse, 1e-6);
  }
  // The recorded gauge puts the brightest pixel's phase in [0, pi).
  EXPECT_EQ(base.gauge.offset, 0.0);
}

TEST(Pca, ConstantMaskHasNoPhaseDiversity) {
  PixelGrid g(8, 8);
  PhaseMask mask(g, 1.0);
  try {
    pca_retrieve_2d(g, synthetic_holograms(mask));
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::numeric);
    EXPECT_NE(std::string(e.what()).find("no phase diversity"), std::string::npos);
  }
}

TEST(Pca, ComponentsAreOrthogonalAndBackgroundPositive) {
  PixelGrid g(10, 10);
  auto mask = make_checkerboard_mask(g, 2, kLevels);
  std::vector<double> Is(g.size());
  for (std::size_t i = 0; i < Is.size(); ++i) Is[i] = 0.5 + 0.05 * static_cast<double>(i % 7);
  Eigen::MatrixXd X = synthetic_holograms(mask, 0.0, Is);
  Eigen::MatrixXd gamma = X * X.transpose();
  auto e = leading_eigenpairs(gamma, 3, 8, 500, 1e-13);
  Eigen::VectorXd s = e.vectors.col(1), c = e.vectors.col(2);
  EXPECT_LT(std::abs(s.dot(c)) / (s.norm() * c.norm()), 1e-3);
  Eigen::VectorXd b = e.vectors.col(0);
  double sign = b.sum() > 0 ? 1.0 : -1.0;
  EXPECT_GE((sign * b).minCoeff(), 0.0);
}

TEST(Pca, SubspaceIterationMatchesDenseSolver) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  const int P = 300;
  Eigen::MatrixXd Q = Eigen::MatrixXd::NullaryExpr(P, P, [&] { return n(rng); }).householderQr().householderQ();
  Eigen::VectorXd lambda(P);
  for (int i = 0; i < P; ++i) lambda[i] = i < 3 ? 100.0 / (i + 1) : 1.0 / (i + 1);
  Eigen::MatrixXd gamma = Q * lambda.asDiagonal() * Q.transpose();
  auto e = leading_eigenpairs(gamma, 3, 8, 1000, 1e-13);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> dense(gamma);
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(e.values[k], dense.eigenvalues()[P - 1 - k], 1e-8);
    EXPECT_NEAR(std::abs(e.vectors.col(k).dot(dense.eigenvectors().col(P - 1 - k))), 1.0, 1e-8);
  }
}

TEST(Pca, RetrievesFromTensor) {
  PixelGrid g(12, 12);
  auto mask = make_checkerboard_mask(g, 3, kLevels);
  Eigen::MatrixXd X = synthetic_holograms(mask);
  corr::CorrelationTensor t(g, {});
  for (std::size_t r1 = 0; r1 < g.size(); ++r1)
    for (std::size_t r2 = 0; r2 < g.size(); ++r2)
      t.add(r1, r2, static_cast<std::uint64_t>(std::llround(1000 * X(static_cast<Eigen::Index>(r1), static_cast<Eigen::Index>(r2)))));
  auto h = tensor_cross_sections(t, 10);
  EXPECT_EQ(h.right_pixels.size(), g.size());
  auto r = pca_retrieve_2d(t);
  EXPECT_LT(align_gauge(r.phase, mask.canonicalized().values()).rmse, 2e-3);
}

TEST(Visibility, ExactModelRecovery) {
  const int W = 40;
  const double k0 = 0.62, q = 0.004;
  Eigen::MatrixXd g(W, W);
  const double xc = (W - 1) / 2.0;
  for (int i = 0; i < W; ++i)
    for (int j = 0; j < W; ++j) {
      double arg = k0 * (i - j) + q * ((i - xc) * (i - xc) - (j - xc) * (j - xc)) + 0.3;
      g(i, j) = 0.25 * (4.0 - 2.0 * std::cos(arg));
    }
  VisibilityFitOptions o;
  o.k0_hint = 0.61;
  auto f = fit_visibility(g, o);
  EXPECT_NEAR(f.V, 0.5, 1e-6);
  EXPECT_NEAR(f.A_fit, 4.0, 1e-6);
  EXPECT_NEAR(f.k0_fit, k0, 1e-6);
  EXPECT_NEAR(f.curvature, q, 1e-6);
  EXPECT_TRUE(f.converged);

  Eigen::MatrixXd scaled = 7.3 * g;
  auto s = fit_visibility(scaled, o);
  EXPECT_NEAR(s.V, f.V, 1e-9);
  EXPECT_FALSE(to_json(s).empty());
}

TEST(Visibility, NanEntriesAreSkipped) {
  const int W = 30;
  Eigen::MatrixXd g(W, W);
  for (int i = 0; i < W; ++i)
    for (int j = 0; j < W; ++j) g(i, j) = 0.25 * (5.0 - 2.0 * std::cos(0.62 * (i - j)));
  g(3, 4) = std::numeric_limits<double>::quiet_NaN();
  VisibilityFitOptions o;
  o.fit_curvature = false;
  EXPECT_NEAR(fit_visibility(g, o).V, 0.4, 1e-6);
}

TEST(Precision, CircularStatistics) {
  std::vector<double> same(10, 2.0);
  EXPECT_NEAR(circular_std(same), 0.0, 1e-12);
  std::vector<double> across{pi - 0.01, -pi + 0.01};
  EXPECT_NEAR(circular_std(across), 0.01, 1e-4);

  PixelGrid g(12, 12);
  auto mask = make_checkerboard_mask(g, 3, kLevels);
  RetrievalResult exact;
  exact.grid = g;
  exact.phase.assign(mask.values().begin(), mask.values().end());
  exact.amplitude.assign(g.size(), 1.0);
  exact.valid.assign(g.size(), 1);
  auto regions = checkerboard_regions(g, 3);
  auto central = central_regions(g, 3);
  EXPECT_EQ(regions.size(), 16u);
  ASSERT_EQ(central.size(), 4u);
  for (auto c : central) EXPECT_TRUE(c == 5 || c == 6 || c == 9 || c == 10);
  auto p = phase_precision(exact, regions, central);
  EXPECT_NEAR(p.mean_central, 0.0, 1e-12);
  std::vector<std::vector<std::size_t>> empty{{}};
  std::vector<std::size_t> first{0};
  EXPECT_THROW(phase_precision(exact, empty, first), Error);
}

TEST(Precision, FloorNoiseFlattensScaling) {
  // Shot noise ~ 1/sqrt(N) on top of a fixed per-pixel phase error.
  PixelGrid g(12, 12);
  auto mask = make_checkerboard_mask(g, 3, kLevels);
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n;
  std::vector<double> floor(g.size());
  for (auto &f : floor) f = 0.05 * n(rng);
  auto regions = checkerboard_regions(g, 3);
  auto central = central_regions(g, 3);
  std::vector<double> Ns, clean, floored;
  for (double N : {1e3, 1e4, 1e5, 1e6, 1e7}) {
    RetrievalResult a, b;
    a.grid = b.grid = g;
    a.amplitude = b.amplitude = std::vector<double>(g.size(), 1.0);
    a.valid = b.valid = std::vector<std::uint8_t>(g.size(), 1);
    for (std::size_t i = 0; i < g.size(); ++i) {
      double shot = 10.0 / std::sqrt(N) * n(rng);
      a.phase.push_back(mask.values()[i] + shot);
      b.phase.push_back(mask.values()[i] + shot + floor[i]);
    }
    Ns.push_back(N);
    clean.push_back(phase_precision(a, regions, central).mean_central);
    floored.push_back(phase_precision(b, regions, central).mean_central);
  }
  EXPECT_NEAR(fit_power_law(Ns, clean).exponent, -0.5, 0.1);
  EXPECT_GT(fit_power_law(Ns, floored).exponent, -0.35);
}

TEST(Fidelity, Limits) {
  PixelGrid g(2, 1);
  ComplexField a(g, {Complex{1, 0}, Complex{0, 0}}), b(g, {Complex{0, 0}, Complex{0, 1}});
  EXPECT_NEAR(mode_fidelity(a, a), 1.0, 1e-15);
  EXPECT_NEAR(mode_fidelity(a, b), 0.0, 1e-15);
  ComplexField c(g, {Complex{1, 0}, Complex{1, 0}}), d(g, {Complex{0, 2}, Complex{0, 2}});
  EXPECT_NEAR(mode_fidelity(c, d), 1.0, 1e-15);
  EXPECT_THROW(mode_fidelity(a, ComplexField(g)), Error);
}

TEST(PowerLaw, ExactRecovery) {
  std::vector<double> x{1e4, 1e5, 1e6, 1e7}, y;
  for (double v : x) y.push_back(3.0 * std::pow(v, -0.5));
  auto f = fit_power_law(x, y);
  EXPECT_NEAR(f.exponent, -0.5, 1e-12);
  EXPECT_NEAR(f.prefactor, 3.0, 1e-9);
}

TEST(Agreement, FourierAndPcaOnSeparableMask) {
  nlohmann::json doc = {{"grid", {{"width", 48}, {"height", 2}}},
                        {"beam", {{"waist_px", 19.2}}},
                        {"mask", {{"type", "quadratic"}, {"a", 0.0132}, {"center", 23.5}}},
                        {"shear", {{"k0", 0.62}}},
                        {"signal", {{"kind", "coherent"}, {"mean_photons", 1.0}}},
                        {"detector", "ideal"},
                        {"trials", 1000000},
                        {"rng_seed", 9}};
  auto cfg = parse_config(doc);
  auto stream = sim::run_simulation(cfg, {sim::default_threads()});
  auto t = corr::correlate(stream, {5000}, sim::default_threads());
  ASSERT_GE(t.total, 900000u);
  auto fourier = fourier_retrieve_1d(corr::marginal_x(t), {0.62});
  auto pca = pca_retrieve_2d(t);
  // PCA sees the full signal phase; strip the carrier and keep row y = 0.
  std::vector<double> pca_row(48), four(48);
  std::vector<std::uint8_t> valid(48);
  for (int x = 0; x < 48; ++x) {
    pca_row[x] = wrap_phase(pca.phase[cfg.grid.index(x, 0)] - 0.62 * x);
    four[x] = fourier.phase[x];
    valid[x] = fourier.valid[x] && pca.valid[cfg.grid.index(x, 0)];
  }
  // Carrier sign flips with the PCA gauge sign; try both.
  auto direct = align_gauge(pca_row, four, valid);
  for (int x = 0; x < 48; ++x) pca_row[x] = wrap_phase(pca.phase[cfg.grid.index(x, 0)] + 0.62 * x);
  auto flipped = align_gauge(pca_row, four, valid);
  EXPECT_LT(std::min(direct.rmse, flipped.rmse), 0.05);
}
