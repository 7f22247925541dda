#include <iholo/error.hpp>
#include <iholo/expansion.hpp>
#include <iholo/theory.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

using namespace iholo;
using namespace iholo::theory;
using C = std::complex<double>;
constexpr double pi = std::numbers::pi;

TEST(Theory, BackgroundAndVisibility) {
  EXPECT_DOUBLE_EQ(background_A(1, 1, 1), 4.0);
  EXPECT_DOUBLE_EQ(visibility({1, 1, 1, 1}), 0.5);
  EXPECT_DOUBLE_EQ(visibility({2, 1, 1, 1}), 0.4);
  EXPECT_DOUBLE_EQ(visibility({0, 1, 0.2, 1}), 2.0 / 2.2);
  EXPECT_DOUBLE_EQ(visibility({1, 1, 1, 0.5}), 0.25);
  EXPECT_THROW(background_A(1, 1, 0), Error);
  EXPECT_THROW(background_A(-1, 1, 1), Error);
}

TEST(Theory, OptimalEpsilonMinimizesBackground) {
  for (auto [gs, gr] : {std::pair{0.049, 1.006}, {1.0, 1.0}, {1.92, 1.006}, {3.0, 2.0}}) {
    double eps = optimal_epsilon(gs, gr).epsilon;
    // Independent oracle: dense logarithmic scan of A.
    double best = 0, bestA = 1e300;
    for (int i = 0; i <= 200000; ++i) {
      double e = std::pow(10.0, -3 + 6.0 * i / 200000);
      double A = 2 + gs / e + e * gr;
      if (A < bestA) bestA = A, best = e;
    }
    EXPECT_NEAR(eps, best, best * 1e-4);
    EXPECT_NEAR(background_A(gs, gr, eps), bestA, 1e-9);
  }
  EXPECT_TRUE(optimal_epsilon(0.0, 1.0).at_supremum);
}

TEST(Theory, VisibilityCurvePeaksAtOptimum) {
  auto curve = visibility_curve(1.92, 1.006, 1.0, 0.01, 100.0, 401);
  ASSERT_EQ(curve.size(), 401u);
  EXPECT_NEAR(curve.front().epsilon, 0.01, 1e-12);
  EXPECT_NEAR(curve.back().epsilon, 100.0, 1e-9);
  auto best = std::max_element(curve.begin(), curve.end(),
                               [](auto &a, auto &b) { return a.V < b.V; });
  EXPECT_NEAR(best->epsilon, std::sqrt(1.92 / 1.006), 0.05);
  for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_GT(curve[i].epsilon, curve[i - 1].epsilon);
}

TEST(Theory, GtildeFromCoherenceMatchesSingleModeForm) {
  double dphi = 1.1;
  double g = gtilde_from_coherence(1.0, 1.0, 1.0, std::polar(1.0, dphi), C{1, 0});
  EXPECT_NEAR(g, 0.25 * (4 - 2 * std::cos(dphi)), 1e-12);

  PixelGrid grid(3, 1);
  PhaseMask m(grid, std::vector<double>{0.0, 0.7, 2.0});
  VisibilityModel vm{2.0, 1.0, 1.0, 0.8};
  double A = background_A(2, 1, 1);
  EXPECT_NEAR(predict_gtilde(m, {0, 0}, {2, 0}, vm), 0.25 * (A - 2 * 0.8 * std::cos(-2.0)), 1e-12);

  std::vector<double> Is{1.0, 2.0, 3.0};
  auto h = predict_cross_section(m, {1, 0}, Is, 0.5, vm);
  for (int x = 0; x < 3; ++x)
    EXPECT_NEAR(h[x], Is[x] * 0.5 * (A / 4 - 0.8 * std::cos(m.values()[x] - 0.7) / 2), 1e-12);
}

TEST(Theory, BlurAttenuationMatchesGaussianAverage) {
  // Oracle: trapezoidal average of cos(k0 u) over u ~ N(0, dx^2).
  for (auto [k0, dx] : {std::pair{0.62, 2.0}, {0.3, 1.0}, {1.0, 0.5}}) {
    double s = 0, w = 0;
    for (int i = -4000; i <= 4000; ++i) {
      double u = i * 10 * dx / 4000, p = std::exp(-0.5 * u * u / (dx * dx));
      s += p * std::cos(k0 * u);
      w += p;
    }
    EXPECT_NEAR(blur_attenuation(k0, dx), s / w, 1e-9);
  }
  EXPECT_NEAR(blur_attenuation(0.62, 2.0), 0.4636, 1e-4);
}

namespace {

double classical_product(C as1, C as2, C ar1, C ar2, double theta) {
  C e = std::polar(1.0, theta);
  double Ic = 0.5 * std::norm(as1 + ar1 * e);
  double Id = 0.5 * std::norm(as2 - ar2 * e);
  return Ic * Id;
}

} // namespace

TEST(Expansion, SixteenTermsReproduceClassicalProduct) {
  auto terms = output_correlation_expansion();
  ASSERT_EQ(terms.size(), 16u);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 50; ++trial) {
    C as1{n(rng), n(rng)}, as2{n(rng), n(rng)}, ar1{n(rng), n(rng)}, ar2{n(rng), n(rng)};
    double theta = 2 * pi * std::uniform_real_distribution<double>()(rng);
    C sum = 0;
    for (const auto &t : terms) sum += evaluate(t, as1, as2, ar1, ar2, theta);
    EXPECT_NEAR(sum.real(), classical_product(as1, as2, ar1, ar2, theta), 1e-10);
    EXPECT_NEAR(sum.imag(), 0.0, 1e-10);
  }
}

TEST(Expansion, PhaseAverageKeepsSixTerms) {
  auto terms = output_correlation_expansion();
  auto avg = ensemble_average_expansion(terms);
  ASSERT_EQ(avg.size(), 6u);
  for (const auto &t : avg) EXPECT_EQ(t.theta_power, 0);
  // Ordering: mixed intensities first, interference last.
  auto kinds = [](const ExpansionTerm &t) {
    int s = 0;
    for (const auto &op : t.ops) s += op.mode == InputMode::s;
    return s;
  };
  EXPECT_EQ(kinds(avg[0]), 2);
  EXPECT_EQ(kinds(avg[2]), 4);
  EXPECT_EQ(kinds(avg[3]), 0);
  EXPECT_EQ(kinds(avg[5]), 2);

  // Oracle: quadrature average of the classical product over theta.
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 20; ++trial) {
    C as1{n(rng), n(rng)}, as2{n(rng), n(rng)}, ar1{n(rng), n(rng)}, ar2{n(rng), n(rng)};
    double mean = 0;
    const int Q = 64;
    for (int q = 0; q < Q; ++q) mean += classical_product(as1, as2, ar1, ar2, 2 * pi * q / Q) / Q;
    C sum = 0;
    for (const auto &t : avg) sum += evaluate(t, as1, as2, ar1, ar2, 0.3);
    EXPECT_NEAR(sum.real(), mean, 1e-10);
  }
  EXPECT_FALSE(to_string(avg.back()).empty());
}
