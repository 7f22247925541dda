#include <iholo/phase_mask.hpp>
#include <iholo/retrieval.hpp>

#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>

using namespace iholo;

static Eigen::MatrixXd holograms(const PhaseMask &mask) {
  const auto P = static_cast<Eigen::Index>(mask.grid().size());
  Eigen::MatrixXd X(P, P);
  for (Eigen::Index n = 0; n < P; ++n)
    for (Eigen::Index r = 0; r < P; ++r)
      X(r, n) = 1.0 - 0.5 * std::cos(mask.values()[r] - mask.values()[n]);
  return X;
}

static void BM_PcaRetrieve(benchmark::State &state) {
  const int w = static_cast<int>(state.range(0));
  constexpr double pi = std::numbers::pi;
  const std::vector<double> levels{0.0, pi / 2, pi, 3 * pi / 2};
  PixelGrid g(w, w);
  const auto X = holograms(make_checkerboard_mask(g, w / 4, levels));
  for (auto _ : state) benchmark::DoNotOptimize(retrieval::pca_retrieve_2d(g, X).phase.data());
}
BENCHMARK(BM_PcaRetrieve)->Arg(16)->Arg(24)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_FourierRetrieve(benchmark::State &state) {
  const int W = static_cast<int>(state.range(0));
  const double xc = (W - 1) / 2.0;
  Eigen::MatrixXd gx(W, W);
  for (int i = 0; i < W; ++i)
    for (int j = 0; j < W; ++j) {
      auto phi = [&](double x) { return 0.0132 * (x - xc) * (x - xc) + 0.62 * x; };
      gx(i, j) = 4.0 - 2.0 * std::cos(phi(i) - phi(j));
    }
  for (auto _ : state) benchmark::DoNotOptimize(retrieval::fourier_retrieve_1d(gx, {0.62}).phase.data());
}
BENCHMARK(BM_FourierRetrieve)->Arg(60)->Arg(120)->Unit(benchmark::kMillisecond);
