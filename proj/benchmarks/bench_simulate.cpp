#include "bench_util.hpp"

#include <benchmark/benchmark.h>

using namespace iholo;

static void BM_SimulateCoherent(benchmark::State &state) {
  const auto trials = static_cast<std::uint64_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(bench::coherent_stream(trials).events.size());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulateCoherent)->Arg(100000)->Unit(benchmark::kMillisecond);

static void BM_SimulateHeralded(benchmark::State &state) {
  nlohmann::json doc = {{"grid", {{"width", 32}, {"height", 32}}},
                        {"shear", {{"k0", 0.62}}},
                        {"signal", {{"kind", "heralded_single_photon"}}},
                        {"epsilon", 0.2},
                        {"detector", "ideal"},
                        {"trials", state.range(0)},
                        {"rng_seed", 3}};
  const auto cfg = parse_config(doc);
  for (auto _ : state) benchmark::DoNotOptimize(sim::run_simulation(cfg, {1}).events.size());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulateHeralded)->Arg(100000)->Unit(benchmark::kMillisecond);
