#include "bench_util.hpp"

#include <iholo/correlator.hpp>

#include <benchmark/benchmark.h>

using namespace iholo;

static void BM_CorrelateTwofold(benchmark::State &state) {
  const auto stream = bench::coherent_stream(200000);
  corr::CorrelatorOptions o;
  o.pairing = state.range(0) ? corr::PairingPolicy::unique : corr::PairingPolicy::all_pairs;
  for (auto _ : state) {
    auto t = corr::correlate(stream, o, 1);
    benchmark::DoNotOptimize(t.total);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(stream.events.size()));
}
BENCHMARK(BM_CorrelateTwofold)->Arg(0)->Arg(1)->ArgNames({"unique"})->Unit(benchmark::kMillisecond);

static void BM_CorrelateThreads(benchmark::State &state) {
  const auto stream = bench::coherent_stream(200000);
  for (auto _ : state) {
    auto t = corr::correlate(stream, {}, static_cast<unsigned>(state.range(0)));
    benchmark::DoNotOptimize(t.total);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(stream.events.size()));
}
BENCHMARK(BM_CorrelateThreads)->Arg(1)->Arg(2)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);

static void BM_GtildeX(benchmark::State &state) {
  const auto t = corr::correlate(bench::coherent_stream(200000, 60), {}, 1);
  for (auto _ : state) benchmark::DoNotOptimize(corr::normalize_gtilde_x(t).values.sum());
}
BENCHMARK(BM_GtildeX)->Unit(benchmark::kMillisecond);
