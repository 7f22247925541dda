#include "bench_util.hpp"

#include <iholo/events.hpp>

#include <benchmark/benchmark.h>

#include <sstream>

using namespace iholo;

static void BM_WriteStream(benchmark::State &state) {
  const auto stream = bench::coherent_stream(100000);
  for (auto _ : state) {
    std::ostringstream out;
    benchmark::DoNotOptimize(events::write_stream(stream, out));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(stream.events.size()));
}
BENCHMARK(BM_WriteStream)->Unit(benchmark::kMillisecond);

static void BM_ReadStream(benchmark::State &state) {
  std::ostringstream out;
  events::write_stream(bench::coherent_stream(100000), out);
  const std::string bytes = out.str();
  std::int64_t n = 0;
  for (auto _ : state) {
    std::istringstream in(bytes);
    events::StreamReader reader(in);
    while (auto e = reader.next()) benchmark::DoNotOptimize(e->t);
    n += static_cast<std::int64_t>(reader.records_read());
  }
  state.SetItemsProcessed(n);
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes.size()));
}
BENCHMARK(BM_ReadStream)->Unit(benchmark::kMillisecond);
