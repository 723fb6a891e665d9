#include "market.hpp"

#include "bubblescope/panel.hpp"

#include <benchmark/benchmark.h>

using namespace bubblescope;

static void BM_BuildPanel(benchmark::State& state) {
  const ingest::TransferLog log(bench_market(static_cast<int>(state.range(0))).transfers);
  for (auto _ : state) benchmark::DoNotOptimize(panel::build_panel(log, static_cast<int>(state.range(1))));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(log.size()));
}
BENCHMARK(BM_BuildPanel)->Args({10, 1})->Args({50, 1})->Args({50, 4})->Unit(benchmark::kMillisecond);

static void BM_Winsorize(benchmark::State& state) {
  const auto p = panel::build_panel(ingest::TransferLog(bench_market(50).transfers)).panel;
  for (auto _ : state) benchmark::DoNotOptimize(panel::winsorize(p, 0.01));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(p.size()));
}
BENCHMARK(BM_Winsorize)->Unit(benchmark::kMillisecond);
