#include <benchmark/benchmark.h>

#include "twinreg/data.hpp"
#include "twinreg/forest.hpp"
#include "twinreg/pairing.hpp"
#include "twinreg/twin.hpp"

using namespace twinreg;

static void BM_FullPairing(benchmark::State& state) {
  const Dataset d = generate_test_function(state.range(0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(build_pairs(d, PairingStrategy::full(), 0));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_FullPairing)->Arg(100)->Arg(700);

static void BM_NearestPairing(benchmark::State& state) {
  const Dataset d = generate_test_function(700, 1);
  for (auto _ : state) benchmark::DoNotOptimize(build_pairs(d, PairingStrategy::nearest(state.range(0)), 0));
}
BENCHMARK(BM_NearestPairing)->Arg(16)->Arg(64);

static void BM_MlpEpoch(benchmark::State& state) {
  const Dataset d = generate_test_function(200, 2);
  const PairedDataset p = build_pairs(d, PairingStrategy::full(), 0);
  MlpConfig c;
  c.max_epochs = 1;
  c.optimizer = OptimizerKind::adam;
  c.learning_rate = 1e-3;
  const LearnerConfig lc = LearnerConfig::make_mlp(c);
  for (auto _ : state) benchmark::DoNotOptimize(fit(lc, p.pair_features, p.pair_targets, std::nullopt, 3));
  state.SetItemsProcessed(state.iterations() * p.size());
}
BENCHMARK(BM_MlpEpoch)->Unit(benchmark::kMillisecond);

static void BM_ForestFit(benchmark::State& state) {
  const Dataset d = generate_wheatstone(100, 3);
  const PairedDataset p = build_pairs(d, PairingStrategy::full(true), 0);
  ForestParams fp;
  fp.n_estimators = state.range(0);
  for (auto _ : state) benchmark::DoNotOptimize(train_forest(fp, p.pair_features, p.pair_targets, 4));
}
BENCHMARK(BM_ForestFit)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

static void BM_TwinPredict(benchmark::State& state) {
  const Dataset train = generate_test_function(700, 5);
  const Dataset test = generate_test_function(200, 6);
  MlpConfig c;
  c.max_epochs = 1;
  c.max_steps = 1;
  const TwinModel tm = twin_fit(LearnerConfig::make_mlp(c), train, PairingStrategy::full(), std::nullopt, 7);
  const AnchorPolicy policy =
      state.range(0) == 0 ? AnchorPolicy::all() : AnchorPolicy::nearest(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(twin_predict_values(tm, test.features, policy));
  state.SetItemsProcessed(state.iterations() * test.rows());
}
BENCHMARK(BM_TwinPredict)->Arg(0)->Arg(32)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
