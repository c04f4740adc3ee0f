#include <vector>

#include <benchmark/benchmark.h>

#include "prefopt/eval.hpp"
#include "prefopt/losses.hpp"
#include "prefopt/synthetic.hpp"
#include "prefopt/trainer.hpp"

using namespace prefopt;

namespace {

const Dataset& dataset() {
  static const Dataset d = [] {
    GeneratorConfig g;
    g.num_pairs = 1024;
    return prepare_dataset(generate_synthetic(g), LossVariant::kDpo2D, {});
  }();
  return d;
}

std::vector<PreferencePair> batch(std::size_t n) {
  return {dataset().pairs.begin(), dataset().pairs.begin() + static_cast<std::ptrdiff_t>(n)};
}

void BM_LossAndGrad(benchmark::State& state) {
  const auto variant = static_cast<LossVariant>(state.range(0));
  const auto pairs = batch(32);
  const auto ref = ReferencePolicy::uniform(dataset().vocab_size);
  const auto params = PolicyParams::random(dataset().vocab_size, 1, 0.5);
  const LossConfig cfg{variant, 0.5, 0.1, 0.1};
  Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_grad(cfg, params, ref, pairs, rng).value);
  state.SetLabel(std::string(to_string(variant)));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(pairs.size()));
}
BENCHMARK(BM_LossAndGrad)->DenseRange(0, 5);

void BM_MinibatchStep(benchmark::State& state) {
  const auto pairs = batch(static_cast<std::size_t>(state.range(0)));
  const auto ref = ReferencePolicy::uniform(dataset().vocab_size);
  PolicyParams params = ref.as_params();
  TrainConfig cfg;
  cfg.loss = {LossVariant::kRobust2DSegment, 0.5, 0.0, 0.0};
  Rng rng(2);
  for (auto _ : state) params = minibatch_step(params, ref, pairs, cfg, rng).params;
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MinibatchStep)->Arg(8)->Arg(32)->Arg(128);

void BM_WinRate(benchmark::State& state) {
  const auto pairs = batch(static_cast<std::size_t>(state.range(0)));
  const auto ref = ReferencePolicy::uniform(dataset().vocab_size);
  const auto params = PolicyParams::random(dataset().vocab_size, 3, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(win_rate(params, ref, pairs, LossVariant::kDpo2D, 0.5).win_rate);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_WinRate)->Arg(256)->Arg(1024);

}  // namespace
BENCHMARK_MAIN();
