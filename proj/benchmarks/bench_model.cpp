// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "htvgnn/synthetic.hpp"
#include "htvgnn/trainer.hpp"

namespace {

using namespace htvgnn;

struct Fixture {
  TrainingData data;
  ModelConfig config;
  ModelParams params;
  ForecastBatch batch;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture x;
    SyntheticNetwork net = synth_network({});
    GraphSet graphs{net.a_topo, build_pattern_graph(net.data, 0.1), net.data.nodes()};
    x.data = make_training_data(net.data, graphs);
    x.config = preset("synthetic");
    x.params = init_params(x.config, 1);
    const auto& anchors = x.data.splits.train.anchors;
    x.batch = make_batch(x.data.dataset, x.data.normalized,
                         std::span<const std::size_t>(anchors.data(), x.config.batch), x.config.history,
                         x.config.horizon);
    return x;
  }();
  return f;
}

void BM_Forward(benchmark::State& state) {
  const Fixture& f = fixture();
  const auto ablation = static_cast<Ablation>(state.range(0));
  NoGradGuard guard;
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(f.batch, f.params, f.config, ablation, f.data.context));
  }
  state.SetLabel(to_string(ablation));
}
BENCHMARK(BM_Forward)->DenseRange(0, 6)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const Fixture& f = fixture();
  ModelParams params = init_params(f.config, 1);
  for (auto _ : state) {
    const Tensor pred = forward(f.batch, params, f.config, Ablation::full, f.data.context);
    backward(masked_mae_loss(pred, f.batch.y));
    params.zero_grad();
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_EvaluateSplit(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate(f.params, f.config, Ablation::full, f.data, f.data.splits.train));
  }
}
BENCHMARK(BM_EvaluateSplit)->Unit(benchmark::kMillisecond);

}  // namespace
