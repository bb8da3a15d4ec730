// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>

#include "htvgnn/ops.hpp"

namespace {

using namespace htvgnn;

Tensor random_tensor(Shape shape, std::uint64_t seed, bool requires_grad = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_tensor({n, n}, 1);
  const Tensor b = random_tensor({n, n}, 2);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(170);

// Per-node weights, the shape pattern of the node-adaptive graph convolution.
void BM_BatchedNodeMatmulBackward(benchmark::State& state) {
  const auto nodes = static_cast<std::size_t>(state.range(0));
  Tensor w = random_tensor({nodes, 128, 64}, 3, true);
  for (auto _ : state) {
    const Tensor x = random_tensor({16, nodes, 1, 128}, 4, true);
    backward(sum(matmul(x, w)));
    benchmark::DoNotOptimize(w.grad().data());
    w.zero_grad();
  }
}
BENCHMARK(BM_BatchedNodeMatmulBackward)->Arg(8)->Arg(64);

void BM_Softmax(benchmark::State& state) {
  const Tensor x = random_tensor({16, 8, 170, 170}, 5);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(softmax(x, -1));
}
BENCHMARK(BM_Softmax);

}  // namespace
