// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "htvgnn/graphs.hpp"

namespace {

using namespace htvgnn;

std::vector<double> random_series(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

void BM_DtwDistance(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = random_series(n, 1), y = random_series(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(dtw_distance(x, y));
  state.SetComplexityN(static_cast<std::int64_t>(n));
}
BENCHMARK(BM_DtwDistance)->RangeMultiplier(2)->Range(48, 384)->Complexity(benchmark::oNSquared);

void BM_PatternGraph(benchmark::State& state) {
  const auto nodes = static_cast<std::size_t>(state.range(0));
  std::vector<std::vector<double>> profiles;
  for (std::size_t i = 0; i < nodes; ++i) profiles.push_back(random_series(288, 10 + i));
  for (auto _ : state) benchmark::DoNotOptimize(pattern_graph_from_profiles(profiles, 0.01));
}
BENCHMARK(BM_PatternGraph)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace
