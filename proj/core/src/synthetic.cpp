// SPDX-License-Identifier: Apache-2.0
#include "htvgnn/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <set>

namespace htvgnn {

SyntheticNetwork synth_network(const SynthOptions& o) {
  if (o.nodes < 2 || o.days < 2) throw ContractError("synthetic network needs at least 2 nodes and 2 days");
  if (o.interval_minutes <= 0 || 1440 % o.interval_minutes != 0) throw ContractError("interval must divide a day");
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const std::size_t n_nodes = o.nodes;
  std::set<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 1; i < n_nodes; ++i) {
    const auto j = static_cast<std::size_t>(unit(rng) * static_cast<double>(i));
    pairs.insert({std::min(i, j), std::max(i, j)});
  }
  const std::size_t extra = o.extra_edges ? o.extra_edges : n_nodes / 2;
  const std::size_t max_pairs = n_nodes * (n_nodes - 1) / 2;
  for (std::size_t k = 0; k < extra && pairs.size() < max_pairs; ++k) {
    const auto i = static_cast<std::size_t>(unit(rng) * static_cast<double>(n_nodes));
    const auto j = static_cast<std::size_t>(unit(rng) * static_cast<double>(n_nodes));
    if (i != j) pairs.insert({std::min(i, j), std::max(i, j)});
  }
  SyntheticNetwork net;
  std::vector<std::vector<std::size_t>> neighbors(n_nodes);
  for (const auto& [i, j] : pairs) {
    net.edges.push_back({i, j, 1.0});
    neighbors[i].push_back(j);
    neighbors[j].push_back(i);
  }
  net.a_topo = build_topology(net.edges, n_nodes, false);

  const std::size_t per_day = static_cast<std::size_t>(1440 / o.interval_minutes);
  const std::size_t steps = per_day * o.days;
  std::vector<double> level(n_nodes), amp1(n_nodes), amp2(n_nodes), phase1(n_nodes), phase2(n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    level[i] = 60.0 + 80.0 * unit(rng);
    amp1[i] = 0.3 + 0.3 * unit(rng);
    amp2[i] = 0.1 * unit(rng);
    phase1[i] = 2.0 * std::numbers::pi * unit(rng);
    phase2[i] = 2.0 * std::numbers::pi * unit(rng);
  }
  std::vector<double> fluct(steps * n_nodes, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < n_nodes; ++i) {
      const double prev = t ? fluct[(t - 1) * n_nodes + i] : 0.0;
      const double shock = gauss(rng);
      fluct[t * n_nodes + i] = o.persistence * prev + o.noise * shock;
    }
  }
  std::vector<double> values(steps * n_nodes);
  for (std::size_t t = 0; t < steps; ++t) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(t % per_day) / static_cast<double>(per_day);
    for (std::size_t i = 0; i < n_nodes; ++i) {
      const double base = level[i] * (1.0 + amp1[i] * std::sin(angle + phase1[i]) + amp2[i] * std::sin(2.0 * angle + phase2[i]));
      double leak = 0.0;
      if (t >= o.lag && !neighbors[i].empty()) {
        for (auto j : neighbors[i]) leak += fluct[(t - o.lag) * n_nodes + j];
        leak /= static_cast<double>(neighbors[i].size());
      }
      const double weight = o.coupling * (1.0 + o.coupling_swing * std::sin(angle));
      values[t * n_nodes + i] = base + fluct[t * n_nodes + i] + weight * leak;
    }
  }
  net.data.values = Tensor({steps, n_nodes, 1}, std::move(values));
  net.data.interval_minutes = o.interval_minutes;
  net.data.samples_per_day = per_day;
  net.data.start_day_of_week = o.start_day_of_week;
  net.data.validate();
  return net;
}

}  // namespace htvgnn
