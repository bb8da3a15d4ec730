// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "htvgnn/graphs.hpp"
#include "htvgnn/series.hpp"

namespace htvgnn {

struct SynthOptions {
  std::size_t nodes = 8;
  std::size_t days = 4;
  std::uint64_t seed = 1;
  int interval_minutes = 30;
  int start_day_of_week = 0;
  /// Innovation scale of each node's AR(1) fluctuation; 0 gives exact periodicity.
  double noise = 1.0;
  double persistence = 0.9;
  /// Weight of the lagged mean neighbor fluctuation added to each node.
  double coupling = 0.5;
  /// Relative daily swing of the coupling weight: coupling * (1 + swing * sin(angle)).
  double coupling_swing = 0.0;
  std::size_t lag = 1;
  std::size_t extra_edges = 0;  // beyond the spanning tree; default nodes / 2
};

struct SyntheticNetwork {
  SeriesDataset data;
  std::vector<Edge> edges;  // undirected, one entry per pair
  Tensor a_topo;
};

/// Daily-periodic flows on a random connected road graph: each node carries a
/// two-harmonic daily profile plus a persistent fluctuation, and neighbors'
/// fluctuations leak in after `lag` steps. Deterministic in `seed`.
SyntheticNetwork synth_network(const SynthOptions& options);

}  // namespace htvgnn
