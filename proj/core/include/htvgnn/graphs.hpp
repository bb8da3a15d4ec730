// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "htvgnn/series.hpp"
#include "htvgnn/tensor.hpp"

namespace htvgnn {

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Edge {
  std::size_t from = 0;
  std::size_t to = 0;
  double cost = 1.0;
};

/// Binary road topology and DTW pattern graph of one network.
struct GraphSet {
  Tensor a_topo;  // [N, N]
  Tensor a_dtw;   // [N, N]
  std::size_t n_nodes = 0;

  /// Checks shapes, binary entries and unit diagonals.
  void validate() const;
};

/// Binary adjacency with unit diagonal; edge costs are accepted and ignored.
Tensor build_topology(std::span<const Edge> edges, std::size_t n_nodes, bool directed);

/// Edge list CSV "from,to,cost" with one header line.
std::vector<Edge> load_edges_csv(const std::filesystem::path& path);
void save_edges_csv(const std::filesystem::path& path, std::span<const Edge> edges);

/// Dynamic time warping cost with |x_i - y_j| local cost and the three
/// classic step moves. No warping window.
double dtw_distance(std::span<const double> x, std::span<const double> y);

/// Mean daily profile (length samples_per_day) of every node for `channel`,
/// averaged over the time steps in `range`.
std::vector<std::vector<double>> mean_daily_profiles(const SeriesDataset& ds, Partition range,
                                                     std::size_t channel = 0);

/// Keeps the ceil(sparsity * N * (N - 1)) smallest off-diagonal DTW distances
/// as edges; ties resolve by (row, column). Diagonal is 1.
Tensor pattern_graph_from_profiles(const std::vector<std::vector<double>>& profiles, double sparsity);

/// Pattern graph over the training partition (leading `train_fraction`).
Tensor build_pattern_graph(const SeriesDataset& ds, double sparsity, double train_fraction = 0.6);

/// Union of topology and pattern supports, as a 0/1 matrix.
Tensor dynamic_mask(const GraphSet& g);

/// Divides each row by its sum; rows summing to zero are left as zeros.
Tensor row_normalize(const Tensor& a);

}  // namespace htvgnn
