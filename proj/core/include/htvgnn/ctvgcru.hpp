// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>

#include "htvgnn/tensor.hpp"

namespace htvgnn {

/// Node-adaptive graph convolution weights: node embeddings select per-node
/// weights and biases out of shared pools.
struct GraphConvParams {
  Tensor weight_pool;  // [d_E, d_in * d_h]
  Tensor bias_pool;    // [d_E, d_h]

  std::size_t hidden() const { return bias_pool.dim(1); }
  std::size_t input() const { return weight_pool.dim(1) / hidden(); }
};

/// One GRU gate: a static-graph branch and a dynamic-graph branch whose
/// concatenated outputs are projected back to the hidden width.
struct GateParams {
  GraphConvParams static_branch;
  GraphConvParams dynamic_branch;
  Tensor fusion;  // [2 * d_h, d_h]
};

struct CellParams {
  GateParams update;     // z
  GateParams reset;      // r
  GateParams candidate;  // c

  std::size_t hidden() const { return update.fusion.dim(1); }
};

/// out = ((I + A) X) applied through each node's own weight matrix, plus the
/// node's bias. Weights per node are E_node · weight_pool reshaped to
/// [d_in, d_h]. Leading axes of x, adjacency and node_embedding broadcast.
Tensor graph_conv(const Tensor& x, const Tensor& adjacency, const Tensor& node_embedding, const GraphConvParams& p);

struct CellStep {
  Tensor hidden;     // h_t
  Tensor update;     // z_t
  Tensor reset;      // r_t
  Tensor candidate;  // c_t
};

/// One recurrent step. input: [..., N, d_x]; previous: [..., N, d_h].
/// `forced_update` pins z_t to a constant (used to probe the update rule).
CellStep cell_step_traced(const Tensor& input, const Tensor& previous, const Tensor& static_graph,
                          const Tensor& dynamic_graph, const Tensor& static_embedding,
                          const Tensor& dynamic_embedding, const CellParams& p,
                          std::optional<double> forced_update = std::nullopt);

Tensor cell_step(const Tensor& input, const Tensor& previous, const Tensor& static_graph, const Tensor& dynamic_graph,
                 const Tensor& static_embedding, const Tensor& dynamic_embedding, const CellParams& p);

}  // namespace htvgnn
