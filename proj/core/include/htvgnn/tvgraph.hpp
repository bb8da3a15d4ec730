// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "htvgnn/tensor.hpp"

namespace htvgnn {

/// Learned static graphs: one adaptive graph per input step plus causal
/// mixing weights between steps.
struct StaticGraphParams {
  Tensor node;       // E    [N, d_E]
  Tensor step_bias;  // e_t  [T, N, d_E]
  Tensor coupling;   // [T, T]; only entries k <= t of row t are used

  std::size_t steps() const { return step_bias.dim(0); }
};

struct DynamicGraphParams {
  Tensor w_map;   // [C_phi, d_phi], per-node linear map
  Tensor attn;    // [2 * d_phi]
};

enum class GraphKind { full, no_coupling, single_adaptive, topology_only };

GraphKind parse_graph_kind(const std::string& name);
std::string to_string(GraphKind kind);

/// E_t = E + e_t for every step: [T, N, d_E].
Tensor step_embeddings(const StaticGraphParams& p);

/// Row-softmax of (E + e_t)(E + e_t)ᵀ.
Tensor static_graph_at(const StaticGraphParams& p, std::size_t t);

/// Uncoupled per-step graphs, [T, N, N].
Tensor static_graphs(const StaticGraphParams& p);

/// Softmax over row t of the coupling matrix restricted to steps 0..t.
Tensor coupling_weights(const StaticGraphParams& p, std::size_t t);

/// Step t mixes the per-step graphs 0..t with coupling_weights(p, t);
/// step 0 is its own graph. [T, N, N], every row stochastic.
Tensor coupled_static_graphs(const StaticGraphParams& p);

struct DynamicGraph {
  Tensor embedding;  // E^v_t = H_t W_phi, [..., N, d_phi]
  Tensor adjacency;  // masked attention graph, [..., N, N]
};

/// Attention-scored graph over mapped node features, masked elementwise so
/// it is exactly zero wherever `mask` is zero.
DynamicGraph dynamic_graph_at(const DynamicGraphParams& p, const Tensor& hidden, const Tensor& mask);

/// Static graph source for one ablation setting.
class StaticGraphProvider {
 public:
  StaticGraphProvider(GraphKind kind, Tensor topology);

  GraphKind kind() const { return kind_; }
  /// Graphs for every step, [T, N, N].
  Tensor graphs(const StaticGraphParams& p) const;
  /// Node embeddings used for node-adaptive weights, [T, N, d_E].
  Tensor embeddings(const StaticGraphParams& p) const;

 private:
  GraphKind kind_;
  Tensor topology_;  // row-normalized
};

StaticGraphProvider ablation_graph(GraphKind kind, const Tensor& a_topo);

}  // namespace htvgnn
