// SPDX-License-Identifier: Apache-2.0
#include "htvgnn/tvgraph.hpp"

#include "htvgnn/graphs.hpp"
#include "htvgnn/ops.hpp"

namespace htvgnn {

GraphKind parse_graph_kind(const std::string& name) {
  if (name == "full") return GraphKind::full;
  if (name == "no_coupling" || name == "sl") return GraphKind::no_coupling;
  if (name == "single_adaptive" || name == "ag") return GraphKind::single_adaptive;
  if (name == "topology_only" || name == "s") return GraphKind::topology_only;
  throw ContractError("unknown graph kind '" + name + "'");
}

std::string to_string(GraphKind kind) {
  switch (kind) {
    case GraphKind::full: return "full";
    case GraphKind::no_coupling: return "no_coupling";
    case GraphKind::single_adaptive: return "single_adaptive";
    case GraphKind::topology_only: return "topology_only";
  }
  return "unknown";
}

Tensor step_embeddings(const StaticGraphParams& p) { return p.node + p.step_bias; }

Tensor static_graph_at(const StaticGraphParams& p, std::size_t t) {
  if (t >= p.steps()) throw ContractError("static_graph_at: step " + std::to_string(t) + " out of range");
  const std::size_t n = p.node.dim(0), d = p.node.dim(1);
  Tensor e = p.node + reshape(narrow(p.step_bias, 0, t, 1), {n, d});
  return softmax(matmul(e, transpose(e, 0, 1)), -1);
}

Tensor static_graphs(const StaticGraphParams& p) {
  Tensor e = step_embeddings(p);
  return softmax(matmul(e, transpose(e, -1, -2)), -1);
}

Tensor coupling_weights(const StaticGraphParams& p, std::size_t t) {
  const std::size_t steps = p.steps();
  if (p.coupling.shape() != Shape{steps, steps}) throw DimensionError("coupling weights must be TxT");
  if (t >= steps) throw ContractError("coupling_weights: step out of range");
  Tensor row = reshape(narrow(p.coupling, 0, t, 1), {steps});
  return softmax(narrow(row, 0, 0, t + 1), 0);
}

Tensor coupled_static_graphs(const StaticGraphParams& p) {
  const std::size_t steps = p.steps();
  const std::size_t n = p.node.dim(0);
  Tensor base = static_graphs(p);
  Tensor flat = reshape(base, {steps, n * n});
  std::vector<Tensor> mixed;
  mixed.reserve(steps);
  mixed.push_back(narrow(flat, 0, 0, 1));
  for (std::size_t t = 1; t < steps; ++t) {
    Tensor w = reshape(coupling_weights(p, t), {1, t + 1});
    mixed.push_back(matmul(w, narrow(flat, 0, 0, t + 1)));
  }
  return reshape(concat(mixed, 0), {steps, n, n});
}

DynamicGraph dynamic_graph_at(const DynamicGraphParams& p, const Tensor& hidden, const Tensor& mask) {
  const std::size_t d_phi = p.w_map.dim(1);
  if (p.attn.numel() != 2 * d_phi) throw DimensionError("dynamic graph attention vector must have 2*d_phi entries");
  const std::size_t n = hidden.dim(-2);
  if (mask.shape() != Shape{n, n}) throw DimensionError("dynamic graph mask must be NxN");
  DynamicGraph g;
  g.embedding = matmul(hidden, p.w_map);
  Tensor a_src = reshape(narrow(p.attn, 0, 0, d_phi), {d_phi, 1});
  Tensor a_dst = reshape(narrow(p.attn, 0, d_phi, d_phi), {d_phi, 1});
  Tensor scores = matmul(g.embedding, a_src) + transpose(matmul(g.embedding, a_dst), -1, -2);
  g.adjacency = softmax(scores, -1) * mask;
  return g;
}

StaticGraphProvider::StaticGraphProvider(GraphKind kind, Tensor topology)
    : kind_(kind), topology_(topology.defined() ? row_normalize(topology) : Tensor()) {
  if (kind_ == GraphKind::topology_only && !topology_.defined()) {
    throw ContractError("topology_only graphs need a topology adjacency");
  }
}

Tensor StaticGraphProvider::graphs(const StaticGraphParams& p) const {
  const std::size_t steps = p.steps();
  const std::size_t n = p.node.dim(0);
  switch (kind_) {
    case GraphKind::full:
      return coupled_static_graphs(p);
    case GraphKind::no_coupling:
      return static_graphs(p);
    case GraphKind::single_adaptive: {
      Tensor g = softmax(matmul(p.node, transpose(p.node, 0, 1)), -1);
      return reshape(g, {1, n, n}) * Tensor::full({steps, 1, 1}, 1.0);
    }
    case GraphKind::topology_only:
      if (topology_.shape() != Shape{n, n}) throw DimensionError("topology size differs from node embedding count");
      return reshape(topology_, {1, n, n}) * Tensor::full({steps, 1, 1}, 1.0);
  }
  throw ContractError("unhandled graph kind");
}

Tensor StaticGraphProvider::embeddings(const StaticGraphParams& p) const {
  if (kind_ == GraphKind::single_adaptive) {
    return reshape(p.node, {1, p.node.dim(0), p.node.dim(1)}) * Tensor::full({p.steps(), 1, 1}, 1.0);
  }
  return step_embeddings(p);
}

StaticGraphProvider ablation_graph(GraphKind kind, const Tensor& a_topo) { return StaticGraphProvider(kind, a_topo); }

}  // namespace htvgnn
