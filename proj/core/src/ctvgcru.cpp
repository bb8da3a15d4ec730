// SPDX-License-Identifier: Apache-2.0
#include "htvgnn/ctvgcru.hpp"

#include "htvgnn/ops.hpp"

namespace htvgnn {

namespace {

Tensor gate_preactivation(const Tensor& input, const Tensor& static_graph, const Tensor& dynamic_graph,
                          const Tensor& static_embedding, const Tensor& dynamic_embedding, const GateParams& g) {
  Tensor s = graph_conv(input, static_graph, static_embedding, g.static_branch);
  Tensor d = graph_conv(input, dynamic_graph, dynamic_embedding, g.dynamic_branch);
  return matmul(concat({s, d}, -1), g.fusion);
}

template <class F>
Tensor named_gate(const char* gate, F&& f) {
  try {
    return f();
  } catch (const NumericError& e) {
    throw NumericError(std::string("non-finite hidden state in gate ") + gate + " (" + e.what() + ")");
  }
}

}  // namespace

Tensor graph_conv(const Tensor& x, const Tensor& adjacency, const Tensor& node_embedding, const GraphConvParams& p) {
  const std::size_t n = x.dim(-2);
  const std::size_t d_in = x.dim(-1);
  const std::size_t d_h = p.hidden();
  if (adjacency.dim(-1) != n || adjacency.dim(-2) != n) {
    throw ContractError("graph_conv: adjacency " + shape_str(adjacency.shape()) + " does not match " +
                        std::to_string(n) + " nodes");
  }
  if (node_embedding.dim(-2) != n || node_embedding.dim(-1) != p.weight_pool.dim(0)) {
    throw ContractError("graph_conv: node embedding " + shape_str(node_embedding.shape()) + " does not match pools " +
                        shape_str(p.weight_pool.shape()));
  }
  if (p.weight_pool.dim(1) != d_in * d_h) {
    throw ContractError("graph_conv: input width " + std::to_string(d_in) + " does not match weight pool " +
                        shape_str(p.weight_pool.shape()));
  }
  Tensor aggregated = x + matmul(adjacency, x);

  Shape w_shape(node_embedding.shape().begin(), node_embedding.shape().end() - 1);
  w_shape.push_back(d_in);
  w_shape.push_back(d_h);
  Tensor weights = reshape(matmul(node_embedding, p.weight_pool), w_shape);
  Tensor bias = matmul(node_embedding, p.bias_pool);

  Shape row_shape(aggregated.shape().begin(), aggregated.shape().end() - 1);
  row_shape.push_back(1);
  row_shape.push_back(d_in);
  Tensor out = matmul(reshape(aggregated, row_shape), weights);
  Shape out_shape(out.shape().begin(), out.shape().end() - 2);
  out_shape.push_back(d_h);
  return reshape(out, out_shape) + bias;
}

CellStep cell_step_traced(const Tensor& input, const Tensor& previous, const Tensor& static_graph,
                          const Tensor& dynamic_graph, const Tensor& static_embedding,
                          const Tensor& dynamic_embedding, const CellParams& p, std::optional<double> forced_update) {
  if (previous.dim(-1) != p.hidden()) throw ContractError("cell_step: hidden width mismatch");
  CellStep s;
  Tensor joined = concat({input, previous}, -1);
  s.update = named_gate("z", [&] {
    if (forced_update) return Tensor::full(previous.shape(), *forced_update);
    return sigmoid(
        gate_preactivation(joined, static_graph, dynamic_graph, static_embedding, dynamic_embedding, p.update));
  });
  s.reset = named_gate("r", [&] {
    return sigmoid(
        gate_preactivation(joined, static_graph, dynamic_graph, static_embedding, dynamic_embedding, p.reset));
  });
  s.candidate = named_gate("c", [&] {
    Tensor gated = concat({input, s.reset * previous}, -1);
    return tanh(
        gate_preactivation(gated, static_graph, dynamic_graph, static_embedding, dynamic_embedding, p.candidate));
  });
  s.hidden = named_gate("h", [&] { return s.update * previous + (neg(s.update) + 1.0) * s.candidate; });
  return s;
}

Tensor cell_step(const Tensor& input, const Tensor& previous, const Tensor& static_graph, const Tensor& dynamic_graph,
                 const Tensor& static_embedding, const Tensor& dynamic_embedding, const CellParams& p) {
  return cell_step_traced(input, previous, static_graph, dynamic_graph, static_embedding, dynamic_embedding, p).hidden;
}

}  // namespace htvgnn
