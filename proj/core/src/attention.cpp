// SPDX-License-Identifier: Apache-2.0
#include "htvgnn/attention.hpp"

#include <cmath>

#include "htvgnn/ops.hpp"

namespace htvgnn {

namespace {

// [..., N, D] -> [..., h, N, d_head]
Tensor split_heads(const Tensor& y, std::size_t heads) {
  const std::size_t r = y.rank();
  Shape s(y.shape().begin(), y.shape().end() - 1);
  s.push_back(heads);
  s.push_back(y.dim(-1) / heads);
  std::vector<std::size_t> order;
  for (std::size_t d = 0; d + 2 < r; ++d) order.push_back(d);
  order.push_back(r - 1);
  order.push_back(r - 2);
  order.push_back(r);
  return permute(reshape(y, std::move(s)), order);
}

// [..., h, N, d_head] -> [..., N, h * d_head]
Tensor merge_heads(const Tensor& y) {
  const std::size_t r = y.rank();
  std::vector<std::size_t> order;
  for (std::size_t d = 0; d + 3 < r; ++d) order.push_back(d);
  order.push_back(r - 2);
  order.push_back(r - 3);
  order.push_back(r - 1);
  Tensor t = permute(y, order);
  Shape s(t.shape().begin(), t.shape().end() - 2);
  s.push_back(y.dim(-3) * y.dim(-1));
  return reshape(t, std::move(s));
}

struct HeadTensors {
  Tensor query, key, value;
};

HeadTensors project(const Tensor& x, const Tensor& masks, const AttentionParams& p) {
  p.validate();
  if (x.dim(-1) != p.width()) {
    throw DimensionError("attention: input width " + std::to_string(x.dim(-1)) + " differs from model width " +
                         std::to_string(p.width()));
  }
  HeadTensors h;
  h.query = split_heads(matmul(x, p.w_query), p.heads);
  h.key = split_heads(matmul(x, p.w_key), p.heads);
  h.value = split_heads(matmul(x, p.w_value), p.heads);
  if (masks.defined()) {
    const std::size_t n = x.dim(-2);
    if (masks.rank() < 2 || masks.dim(-1) != n || masks.dim(-2) != n) {
      throw ContractError("attention: mask " + shape_str(masks.shape()) + " does not match keys of " +
                          shape_str(x.shape()));
    }
    Shape s(masks.shape().begin(), masks.shape().end() - 2);
    s.push_back(1);
    s.push_back(n);
    s.push_back(n);
    h.key = matmul(reshape(masks, std::move(s)), h.key);
  }
  return h;
}

Tensor weights_from(const HeadTensors& h, std::size_t head_dim) {
  Tensor scores = matmul(h.query, transpose(h.key, -1, -2));
  return softmax(mul_scalar(scores, 1.0 / std::sqrt(static_cast<double>(head_dim))), -1);
}

}  // namespace

void AttentionParams::validate() const {
  const std::size_t d = w_query.dim(0);
  if (heads == 0 || d % heads != 0) throw ContractError("attention width must be divisible by the head count");
  for (const Tensor* w : {&w_query, &w_key, &w_value, &w_out}) {
    if (w->shape() != Shape{d, d}) throw DimensionError("attention projections must be square " + std::to_string(d) + "x" + std::to_string(d));
  }
}

Tensor positional_encoding(std::size_t positions, std::size_t width) {
  if (width == 0 || width % 2 != 0) throw ContractError("positional encoding width must be even");
  std::vector<double> pe(positions * width);
  for (std::size_t pos = 0; pos < positions; ++pos) {
    for (std::size_t i = 0; i < width / 2; ++i) {
      const double angle = static_cast<double>(pos) /
                           std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(width));
      pe[pos * width + 2 * i] = std::sin(angle);
      pe[pos * width + 2 * i + 1] = std::cos(angle);
    }
  }
  return Tensor({positions, width}, std::move(pe));
}

Tensor mask_embedding_at(const MaskEmbeddings& me, std::size_t tod, std::size_t dow) {
  if (tod >= me.daily.dim(0) || dow >= me.weekly.dim(0)) {
    throw ContractError("mask_embedding_at: calendar index out of range (tod " + std::to_string(tod) + ", dow " +
                        std::to_string(dow) + ")");
  }
  const std::size_t day_row[] = {tod};
  const std::size_t week_row[] = {dow};
  return me.node * index_select(me.daily, day_row) * index_select(me.weekly, week_row);
}

Tensor mask_embeddings(const MaskEmbeddings& me, std::span<const std::size_t> tod, std::span<const std::size_t> dow,
                       std::size_t batch, std::size_t steps) {
  if (tod.size() != batch * steps || dow.size() != batch * steps) {
    throw ContractError("mask_embeddings: expected " + std::to_string(batch * steps) + " calendar indices");
  }
  for (std::size_t i = 0; i < tod.size(); ++i) {
    if (tod[i] >= me.daily.dim(0) || dow[i] >= me.weekly.dim(0)) throw ContractError("mask_embeddings: calendar index out of range");
  }
  const std::size_t dm = me.node.dim(1);
  Tensor daily = reshape(index_select(me.daily, tod), {batch, steps, 1, dm});
  Tensor weekly = reshape(index_select(me.weekly, dow), {batch, steps, 1, dm});
  return me.node * daily * weekly;
}

Tensor mask_matrix(const Tensor& m) { return matmul(m, transpose(m, -1, -2)); }

Tensor attention_weights(const Tensor& x, const Tensor& masks, const AttentionParams& p) {
  return weights_from(project(x, masks, p), p.head_dim());
}

Tensor etpmsa(const Tensor& x, const Tensor& masks, const AttentionParams& p) {
  if (!masks.defined()) throw ContractError("etpmsa: mask required");
  const HeadTensors h = project(x, masks, p);
  return matmul(merge_heads(matmul(weights_from(h, p.head_dim()), h.value)), p.w_out);
}

Tensor mhsa_plain(const Tensor& x, const AttentionParams& p) {
  const HeadTensors h = project(x, Tensor(), p);
  return matmul(merge_heads(matmul(weights_from(h, p.head_dim()), h.value)), p.w_out);
}

}  // namespace htvgnn
