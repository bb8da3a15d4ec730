// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "htvgnn/tensor.hpp"

namespace htvgnn {

/// Trainable tables behind the time-varying attention mask.
struct MaskEmbeddings {
  Tensor node;    // [N, d_m]
  Tensor daily;   // [samples_per_day, d_m]
  Tensor weekly;  // [7, d_m]
};

/// Multi-head projections. Column block i (width head_dim) of each of
/// w_query, w_key and w_value is head i's projection.
struct AttentionParams {
  Tensor w_query;  // [D, D]
  Tensor w_key;    // [D, D]
  Tensor w_value;  // [D, D]
  Tensor w_out;    // [D, D], applied to the concatenated heads
  std::size_t heads = 1;

  std::size_t width() const { return w_query.dim(0); }
  std::size_t head_dim() const { return width() / heads; }
  void validate() const;
};

/// Sinusoidal position table [T, D]: sin on even columns, cos on odd.
Tensor positional_encoding(std::size_t positions, std::size_t width);

/// m_t = node ⊙ daily[tod] ⊙ weekly[dow], each calendar row broadcast over nodes.
Tensor mask_embedding_at(const MaskEmbeddings& me, std::size_t tod, std::size_t dow);

/// Mask embeddings for a batch of calendar indices (row-major [B, T]):
/// result [B, T, N, d_m].
Tensor mask_embeddings(const MaskEmbeddings& me, std::span<const std::size_t> tod, std::span<const std::size_t> dow,
                       std::size_t batch, std::size_t steps);

/// Gram matrix m · mᵀ over the embedding axis: [..., N, d_m] -> [..., N, N].
Tensor mask_matrix(const Tensor& m);

/// Masked multi-head self-attention over the node axis of each time step.
/// x: [..., N, D]; masks: [..., N, N] matching x's leading axes (or
/// broadcastable to them). Keys of every head are premultiplied by the mask.
Tensor etpmsa(const Tensor& x, const Tensor& masks, const AttentionParams& p);

/// Standard multi-head self-attention (no key mask).
Tensor mhsa_plain(const Tensor& x, const AttentionParams& p);

/// Post-softmax attention weights [..., heads, N, N]; pass an undefined
/// `masks` tensor for the unmasked variant.
Tensor attention_weights(const Tensor& x, const Tensor& masks, const AttentionParams& p);

}  // namespace htvgnn
