// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "htvgnn/tensor.hpp"

// Differentiable tensor operations. Every op records itself on the active
// tape when any input requires grad and recording is enabled.
//
// Broadcasting follows right-aligned rules: trailing dimensions are matched
// and a size-1 (or missing) dimension expands to the other operand's extent.
namespace htvgnn {

/// Batched matrix product over the last two axes; leading axes broadcast.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& x, double s);
Tensor mul_scalar(const Tensor& x, double s);
Tensor neg(const Tensor& x);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor exp(const Tensor& x);
/// Subgradient 0 at the origin.
Tensor abs(const Tensor& x);
Tensor relu(const Tensor& x);

/// Numerically stable softmax along `axis` (max-subtracted).
Tensor softmax(const Tensor& x, int axis);

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& dims);
Tensor transpose(const Tensor& x, int axis0, int axis1);

Tensor concat(const std::vector<Tensor>& parts, int axis);
/// Inserts a new axis of extent 1 at `axis` on every part, then concatenates.
Tensor stack(const std::vector<Tensor>& parts, int axis);
/// Contiguous slice [start, start + length) of `axis`.
Tensor narrow(const Tensor& x, int axis, std::size_t start, std::size_t length);
/// Gathers rows of `table` (axis 0); gradients scatter-add back.
Tensor index_select(const Tensor& table, std::span<const std::size_t> rows);

Tensor sum(const Tensor& x);
Tensor sum(const Tensor& x, int axis, bool keepdim);
Tensor mean(const Tensor& x);

/// Normalizes the last axis to zero mean and unit (population) variance.
Tensor layer_norm(const Tensor& x, double eps = 1e-5);

/// Inverted dropout; identity when p == 0.
Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return mul_scalar(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return mul_scalar(a, s); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

/// Right-aligned broadcast of two shapes; throws DimensionError naming `op`.
Shape broadcast_shapes(const Shape& a, const Shape& b, const char* op);

}  // namespace htvgnn
