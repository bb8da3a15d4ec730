// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "htvgnn/tensor.hpp"

namespace htvgnn {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moments, one buffer per parameter (same element count).
struct AdamState {
  std::size_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  static AdamState for_params(std::span<const Tensor> params);
};

/// Bias-corrected Adam update in place. Parameters without a gradient buffer
/// are left untouched, moments included.
void adam_step(std::span<Tensor> params, AdamState& state, const AdamOptions& options = {});

}  // namespace htvgnn
