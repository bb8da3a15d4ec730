// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <vector>

#include "htvgnn/tensor.hpp"

namespace htvgnn {

/// Compares reverse-mode gradients of scalar `f` at `x` with central finite
/// differences of step `eps`. Returns the largest per-coordinate error
/// |analytic - numeric| / max(1, |analytic|, |numeric|).
double gradcheck(const std::function<Tensor(const Tensor&)>& f, Tensor x, double eps = 1e-5);

/// Same check over every coordinate of several leaves feeding `loss`.
double gradcheck(const std::function<Tensor()>& loss, const std::vector<Tensor>& leaves, double eps = 1e-5);

}  // namespace htvgnn
