// SPDX-License-Identifier: Apache-2.0
#include "htvgnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace htvgnn {

namespace {

double scalar_value(const Tensor& loss) {
  if (loss.numel() != 1) throw ContractError("gradcheck: function must return a scalar");
  const double v = loss.item();
  if (!std::isfinite(v)) throw NumericError("gradcheck: non-finite function value");
  return v;
}

}  // namespace

double gradcheck(const std::function<Tensor()>& loss_fn, const std::vector<Tensor>& leaves, double eps) {
  std::vector<bool> previous;
  for (auto leaf : leaves) {
    previous.push_back(leaf.requires_grad());
    leaf.set_requires_grad(true);
    leaf.zero_grad();
  }
  Tape::active().clear();
  Tensor loss = loss_fn();
  scalar_value(loss);
  if (loss.requires_grad()) backward(loss);

  double worst = 0.0;
  {
    NoGradGuard guard;
    for (auto leaf : leaves) {
      auto values = leaf.mutable_data();
      const auto grad = leaf.grad();
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double analytic = grad.empty() ? 0.0 : grad[i];
        const double original = values[i];
        values[i] = original + eps;
        const double up = scalar_value(loss_fn());
        values[i] = original - eps;
        const double down = scalar_value(loss_fn());
        values[i] = original;
        const double numeric = (up - down) / (2.0 * eps);
        const double scale = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
        worst = std::max(worst, std::fabs(analytic - numeric) / scale);
      }
    }
  }
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    Tensor leaf = leaves[i];
    leaf.zero_grad();
    leaf.set_requires_grad(previous[i]);
  }
  return worst;
}

double gradcheck(const std::function<Tensor(const Tensor&)>& f, Tensor x, double eps) {
  return gradcheck([&f, &x]() { return f(x); }, std::vector<Tensor>{x}, eps);
}

}  // namespace htvgnn
