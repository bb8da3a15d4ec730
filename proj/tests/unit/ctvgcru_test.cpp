// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "htvgnn/ctvgcru.hpp"
#include "htvgnn/gradcheck.hpp"
#include "htvgnn/ops.hpp"

using namespace htvgnn;

namespace {

using Mat = std::vector<std::vector<double>>;

Tensor randn(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = g(rng);
  return Tensor(std::move(shape), std::move(v));
}

Mat rows(const Tensor& t) {
  const std::size_t r = t.dim(0), c = t.dim(1);
  Mat m(r, std::vector<double>(c));
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) m[i][j] = t.at({i, j});
  }
  return m;
}

// ((I + A) X)_i · (E_i W_pool as [d_in, d_h]) + E_i b_pool, one node at a time.
Mat conv_oracle(const Mat& x, const Mat& a, const Mat& e, const GraphConvParams& p) {
  const std::size_t n = x.size(), din = x[0].size(), dh = p.hidden(), de = e[0].size();
  Mat out(n, std::vector<double>(dh, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> y = x[i];
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < din; ++k) y[k] += a[i][j] * x[j][k];
    }
    for (std::size_t c = 0; c < dh; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < de; ++k) acc += e[i][k] * p.bias_pool.at({k, c});
      for (std::size_t r = 0; r < din; ++r) {
        double w = 0.0;
        for (std::size_t k = 0; k < de; ++k) w += e[i][k] * p.weight_pool.at({k, r * dh + c});
        acc += y[r] * w;
      }
      out[i][c] = acc;
    }
  }
  return out;
}

GraphConvParams random_conv(std::size_t de, std::size_t din, std::size_t dh, std::mt19937_64& rng) {
  return {randn({de, din * dh}, rng, 0.4), randn({de, dh}, rng, 0.4)};
}

GateParams random_gate(std::size_t de, std::size_t din, std::size_t dh, std::mt19937_64& rng) {
  return {random_conv(de, din, dh, rng), random_conv(de, din, dh, rng), randn({2 * dh, dh}, rng, 0.4)};
}

CellParams random_cell(std::size_t de, std::size_t dx, std::size_t dh, std::mt19937_64& rng) {
  return {random_gate(de, dx + dh, dh, rng), random_gate(de, dx + dh, dh, rng), random_gate(de, dx + dh, dh, rng)};
}

Mat gate_oracle(const Mat& in, const Mat& as, const Mat& ad, const Mat& es, const Mat& ed, const GateParams& g) {
  const Mat s = conv_oracle(in, as, es, g.static_branch);
  const Mat d = conv_oracle(in, ad, ed, g.dynamic_branch);
  const std::size_t dh = s[0].size();
  Mat out(in.size(), std::vector<double>(dh, 0.0));
  for (std::size_t i = 0; i < in.size(); ++i) {
    for (std::size_t c = 0; c < dh; ++c) {
      for (std::size_t k = 0; k < dh; ++k) out[i][c] += s[i][k] * g.fusion.at({k, c}) + d[i][k] * g.fusion.at({dh + k, c});
    }
  }
  return out;
}

Mat join(const Mat& a, const Mat& b) {
  Mat c = a;
  for (std::size_t i = 0; i < a.size(); ++i) c[i].insert(c[i].end(), b[i].begin(), b[i].end());
  return c;
}

}  // namespace

TEST(GraphConv, PerNodeOracle) {
  std::mt19937_64 rng(1);
  const auto p = random_conv(3, 2, 4, rng);
  const Tensor x = randn({2, 2}, rng), a({2, 2}, {0.3, 0.7, 0.5, 0.5}), e = randn({2, 3}, rng);
  const Tensor out = graph_conv(x, a, e, p);
  const Mat ref = conv_oracle(rows(x), rows(a), rows(e), p);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(out.at({i, c}), ref[i][c], 1e-12);
  }
}

TEST(GraphConv, NoAggregationIsPerNodeLinear) {
  // One-dimensional embedding of 1 with an identity pool: out = X.
  GraphConvParams p{Tensor({1, 4}, {1, 0, 0, 1}), Tensor::zeros({1, 2})};
  std::mt19937_64 rng(2);
  const Tensor x = randn({3, 2}, rng);
  const Tensor out = graph_conv(x, Tensor::zeros({3, 3}), Tensor::full({3, 1}, 1.0), p);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_DOUBLE_EQ(out.data()[i], x.data()[i]);
}

TEST(GraphConv, SharedEmbeddingIsSharedWeightGcn) {
  std::mt19937_64 rng(3);
  const auto p = random_conv(2, 3, 2, rng);
  const Tensor row = randn({1, 2}, rng);
  const Tensor e = index_select(row, std::vector<std::size_t>{0, 0, 0, 0});
  const Tensor x = randn({4, 3}, rng), a = softmax(randn({4, 4}, rng), -1);
  const Tensor out = graph_conv(x, a, e, p);
  const Tensor w = reshape(matmul(row, p.weight_pool), {3, 2});
  const Tensor ref = matmul(x + matmul(a, x), w) + matmul(row, p.bias_pool);
  for (std::size_t i = 0; i < out.numel(); ++i) EXPECT_NEAR(out.data()[i], ref.data()[i], 1e-12);
}

TEST(GraphConv, ShapeMismatchIsContractError) {
  std::mt19937_64 rng(4);
  const auto p = random_conv(2, 3, 2, rng);
  EXPECT_THROW(graph_conv(randn({4, 3}, rng), Tensor::zeros({3, 3}), randn({4, 2}, rng), p), ContractError);
  EXPECT_THROW(graph_conv(randn({4, 2}, rng), Tensor::zeros({4, 4}), randn({4, 2}, rng), p), ContractError);
  EXPECT_THROW(graph_conv(randn({4, 3}, rng), Tensor::zeros({4, 4}), randn({4, 3}, rng), p), ContractError);
}

TEST(Cell, ExpandedOracle) {
  std::mt19937_64 rng(5);
  const std::size_t n = 2, dx = 2, dh = 2, de = 2;
  const CellParams p = random_cell(de, dx, dh, rng);
  const Tensor x = randn({n, dx}, rng), h = randn({n, dh}, rng);
  const Tensor as = softmax(randn({n, n}, rng), -1), ad = softmax(randn({n, n}, rng), -1);
  const Tensor es = randn({n, de}, rng), ed = randn({n, de}, rng);
  const CellStep s = cell_step_traced(x, h, as, ad, es, ed, p);

  const Mat X = rows(x), H = rows(h), AS = rows(as), AD = rows(ad), ES = rows(es), ED = rows(ed);
  const Mat joined = join(X, H);
  Mat z = gate_oracle(joined, AS, AD, ES, ED, p.update);
  Mat r = gate_oracle(joined, AS, AD, ES, ED, p.reset);
  for (auto* m : {&z, &r}) {
    for (auto& row : *m) {
      for (auto& v : row) v = 1.0 / (1.0 + std::exp(-v));
    }
  }
  Mat rh = H;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < dh; ++c) rh[i][c] *= r[i][c];
  }
  Mat c = gate_oracle(join(X, rh), AS, AD, ES, ED, p.candidate);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < dh; ++k) {
      c[i][k] = std::tanh(c[i][k]);
      const double ref = z[i][k] * H[i][k] + (1.0 - z[i][k]) * c[i][k];
      EXPECT_NEAR(s.hidden.at({i, k}), ref, 1e-10);
      EXPECT_NEAR(s.update.at({i, k}), z[i][k], 1e-10);
      EXPECT_NEAR(s.reset.at({i, k}), r[i][k], 1e-10);
    }
  }
}

TEST(Cell, ForcedUpdateLimits) {
  std::mt19937_64 rng(6);
  const CellParams p = random_cell(2, 3, 4, rng);
  const Tensor x = randn({5, 3}, rng), h = randn({5, 4}, rng);
  const Tensor a = softmax(randn({5, 5}, rng), -1), e = randn({5, 2}, rng);
  const CellStep keep = cell_step_traced(x, h, a, a, e, e, p, 1.0);
  for (std::size_t i = 0; i < h.numel(); ++i) EXPECT_EQ(keep.hidden.data()[i], h.data()[i]);
  const CellStep take = cell_step_traced(x, h, a, a, e, e, p, 0.0);
  for (std::size_t i = 0; i < h.numel(); ++i) EXPECT_EQ(take.hidden.data()[i], take.candidate.data()[i]);
}

TEST(Cell, ConvexUpdateBound) {
  std::mt19937_64 rng(7);
  const CellParams p = random_cell(2, 3, 4, rng);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x = randn({5, 3}, rng, 3.0), h = randn({5, 4}, rng, 2.0);
    const Tensor a = softmax(randn({5, 5}, rng), -1), e = randn({5, 2}, rng);
    const CellStep s = cell_step_traced(x, h, a, a, e, e, p);
    for (std::size_t i = 0; i < h.numel(); ++i) {
      EXPECT_LE(std::fabs(s.hidden.data()[i]),
                std::max(std::fabs(h.data()[i]), std::fabs(s.candidate.data()[i])) + 1e-15);
    }
  }
}

TEST(Cell, NonFiniteNamesGate) {
  std::mt19937_64 rng(8);
  const CellParams p = random_cell(2, 1, 2, rng);
  const Tensor x({2, 1}, {1e308, 1e308});
  const Tensor a = Tensor::full({2, 2}, 0.5), e = randn({2, 2}, rng);
  try {
    cell_step(x, Tensor::zeros({2, 2}), a, a, e, e, p);
    FAIL() << "expected NumericError";
  } catch (const NumericError& err) {
    EXPECT_NE(std::string(err.what()).find("gate"), std::string::npos) << err.what();
  }
}

TEST(Cell, Gradcheck) {
  std::mt19937_64 rng(9);
  CellParams p = random_cell(2, 2, 3, rng);
  Tensor x = randn({3, 2}, rng), h = randn({3, 3}, rng);
  Tensor a = softmax(randn({3, 3}, rng), -1), e = randn({3, 2}, rng), ed = randn({3, 2}, rng);
  const Tensor w = randn({3, 3}, rng);
  std::vector<Tensor> leaves{x, h, e, ed};
  for (const GateParams* g : {&p.update, &p.reset, &p.candidate}) {
    leaves.insert(leaves.end(), {g->static_branch.weight_pool, g->static_branch.bias_pool,
                                 g->dynamic_branch.weight_pool, g->dynamic_branch.bias_pool, g->fusion});
  }
  EXPECT_LT(gradcheck([&] { return sum(mul(cell_step(x, h, a, a, e, ed, p), w)); }, leaves), 1e-4);
}
