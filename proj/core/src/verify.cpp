// SPDX-License-Identifier: Apache-2.0
#include "htvgnn/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

#include "htvgnn/attention.hpp"
#include "htvgnn/ctvgcru.hpp"
#include "htvgnn/gradcheck.hpp"
#include "htvgnn/graphs.hpp"
#include "htvgnn/metrics.hpp"
#include "htvgnn/ops.hpp"
#include "htvgnn/trainer.hpp"
#include "htvgnn/tvgraph.hpp"

namespace htvgnn {
namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = g(rng);
  return Tensor(std::move(shape), std::move(v));
}

CheckResult check_max(const std::string& name, double value, double tol, std::string detail = {}) {
  return {name, value <= tol, value, tol, std::move(detail)};
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

AttentionParams random_attention(std::size_t d, std::size_t heads, std::mt19937_64& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  return {random_tensor({d, d}, rng, s), random_tensor({d, d}, rng, s), random_tensor({d, d}, rng, s),
          random_tensor({d, d}, rng, s), heads};
}

// Full (i, j) table, no row reuse.
double dtw_table(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size(), m = y.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> d(n + 1, std::vector<double>(m + 1, inf));
  d[0][0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      d[i][j] = std::fabs(x[i - 1] - y[j - 1]) + std::min({d[i - 1][j], d[i][j - 1], d[i - 1][j - 1]});
    }
  }
  return d[n][m];
}

// ---------------------------------------------------------------------------

SuiteReport gradcheck_suite(std::uint64_t seed) {
  SuiteReport r{Suite::gradcheck, {}};
  std::mt19937_64 rng(seed);
  constexpr double tol = 1e-4;

  {
    Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
    r.checks.push_back(check_max("matmul", gradcheck([&] { return sum(tanh(matmul(a, b))); }, {a, b}), tol));
  }
  {
    Tensor x = random_tensor({2, 5}, rng);
    Tensor w = random_tensor({2, 5}, rng);
    r.checks.push_back(check_max("softmax", gradcheck([&] { return sum(mul(softmax(x, -1), w)); }, {x}), tol));
    r.checks.push_back(check_max("layer_norm", gradcheck([&] { return sum(mul(layer_norm(x), w)); }, {x}), tol));
  }
  {
    const std::size_t n = 3, d = 4;
    Tensor x = random_tensor({2, n, d}, rng);
    Tensor m = random_tensor({2, n, 2}, rng);
    AttentionParams p = random_attention(d, 2, rng);
    r.checks.push_back(check_max(
        "etpmsa", gradcheck([&] { return sum(tanh(etpmsa(x, mask_matrix(m), p))); },
                            {x, m, p.w_query, p.w_key, p.w_value, p.w_out}),
        tol));
  }
  {
    const std::size_t t = 3, n = 3, e = 2;
    StaticGraphParams p{random_tensor({n, e}, rng), random_tensor({t, n, e}, rng), random_tensor({t, t}, rng)};
    Tensor w = random_tensor({t, n, n}, rng);
    r.checks.push_back(check_max(
        "coupled_static_graphs",
        gradcheck([&] { return sum(mul(coupled_static_graphs(p), w)); }, {p.node, p.step_bias, p.coupling}), tol));
  }
  {
    const std::size_t n = 3, c = 4, dphi = 2;
    DynamicGraphParams p{random_tensor({c, dphi}, rng), random_tensor({2 * dphi}, rng)};
    Tensor h = random_tensor({n, c}, rng);
    Tensor mask({n, n}, {1, 1, 0, 1, 1, 1, 0, 1, 1});
    Tensor w = random_tensor({n, n}, rng);
    r.checks.push_back(check_max(
        "dynamic_graph", gradcheck([&] { return sum(mul(dynamic_graph_at(p, h, mask).adjacency, w)); },
                                   {p.w_map, p.attn, h}),
        tol));
  }
  {
    ToyProblem toy = toy_problem(seed);
    r.checks.push_back(check_max("full_loss", full_loss_gradcheck(toy), tol,
                                 std::to_string(toy.params.store.scalar_count()) + " parameters"));
  }
  return r;
}

SuiteReport invariants_suite(std::uint64_t seed) {
  SuiteReport r{Suite::invariants, {}};
  std::mt19937_64 rng(seed);
  const std::size_t t = 4, n = 6, e = 3;
  StaticGraphParams sp{random_tensor({n, e}, rng), random_tensor({t, n, e}, rng, 0.5), random_tensor({t, t}, rng)};

  {
    const Tensor g = coupled_static_graphs(sp);
    const auto v = g.data();
    double worst = 0.0, min_entry = 0.0;
    for (std::size_t row = 0; row < t * n; ++row) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        s += v[row * n + j];
        min_entry = std::min(min_entry, v[row * n + j]);
      }
      worst = std::max(worst, std::fabs(s - 1.0));
    }
    r.checks.push_back(check_max("static_graphs_row_stochastic", worst, 1e-10));
    r.checks.push_back(check_max("static_graphs_nonnegative", -min_entry, 0.0));
  }
  {
    // Perturbing step k's embedding leaves every earlier coupled graph intact.
    const Tensor base = coupled_static_graphs(sp);
    double moved = 0.0;
    for (std::size_t k = 1; k < t; ++k) {
      StaticGraphParams q{sp.node, sp.step_bias.clone(), sp.coupling};
      auto sb = q.step_bias.mutable_data();
      for (std::size_t i = k * n * e; i < (k + 1) * n * e; ++i) sb[i] += 0.7;
      const Tensor g = coupled_static_graphs(q);
      moved = std::max(moved, max_abs_diff(base.data().subspan(0, k * n * n), g.data().subspan(0, k * n * n)));
    }
    r.checks.push_back(check_max("coupling_causality", moved, 0.0));
  }
  {
    std::vector<double> mask(n * n, 0.0);
    std::bernoulli_distribution coin(0.4);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) mask[i * n + j] = (i == j || coin(rng)) ? 1.0 : 0.0;
    }
    const Tensor m({n, n}, mask);
    DynamicGraphParams dp{random_tensor({5, e}, rng), random_tensor({2 * e}, rng)};
    std::size_t leaks = 0;
    for (int trial = 0; trial < 20; ++trial) {
      const Tensor adj = dynamic_graph_at(dp, random_tensor({n, 5}, rng, 3.0), m).adjacency;
      const auto a = adj.data();
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (mask[i] == 0.0 && a[i] != 0.0) ++leaks;
      }
    }
    r.checks.push_back(check_max("dynamic_graph_support", static_cast<double>(leaks), 0.0));
  }
  {
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t d = 8;
      AttentionParams p = random_attention(d, 2, rng);
      const Tensor x = random_tensor({2, n, d}, rng);
      std::vector<double> eye(n * n, 0.0);
      for (std::size_t i = 0; i < n; ++i) eye[i * n + i] = 1.0;
      worst = std::max(worst, max_abs_diff(etpmsa(x, Tensor({n, n}, eye), p).data(), mhsa_plain(x, p).data()));
    }
    r.checks.push_back(check_max("identity_mask_reduction", worst, 1e-12));
  }
  {
    // Relabeling nodes permutes attention outputs the same way.
    const std::size_t d = 4;
    AttentionParams p = random_attention(d, 2, rng);
    const Tensor x = random_tensor({n, d}, rng);
    const Tensor m = random_tensor({n, 2}, rng);
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = (i + 2) % n;
    const Tensor base = etpmsa(x, mask_matrix(m), p);
    const Tensor moved = etpmsa(index_select(x, perm), mask_matrix(index_select(m, perm)), p);
    r.checks.push_back(
        check_max("attention_permutation_equivariance", max_abs_diff(index_select(base, perm).data(), moved.data()),
                  1e-12));
  }
  {
    std::size_t bad = 0;
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> x(1 + trial % 7), y(1 + (trial / 7) % 5);
      for (auto& v : x) v = u(rng);
      for (auto& v : y) v = u(rng);
      if (dtw_distance(x, x) != 0.0 || dtw_distance(x, y) != dtw_distance(y, x)) ++bad;
    }
    r.checks.push_back(check_max("dtw_identity_symmetry", static_cast<double>(bad), 0.0));
  }
  {
    std::size_t bad = 0;
    std::uniform_real_distribution<double> u(0.5, 50.0);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> a(10), b(10);
      for (auto& v : a) v = u(rng);
      for (auto& v : b) v = u(rng);
      const auto m = metrics(a, b);
      if (!(m.rmse >= m.mae && m.mae >= 0.0)) ++bad;
    }
    r.checks.push_back(check_max("rmse_at_least_mae", static_cast<double>(bad), 0.0));
  }
  return r;
}

SuiteReport oracles_suite(std::uint64_t seed) {
  SuiteReport r{Suite::oracles, {}};
  std::mt19937_64 rng(seed);
  {
    std::size_t mismatches = 0;
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    std::uniform_int_distribution<int> len(1, 12);
    for (int trial = 0; trial < 1000; ++trial) {
      std::vector<double> x(len(rng)), y(len(rng));
      for (auto& v : x) v = u(rng);
      for (auto& v : y) v = u(rng);
      if (dtw_distance(x, y) != dtw_table(x, y)) ++mismatches;
    }
    r.checks.push_back(check_max("dtw_full_table", static_cast<double>(mismatches), 0.0, "1000 random pairs"));
  }
  {
    double worst = 0.0;
    std::uniform_real_distribution<double> u(-3.0, 30.0);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> p(17), y(17);
      for (auto& v : p) v = u(rng);
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = (i % 5 == 0) ? 0.0 : u(rng);
      double sa = 0, ss = 0, sp = 0;
      std::size_t k = 0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        sa += std::fabs(p[i] - y[i]);
        ss += (p[i] - y[i]) * (p[i] - y[i]);
        if (std::fabs(y[i]) > 1e-3) {
          sp += std::fabs((y[i] - p[i]) / y[i]);
          ++k;
        }
      }
      const auto m = metrics(p, y);
      const double n = static_cast<double>(p.size());
      worst = std::max({worst, std::fabs(m.mae - sa / n), std::fabs(m.rmse - std::sqrt(ss / n)),
                        m.mape ? std::fabs(*m.mape - 100.0 * sp / static_cast<double>(k))
                               : std::numeric_limits<double>::infinity()});
    }
    r.checks.push_back(check_max("metric_formulas", worst, 1e-12));
  }
  {
    const auto m = metrics(std::vector<double>{1.0, 2.0}, std::vector<double>{0.0, 0.0});
    r.checks.push_back({"mape_all_masked_undefined", !m.mape.has_value(), m.mape ? 1.0 : 0.0, 0.0, {}});
  }
  {
    Tensor a = random_tensor({5, 7}, rng), b = random_tensor({7, 3}, rng);
    const Tensor c = matmul(a, b);
    double worst = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < 7; ++k) s += a.at({i, k}) * b.at({k, j});
        worst = std::max(worst, std::fabs(s - c.at({i, j})));
      }
    }
    r.checks.push_back(check_max("matmul_triple_loop", worst, 1e-12));
  }
  {
    const Tensor s = softmax(Tensor({3}, {1.0, 2.0, 3.0}), 0);
    const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    const double worst = std::max({std::fabs(s.at({0}) - std::exp(1.0) / z), std::fabs(s.at({1}) - std::exp(2.0) / z),
                                   std::fabs(s.at({2}) - std::exp(3.0) / z)});
    r.checks.push_back(check_max("softmax_direct", worst, 1e-12));
  }
  {
    // One head, N=2: weights softmax(q kᵀ/√d) against direct arithmetic.
    const std::size_t n = 2, d = 2;
    AttentionParams p = random_attention(d, 1, rng);
    const Tensor x = random_tensor({n, d}, rng);
    const Tensor w = attention_weights(x, Tensor(), p);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double logits[2];
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          double q = 0.0, k = 0.0;
          for (std::size_t a = 0; a < d; ++a) {
            q += x.at({i, a}) * p.w_query.at({a, c});
            k += x.at({j, a}) * p.w_key.at({a, c});
          }
          s += q * k;
        }
        logits[j] = s / std::sqrt(static_cast<double>(d));
      }
      const double z = std::exp(logits[0]) + std::exp(logits[1]);
      for (std::size_t j = 0; j < n; ++j) {
        worst = std::max(worst, std::fabs(w.data()[i * n + j] - std::exp(logits[j]) / z));
      }
    }
    r.checks.push_back(check_max("attention_weights_direct", worst, 1e-12));
  }
  return r;
}

}  // namespace

Suite parse_suite(const std::string& name) {
  if (name == "gradcheck") return Suite::gradcheck;
  if (name == "invariants") return Suite::invariants;
  if (name == "oracles") return Suite::oracles;
  throw std::invalid_argument("unknown suite '" + name + "' (expected gradcheck, invariants or oracles)");
}

std::string to_string(Suite suite) {
  switch (suite) {
    case Suite::gradcheck:
      return "gradcheck";
    case Suite::invariants:
      return "invariants";
    case Suite::oracles:
      return "oracles";
  }
  return "?";
}

bool SuiteReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

SuiteReport run_suite(Suite suite, std::uint64_t seed) {
  switch (suite) {
    case Suite::gradcheck:
      return gradcheck_suite(seed);
    case Suite::invariants:
      return invariants_suite(seed);
    case Suite::oracles:
      return oracles_suite(seed);
  }
  throw ContractError("unknown suite");
}

std::string format_suite(const SuiteReport& report) {
  std::ostringstream os;
  char buf[256];
  for (const auto& c : report.checks) {
    std::snprintf(buf, sizeof buf, "%-4s %-36s %12.3e <= %-9.1e %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(),
                  c.value, c.tolerance, c.detail.c_str());
    os << buf;
  }
  os << to_string(report.suite) << ": " << (report.passed() ? "all checks passed" : "FAILED") << '\n';
  return os.str();
}

ToyProblem toy_problem(std::uint64_t seed) {
  ToyProblem p;
  auto& c = p.config;
  c.name = "toy";
  c.nodes = 3;
  c.channels = 1;
  c.steps_per_day = 8;
  c.history = 4;
  c.horizon = 2;
  c.batch = 1;
  c.heads = 2;
  c.width = 8;
  c.graph_dim = 3;
  c.mask_dim = 4;
  c.ctvgcrm_layers = 1;
  c.dropout = 0.0;
  c.validate();
  p.params = init_params(c, seed);

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(20.0, 80.0);
  SeriesDataset ds;
  const std::size_t steps = 24;
  std::vector<double> v(steps * c.nodes);
  for (auto& x : v) x = u(rng);
  ds.values = Tensor({steps, c.nodes, 1}, std::move(v));
  ds.interval_minutes = 180;
  ds.samples_per_day = 8;
  ds.start_day_of_week = 2;
  const Tensor normalized = zscore_fit_transform(ds, 0.6);
  const std::size_t anchor[] = {11};
  p.batch = make_batch(ds, normalized, anchor, c.history, c.horizon);

  p.context.topology = Tensor({3, 3}, {1, 1, 0, 1, 1, 1, 0, 1, 1});
  p.context.dynamic_mask = Tensor({3, 3}, {1, 1, 1, 1, 1, 1, 1, 1, 1});
  p.context.normalizer = normalizer_of(ds);
  return p;
}

double full_loss_gradcheck(ToyProblem& toy, Ablation ablation, double eps) {
  const auto leaves = toy.params.store.tensors();
  for (auto t : leaves) t.set_requires_grad(true);
  return gradcheck(
      [&] {
        return masked_mae_loss(forward(toy.batch, toy.params, toy.config, ablation, toy.context), toy.batch.y);
      },
      leaves, eps);
}

}  // namespace htvgnn
