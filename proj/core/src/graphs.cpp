// SPDX-License-Identifier: Apache-2.0
#include "htvgnn/graphs.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>
#include <tuple>
#include <vector>

namespace htvgnn {

void GraphSet::validate() const {
  for (const Tensor* m : {&a_topo, &a_dtw}) {
    if (!m->defined() || m->shape() != Shape{n_nodes, n_nodes}) {
      throw GraphError("graph matrices must be " + std::to_string(n_nodes) + "x" + std::to_string(n_nodes));
    }
    const auto d = m->data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d[i] != 0.0 && d[i] != 1.0) throw GraphError("graph matrices must be binary");
    }
    for (std::size_t i = 0; i < n_nodes; ++i) {
      if (d[i * n_nodes + i] != 1.0) throw GraphError("graph matrices must keep self-connections");
    }
  }
}

Tensor build_topology(std::span<const Edge> edges, std::size_t n_nodes, bool directed) {
  if (n_nodes == 0) throw GraphError("graph needs at least one node");
  std::vector<double> a(n_nodes * n_nodes, 0.0);
  for (const auto& e : edges) {
    if (e.from >= n_nodes || e.to >= n_nodes) {
      throw GraphError("edge (" + std::to_string(e.from) + ", " + std::to_string(e.to) + ") references a node outside 0.." +
                       std::to_string(n_nodes - 1));
    }
    a[e.from * n_nodes + e.to] = 1.0;
    if (!directed) a[e.to * n_nodes + e.from] = 1.0;
  }
  for (std::size_t i = 0; i < n_nodes; ++i) a[i * n_nodes + i] = 1.0;
  return Tensor({n_nodes, n_nodes}, std::move(a));
}

std::vector<Edge> load_edges_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw GraphError(path.string() + ": missing header line");
  std::vector<Edge> edges;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    double from = -1, to = -1, cost = 1.0;
    if (!(fields >> from >> to)) throw GraphError(path.string() + ": malformed edge at row " + std::to_string(row));
    if (!(fields >> cost)) cost = 1.0;
    if (from < 0 || to < 0 || from != std::floor(from) || to != std::floor(to)) {
      throw GraphError(path.string() + ": invalid node id at row " + std::to_string(row));
    }
    edges.push_back({static_cast<std::size_t>(from), static_cast<std::size_t>(to), cost});
  }
  return edges;
}

void save_edges_csv(const std::filesystem::path& path, std::span<const Edge> edges) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw GraphError("cannot write " + path.string());
  out << "from,to,cost\n";
  out.precision(17);
  for (const auto& e : edges) out << e.from << ',' << e.to << ',' << e.cost << '\n';
}

double dtw_distance(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw ContractError("dtw_distance: series must be nonempty");
  const std::size_t m = y.size();
  std::vector<double> prev(m), cur(m);
  prev[0] = std::fabs(x[0] - y[0]);
  for (std::size_t j = 1; j < m; ++j) prev[j] = prev[j - 1] + std::fabs(x[0] - y[j]);
  for (std::size_t i = 1; i < x.size(); ++i) {
    cur[0] = prev[0] + std::fabs(x[i] - y[0]);
    for (std::size_t j = 1; j < m; ++j) {
      cur[j] = std::fabs(x[i] - y[j]) + std::min({prev[j], cur[j - 1], prev[j - 1]});
    }
    std::swap(prev, cur);
  }
  return prev[m - 1];
}

std::vector<std::vector<double>> mean_daily_profiles(const SeriesDataset& ds, Partition range, std::size_t channel) {
  const std::size_t n = ds.samples_per_day;
  if (range.end > ds.steps() || range.size() < n) {
    throw GraphError("daily profiles need at least one full day (" + std::to_string(n) + " steps) in range");
  }
  if (channel >= ds.channels()) throw ContractError("profile channel out of range");
  const std::size_t nodes = ds.nodes(), c = ds.channels();
  std::vector<std::vector<double>> profiles(nodes, std::vector<double>(n, 0.0));
  std::vector<std::size_t> counts(n, 0);
  const auto v = ds.values.data();
  for (std::size_t t = range.begin; t < range.end; ++t) {
    const std::size_t slot = time_of_day(ds, t);
    ++counts[slot];
    for (std::size_t i = 0; i < nodes; ++i) profiles[i][slot] += v[(t * nodes + i) * c + channel];
  }
  for (auto& p : profiles) {
    for (std::size_t k = 0; k < n; ++k) p[k] /= static_cast<double>(counts[k]);
  }
  return profiles;
}

Tensor pattern_graph_from_profiles(const std::vector<std::vector<double>>& profiles, double sparsity) {
  const std::size_t n = profiles.size();
  if (n == 0) throw GraphError("pattern graph needs at least one node");
  if (!(sparsity >= 0.0 && sparsity <= 1.0)) throw GraphError("sparsity must lie in [0, 1]");
  const std::size_t off_diagonal = n * (n - 1);
  const auto keep = std::min(
      off_diagonal, static_cast<std::size_t>(std::ceil(sparsity * static_cast<double>(off_diagonal) - 1e-9)));
  if (keep == 0) throw GraphError("sparsity " + std::to_string(sparsity) + " keeps no pattern edges");

  // Rows are independent; each worker claims the next unfilled row.
  std::vector<double> dist(n * n, 0.0);
  std::atomic<std::size_t> next_row{0};
  auto work = [&] {
    for (std::size_t i = next_row++; i < n; i = next_row++) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double d = dtw_distance(profiles[i], profiles[j]);
        dist[i * n + j] = d;
        dist[j * n + i] = d;
      }
    }
  };
  {
    const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }
  std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
  candidates.reserve(off_diagonal);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) candidates.emplace_back(dist[i * n + j], i, j);
    }
  }
  std::sort(candidates.begin(), candidates.end());
  std::vector<double> a(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) a[i * n + i] = 1.0;
  for (std::size_t k = 0; k < keep; ++k) {
    const auto& [d, i, j] = candidates[k];
    a[i * n + j] = 1.0;
  }
  return Tensor({n, n}, std::move(a));
}

Tensor build_pattern_graph(const SeriesDataset& ds, double sparsity, double train_fraction) {
  const auto parts = partition_series(ds.steps(), {train_fraction, (1.0 - train_fraction) / 2, (1.0 - train_fraction) / 2});
  return pattern_graph_from_profiles(mean_daily_profiles(ds, parts[0]), sparsity);
}

Tensor dynamic_mask(const GraphSet& g) {
  const auto a = g.a_topo.data();
  const auto b = g.a_dtw.data();
  if (g.a_topo.shape() != g.a_dtw.shape()) throw DimensionError("topology and pattern graphs differ in shape");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (a[i] != 0.0 || b[i] != 0.0) ? 1.0 : 0.0;
  return Tensor(g.a_topo.shape(), std::move(out));
}

Tensor row_normalize(const Tensor& a) {
  if (a.rank() != 2) throw DimensionError("row_normalize expects a matrix, got " + shape_str(a.shape()));
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  std::vector<double> out(a.data().begin(), a.data().end());
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += out[i * cols + j];
    if (s == 0.0) continue;
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] /= s;
  }
  return Tensor(a.shape(), std::move(out));
}

}  // namespace htvgnn
