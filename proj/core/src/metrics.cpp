// SPDX-License-Identifier: Apache-2.0
#include "htvgnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace htvgnn {

bool operator==(const MetricTriple& a, const MetricTriple& b) {
  return a.mae == b.mae && a.rmse == b.rmse && a.mape == b.mape;
}

bool operator==(const MetricReport& a, const MetricReport& b) {
  return a.overall == b.overall && a.per_step == b.per_step && a.groups == b.groups;
}

void ErrorSums::add(double prediction, double target, double zero_threshold) {
  const double e = prediction - target;
  abs += std::fabs(e);
  sq += e * e;
  ++count;
  if (std::fabs(target) > zero_threshold) {
    ape += std::fabs(e / target);
    masked_abs += std::fabs(e);
    ++ape_count;
  }
}

void ErrorSums::merge(const ErrorSums& o) {
  abs += o.abs;
  sq += o.sq;
  ape += o.ape;
  masked_abs += o.masked_abs;
  count += o.count;
  ape_count += o.ape_count;
}

MetricTriple ErrorSums::metrics() const {
  if (count == 0) throw ContractError("metrics of an empty evaluation set");
  MetricTriple m;
  m.mae = abs / static_cast<double>(count);
  m.rmse = std::sqrt(sq / static_cast<double>(count));
  if (ape_count > 0) m.mape = 100.0 * ape / static_cast<double>(ape_count);
  return m;
}

double ErrorSums::masked_mae() const {
  if (ape_count == 0) return std::numeric_limits<double>::quiet_NaN();
  return masked_abs / static_cast<double>(ape_count);
}

MetricTriple metrics(std::span<const double> prediction, std::span<const double> target, double zero_threshold) {
  if (prediction.size() != target.size()) throw DimensionError("metrics: prediction and target sizes differ");
  ErrorSums s;
  for (std::size_t i = 0; i < prediction.size(); ++i) s.add(prediction[i], target[i], zero_threshold);
  return s.metrics();
}

MetricTriple metrics(const Tensor& prediction, const Tensor& target, double zero_threshold) {
  if (prediction.shape() != target.shape()) {
    throw DimensionError("metrics: shapes " + shape_str(prediction.shape()) + " and " + shape_str(target.shape()) +
                         " differ");
  }
  return metrics(prediction.data(), target.data(), zero_threshold);
}

std::vector<std::vector<ErrorSums>> window_errors(const Tensor& prediction, const Tensor& target,
                                                  double zero_threshold) {
  if (prediction.shape() != target.shape() || prediction.rank() < 2) {
    throw DimensionError("window_errors: shapes " + shape_str(prediction.shape()) + " and " +
                         shape_str(target.shape()) + " must match with rank >= 2");
  }
  const std::size_t b = prediction.dim(0), tau = prediction.dim(1);
  const std::size_t per_step = prediction.numel() / (b * tau);
  const auto p = prediction.data();
  const auto y = target.data();
  std::vector<std::vector<ErrorSums>> out(b, std::vector<ErrorSums>(tau));
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t k = 0; k < tau; ++k) {
      const std::size_t base = (i * tau + k) * per_step;
      for (std::size_t j = 0; j < per_step; ++j) out[i][k].add(p[base + j], y[base + j], zero_threshold);
    }
  }
  return out;
}

MetricReport make_report(const std::vector<ErrorSums>& per_step, HorizonMode mode) {
  if (per_step.empty()) throw ContractError("make_report: no horizon steps");
  MetricReport r;
  ErrorSums total;
  for (const auto& s : per_step) {
    r.per_step.push_back(s.metrics());
    total.merge(s);
  }
  r.overall = total.metrics();
  const std::size_t tau = per_step.size();
  const std::pair<const char*, std::size_t> groups[] = {{"15min", 3}, {"30min", 6}, {"60min", 12}};
  for (const auto& [label, steps] : groups) {
    const std::size_t last = std::min(steps, tau);
    ErrorSums g;
    if (mode == HorizonMode::cumulative) {
      for (std::size_t k = 0; k < last; ++k) g.merge(per_step[k]);
    } else {
      g = per_step[last - 1];
    }
    r.groups.emplace_back(label, g.metrics());
  }
  r.groups.emplace_back("Average", r.overall);
  return r;
}

std::string format_report_table(std::span<const std::pair<std::string, MetricReport>> rows) {
  if (rows.empty()) throw ContractError("format_report_table: no rows");
  const auto& groups = rows.front().second.groups;
  std::size_t lw = 5;
  for (const auto& [label, r] : rows) {
    lw = std::max(lw, label.size());
    if (r.groups.size() != groups.size()) throw ContractError("format_report_table: rows have different groups");
  }
  constexpr int cell = 8;
  constexpr std::size_t span = 3 * cell + 2;
  auto pad = [](const std::string& text, std::size_t width) { return text + std::string(width - std::min(width, text.size()), ' '); };
  auto centered = [](const std::string& text, std::size_t width) {
    const std::size_t room = width - std::min(width, text.size());
    return std::string(room / 2, ' ') + text + std::string(room - room / 2, ' ');
  };
  std::ostringstream os;
  os << pad("Model", lw);
  for (const auto& g : groups) os << " | " << centered(g.first, span);
  os << '\n' << pad("", lw);
  char buf[64];
  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::snprintf(buf, sizeof buf, " | %*s %*s %*s", cell, "MAE", cell, "MAPE(%)", cell, "RMSE");
    os << buf;
  }
  os << '\n' << std::string(lw, '-');
  for (std::size_t g = 0; g < groups.size(); ++g) os << "-+-" << std::string(span, '-');
  os << '\n';
  for (const auto& [label, r] : rows) {
    os << pad(label, lw);
    for (const auto& [name, m] : r.groups) {
      std::snprintf(buf, sizeof buf, " | %*.2f ", cell, m.mae);
      os << buf;
      if (m.mape) {
        std::snprintf(buf, sizeof buf, "%*.2f ", cell, *m.mape);
      } else {
        std::snprintf(buf, sizeof buf, "%*s ", cell, "n/a");
      }
      os << buf;
      std::snprintf(buf, sizeof buf, "%*.2f", cell, m.rmse);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

std::string format_report_table(const MetricReport& report, const std::string& label) {
  const std::pair<std::string, MetricReport> row{label, report};
  return format_report_table(std::span(&row, 1));
}

}  // namespace htvgnn
