// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "htvgnn/tensor.hpp"

namespace htvgnn {

/// MAE, RMSE and MAPE (percent). MAPE is empty when every target is masked.
struct MetricTriple {
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> mape;
};

bool operator==(const MetricTriple& a, const MetricTriple& b);

/// Running sums for one horizon step.
struct ErrorSums {
  double abs = 0.0;
  double sq = 0.0;
  double ape = 0.0;
  double masked_abs = 0.0;  // |error| over entries kept by the MAPE mask
  std::size_t count = 0;
  std::size_t ape_count = 0;

  void add(double prediction, double target, double zero_threshold);
  void merge(const ErrorSums& other);
  MetricTriple metrics() const;
  /// MAE over the masked entries; the training loss. NaN when all are masked.
  double masked_mae() const;
};

/// MAPE skips entries with |target| <= zero_threshold; MAE and RMSE use all.
MetricTriple metrics(std::span<const double> prediction, std::span<const double> target,
                     double zero_threshold = 1e-3);
MetricTriple metrics(const Tensor& prediction, const Tensor& target, double zero_threshold = 1e-3);

/// `cumulative` averages steps 1..k for the 15/30/60-minute columns;
/// `single_step` reports step k alone.
enum class HorizonMode { cumulative, single_step };

struct MetricReport {
  MetricTriple overall;
  std::vector<MetricTriple> per_step;
  /// Exactly four groups: "15min", "30min", "60min", "Average".
  std::vector<std::pair<std::string, MetricTriple>> groups;
};

bool operator==(const MetricReport& a, const MetricReport& b);

/// Per-window, per-step error sums for predictions/targets [B, tau, ...].
/// Result is row-major [B][tau].
std::vector<std::vector<ErrorSums>> window_errors(const Tensor& prediction, const Tensor& target,
                                                  double zero_threshold);

/// Combines per-step sums (already merged over windows in a fixed order).
MetricReport make_report(const std::vector<ErrorSums>& per_step, HorizonMode mode = HorizonMode::cumulative);

/// Human-readable grid: one row per model, and per horizon group the columns
/// MAE, MAPE(%) and RMSE.
std::string format_report_table(std::span<const std::pair<std::string, MetricReport>> rows);
std::string format_report_table(const MetricReport& report, const std::string& label);

}  // namespace htvgnn
