// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "htvgnn/tensor.hpp"

namespace htvgnn {

/// Malformed or inconsistent input file.
class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Partition too short to hold a single window.
class WindowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Statistics unusable for z-score normalization (zero spread).
class NormalizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Layout { csv_grid, packed_binary };

Layout parse_layout(const std::string& name);

/// Raw traffic series plus the calendar metadata needed for time indices.
struct SeriesDataset {
  Tensor values;  // [steps, nodes, channels], raw units
  int interval_minutes = 5;
  std::size_t samples_per_day = 288;
  int start_day_of_week = 0;
  std::vector<double> mean;  // per channel; filled by zscore_fit_transform
  std::vector<double> std;

  std::size_t steps() const { return values.dim(0); }
  std::size_t nodes() const { return values.dim(1); }
  std::size_t channels() const { return values.dim(2); }

  /// Throws ContractError unless the calendar fields are consistent.
  void validate() const;
};

struct LoadOptions {
  Layout layout = Layout::csv_grid;
  std::size_t channels = 1;  // csv columns are node-major groups of `channels`
  int interval_minutes = 5;
  int start_day_of_week = 0;
};

/// Reads a series. Empty CSV cells are forward-filled per column; leading
/// gaps become 0.
SeriesDataset load_series(const std::filesystem::path& path, const LoadOptions& options);

/// Little-endian header {d0, d1, d2 as u64} followed by row-major f64 values.
void save_packed(const std::filesystem::path& path, const Tensor& values);
Tensor load_packed(const std::filesystem::path& path);

/// Per-channel z-score statistics.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> std;

  /// Values with channels on the last axis.
  Tensor transform(const Tensor& raw) const;
  Tensor inverse(const Tensor& normalized) const;
};

/// Fits mean and population std on the leading `train_fraction` of the time
/// axis, stores them on `ds`, and returns the normalized values.
Tensor zscore_fit_transform(SeriesDataset& ds, double train_fraction);

Normalizer normalizer_of(const SeriesDataset& ds);

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

/// Half-open range of absolute time indices.
struct Partition {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

/// Windows of one partition, identified by their anchor index t: inputs cover
/// [t - T + 1, t], targets [t + 1, t + tau].
struct WindowSet {
  Partition partition;
  std::vector<std::size_t> anchors;
};

struct Splits {
  WindowSet train;
  WindowSet val;
  WindowSet test;
  std::size_t history = 12;
  std::size_t horizon = 12;
};

std::vector<Partition> partition_series(std::size_t steps, const SplitRatios& ratios);

Splits split_and_window(const SeriesDataset& ds, const SplitRatios& ratios = {}, std::size_t history = 12,
                        std::size_t horizon = 12);

std::size_t time_of_day(const SeriesDataset& ds, std::size_t index);
std::size_t day_of_week(const SeriesDataset& ds, std::size_t index);

/// A batch of windows: normalized inputs, raw-scale targets, calendar indices.
struct ForecastBatch {
  Tensor x;  // [B, T, N, C]
  Tensor y;  // [B, tau, N, C]
  std::vector<std::size_t> tod;  // B * T, row-major
  std::vector<std::size_t> dow;  // B * T
  std::vector<std::size_t> anchors;

  std::size_t size() const { return anchors.size(); }
};

ForecastBatch make_batch(const SeriesDataset& ds, const Tensor& normalized, std::span<const std::size_t> anchors,
                         std::size_t history, std::size_t horizon);

}  // namespace htvgnn
