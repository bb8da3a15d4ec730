// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "htvgnn/adam.hpp"
#include "htvgnn/graphs.hpp"
#include "htvgnn/metrics.hpp"
#include "htvgnn/model.hpp"

namespace htvgnn {

/// Everything a run reads: normalized series, windows and fixed graphs.
struct TrainingData {
  SeriesDataset dataset;  // raw values with fitted mean/std
  Tensor normalized;
  Splits splits;
  ModelContext context;
};

/// Fits normalization on the train fraction, windows every split and derives
/// the dynamic-graph mask from the topology and pattern graphs.
TrainingData make_training_data(SeriesDataset dataset, const GraphSet& graphs, const SplitRatios& ratios = {},
                                std::size_t history = 12, std::size_t horizon = 12);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  MetricReport train;  // from the predictions that produced each update
  MetricReport val;
  bool improved = false;
};

struct TrainOptions {
  std::size_t epochs = 100;
  std::size_t patience = 15;  // 0 disables early stopping
  AdamOptions adam;
  std::uint64_t seed = 1;     // shuffling and dropout
  double zero_threshold = 1e-3;
  HorizonMode horizon_mode = HorizonMode::cumulative;
  bool restore_best = true;   // leave the best-validation parameters in place
  std::filesystem::path checkpoint_path;  // written on every improvement when set
  std::filesystem::path log_path;         // metric CSV when set
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainState {
  std::size_t epoch = 0;
  AdamState adam;
  double best_val_mae = 0.0;
  std::size_t best_epoch = 0;  // 0: no epoch finished yet
  std::size_t patience_counter = 0;
  std::uint64_t seed = 0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  TrainState state;
  bool stopped_early = false;
  bool aborted = false;  // non-finite loss; parameters rolled back to the best epoch
  std::string abort_reason;
};

TrainResult train(const ModelConfig& config, Ablation ablation, ModelParams& params, const TrainingData& data,
                  const TrainOptions& options = {});

/// Masked MAE on raw-scale predictions; entries with |y| <= zero_threshold are
/// skipped. Returns an undefined tensor when every entry is masked.
Tensor masked_mae_loss(const Tensor& prediction, const Tensor& target, double zero_threshold = 1e-3);

/// Predictions [B, tau, N, C] for the given anchors, without recording.
Tensor predict(const ModelParams& params, const ModelConfig& config, Ablation ablation, const TrainingData& data,
               std::span<const std::size_t> anchors);

/// Per-step error sums over a window set, windows combined in anchor order.
std::vector<ErrorSums> evaluate_sums(const ModelParams& params, const ModelConfig& config, Ablation ablation,
                                     const TrainingData& data, const WindowSet& windows,
                                     double zero_threshold = 1e-3);

MetricReport evaluate(const ModelParams& params, const ModelConfig& config, Ablation ablation,
                      const TrainingData& data, const WindowSet& windows, double zero_threshold = 1e-3,
                      HorizonMode mode = HorizonMode::cumulative);

/// CSV with one row per epoch and split.
std::string metric_log_header();
std::string metric_log_row(const std::string& ablation, std::size_t epoch, const std::string& split, double loss,
                           const MetricReport& report);

}  // namespace htvgnn
