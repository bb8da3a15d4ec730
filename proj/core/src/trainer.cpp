// SPDX-License-Identifier: Apache-2.0
#include "htvgnn/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numeric>
#include <random>
#include <thread>

#include "htvgnn/checkpoint.hpp"
#include "htvgnn/ops.hpp"

namespace htvgnn {
namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

void merge_rows(std::vector<ErrorSums>& total, const std::vector<std::vector<ErrorSums>>& rows) {
  for (const auto& row : rows) {
    if (total.empty()) total.resize(row.size());
    for (std::size_t k = 0; k < row.size(); ++k) total[k].merge(row[k]);
  }
}

double loss_of(const std::vector<ErrorSums>& steps) {
  ErrorSums all;
  for (const auto& s : steps) all.merge(s);
  return all.masked_mae();
}

}  // namespace

TrainingData make_training_data(SeriesDataset dataset, const GraphSet& graphs, const SplitRatios& ratios,
                                std::size_t history, std::size_t horizon) {
  graphs.validate();
  if (graphs.n_nodes != dataset.nodes()) {
    throw GraphError("graphs cover " + std::to_string(graphs.n_nodes) + " nodes but the series has " +
                     std::to_string(dataset.nodes()));
  }
  TrainingData d;
  d.normalized = zscore_fit_transform(dataset, ratios.train);
  d.splits = split_and_window(dataset, ratios, history, horizon);
  d.context.topology = graphs.a_topo;
  d.context.dynamic_mask = dynamic_mask(graphs);
  d.context.normalizer = normalizer_of(dataset);
  d.dataset = std::move(dataset);
  return d;
}

Tensor masked_mae_loss(const Tensor& prediction, const Tensor& target, double zero_threshold) {
  if (prediction.shape() != target.shape()) {
    throw DimensionError("loss: prediction " + shape_str(prediction.shape()) + " vs target " +
                         shape_str(target.shape()));
  }
  std::vector<double> mask(target.numel());
  const auto y = target.data();
  double kept = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = std::fabs(y[i]) > zero_threshold ? 1.0 : 0.0;
    kept += mask[i];
  }
  if (kept == 0.0) return {};
  const Tensor m(target.shape(), std::move(mask));
  return mul_scalar(sum(mul(abs(sub(prediction, target)), m)), 1.0 / kept);
}

Tensor predict(const ModelParams& params, const ModelConfig& config, Ablation ablation, const TrainingData& data,
               std::span<const std::size_t> anchors) {
  NoGradGuard guard;
  const auto batch = make_batch(data.dataset, data.normalized, anchors, config.history, config.horizon);
  return forward(batch, params, config, ablation, data.context);
}

std::vector<ErrorSums> evaluate_sums(const ModelParams& params, const ModelConfig& config, Ablation ablation,
                                     const TrainingData& data, const WindowSet& windows, double zero_threshold) {
  if (windows.anchors.empty()) throw WindowError("evaluation split has no windows");
  const std::size_t bs = std::max<std::size_t>(1, config.batch);
  const std::size_t chunks = (windows.anchors.size() + bs - 1) / bs;
  std::vector<std::vector<std::vector<ErrorSums>>> rows(chunks);
  std::vector<std::exception_ptr> errors(chunks);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    NoGradGuard guard;
    for (std::size_t c = next++; c < chunks; c = next++) {
      try {
        const std::size_t start = c * bs;
        const std::size_t stop = std::min(windows.anchors.size(), start + bs);
        const std::span<const std::size_t> chunk(windows.anchors.data() + start, stop - start);
        const auto batch = make_batch(data.dataset, data.normalized, chunk, config.history, config.horizon);
        rows[c] = window_errors(forward(batch, params, config, ablation, data.context), batch.y, zero_threshold);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min<std::size_t>(chunks, std::max(1u, std::thread::hardware_concurrency()));
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }
  std::vector<ErrorSums> total;
  for (std::size_t c = 0; c < chunks; ++c) {
    if (errors[c]) std::rethrow_exception(errors[c]);
    merge_rows(total, rows[c]);
  }
  return total;
}

MetricReport evaluate(const ModelParams& params, const ModelConfig& config, Ablation ablation,
                      const TrainingData& data, const WindowSet& windows, double zero_threshold, HorizonMode mode) {
  return make_report(evaluate_sums(params, config, ablation, data, windows, zero_threshold), mode);
}

std::string metric_log_header() {
  std::string h = "ablation,epoch,split,loss,mae,rmse,mape";
  for (const char* g : {"15min", "30min", "60min", "avg"}) {
    for (const char* m : {"mae", "rmse", "mape"}) h += std::string(",") + m + "_" + g;
  }
  return h;
}

std::string metric_log_row(const std::string& ablation, std::size_t epoch, const std::string& split, double loss,
                           const MetricReport& r) {
  std::string row = ablation + "," + std::to_string(epoch) + "," + split + "," + fmt(loss) + "," + fmt(r.overall.mae) +
                    "," + fmt(r.overall.rmse) + "," + fmt(r.overall.mape);
  for (const auto& [label, m] : r.groups) row += "," + fmt(m.mae) + "," + fmt(m.rmse) + "," + fmt(m.mape);
  return row;
}

TrainResult train(const ModelConfig& config, Ablation ablation, ModelParams& params, const TrainingData& data,
                  const TrainOptions& options) {
  config.validate();
  const auto& anchors = data.splits.train.anchors;
  if (anchors.empty()) throw WindowError("training split has no windows");
  if (data.splits.val.anchors.empty()) throw WindowError("validation split has no windows");

  std::vector<Tensor> tensors = params.store.tensors();
  TrainResult result;
  auto& st = result.state;
  st.adam = AdamState::for_params(tensors);
  st.seed = options.seed;
  std::mt19937_64 rng(options.seed);

  std::ofstream log;
  if (!options.log_path.empty()) {
    log.open(options.log_path, std::ios::trunc);
    if (!log) throw std::runtime_error("cannot write metric log " + options.log_path.string());
    log << metric_log_header() << '\n';
  }
  const std::string name = to_string(ablation);
  std::vector<std::vector<double>> best = params.snapshot();
  std::vector<std::size_t> order(anchors.size());
  const std::size_t bs = std::max<std::size_t>(1, config.batch);

  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    // Per-window sums indexed by position in the train split, so the epoch
    // report does not depend on the shuffle.
    std::vector<std::vector<ErrorSums>> per_window(anchors.size());
    try {
      for (std::size_t start = 0; start < order.size(); start += bs) {
        const std::size_t stop = std::min(order.size(), start + bs);
        std::vector<std::size_t> chunk;
        for (std::size_t i = start; i < stop; ++i) chunk.push_back(anchors[order[i]]);
        const auto batch = make_batch(data.dataset, data.normalized, chunk, config.history, config.horizon);
        params.zero_grad();
        Tape::active().clear();
        ForwardOptions fo{true, &rng};
        const Tensor pred = forward(batch, params, config, ablation, data.context, fo);
        const auto rows = window_errors(pred, batch.y, options.zero_threshold);
        for (std::size_t i = start; i < stop; ++i) per_window[order[i]] = rows[i - start];
        const Tensor loss = masked_mae_loss(pred, batch.y, options.zero_threshold);
        if (!loss.defined()) {
          Tape::active().clear();
          continue;
        }
        backward(loss);
        adam_step(tensors, st.adam, options.adam);
        for (const auto& t : tensors) check_finite(t.data(), "parameter update");
      }
    } catch (const NumericError& e) {
      Tape::active().clear();
      params.restore(best);
      result.aborted = true;
      result.abort_reason = "epoch " + std::to_string(epoch) + ": " + e.what();
      return result;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    std::vector<ErrorSums> train_steps;
    merge_rows(train_steps, per_window);
    rec.train_loss = loss_of(train_steps);
    rec.train = make_report(train_steps, options.horizon_mode);
    const auto val_steps = evaluate_sums(params, config, ablation, data, data.splits.val, options.zero_threshold);
    rec.val_loss = loss_of(val_steps);
    rec.val = make_report(val_steps, options.horizon_mode);
    if (std::isinf(rec.train_loss)) {
      params.restore(best);
      result.aborted = true;
      result.abort_reason = "epoch " + std::to_string(epoch) + ": non-finite loss";
      return result;
    }

    st.epoch = epoch;
    if (st.best_epoch == 0 || rec.val.overall.mae < st.best_val_mae) {
      rec.improved = true;
      st.best_val_mae = rec.val.overall.mae;
      st.best_epoch = epoch;
      st.patience_counter = 0;
      best = params.snapshot();
      if (!options.checkpoint_path.empty()) {
        save_checkpoint(options.checkpoint_path, config, ablation, data.context.normalizer, params);
      }
    } else {
      ++st.patience_counter;
    }
    if (log) {
      log << metric_log_row(name, epoch, "train", rec.train_loss, rec.train) << '\n'
          << metric_log_row(name, epoch, "val", rec.val_loss, rec.val) << '\n';
      log.flush();
    }
    if (options.on_epoch) options.on_epoch(rec);
    result.history.push_back(std::move(rec));
    if (options.patience > 0 && st.patience_counter >= options.patience) {
      result.stopped_early = true;
      break;
    }
  }
  if (options.restore_best) params.restore(best);
  return result;
}

}  // namespace htvgnn
