// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "htvgnn/attention.hpp"
#include "htvgnn/ctvgcru.hpp"
#include "htvgnn/series.hpp"
#include "htvgnn/tvgraph.hpp"

namespace htvgnn {

/// Architecture hyperparameters. Named presets carry the published settings.
struct ModelConfig {
  std::string name = "custom";
  std::size_t nodes = 8;
  std::size_t channels = 1;
  std::size_t steps_per_day = 288;
  std::size_t history = 12;  // T
  std::size_t horizon = 12;  // tau
  std::size_t encoder_layers = 1;
  std::size_t decoder_layers = 1;  // recorded; the head is a single projection
  std::size_t batch = 16;
  std::size_t heads = 8;
  std::size_t width = 64;      // D, also the recurrent hidden width
  std::size_t graph_dim = 5;   // E (node embedding width), also d_phi
  std::size_t mask_dim = 15;   // d_m
  std::size_t ctvgcrm_layers = 2;
  double dropout = 0.0;

  void validate() const;
  /// Plain-text key=value lines.
  std::string to_text() const;
  static ModelConfig from_text(const std::string& text);
};

/// pems03, pems04, pems07, pems08 or synthetic.
ModelConfig preset(const std::string& name);
std::vector<std::string> preset_names();

enum class Ablation { full, wo_tm, wo_cg, wo_bc, wo_etpmsa, wo_tv, wo_tr };

Ablation parse_ablation(const std::string& name);
std::string to_string(Ablation a);

/// Which parts of the model a variant switches off.
struct AblationFlags {
  bool mask_embeddings = true;  // false: plain multi-head attention
  bool attention = true;        // false: projected inputs go straight to the recurrent stack
  GraphKind static_graphs = GraphKind::full;
  bool dynamic_graphs = true;   // false: the dynamic branch uses the topology
  bool recurrent = true;        // false: per-step topology graph convolution
};

AblationFlags flags_for(Ablation a);

/// Ordered, name-addressable parameter registry. Handles share storage with
/// the typed views in ModelParams.
class ParamStore {
 public:
  Tensor add(const std::string& name, Shape shape, std::vector<double> values);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<Tensor> tensors() const;
  std::size_t scalar_count() const;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::map<std::string, std::size_t> index_;
};

struct EncoderLayerParams {
  AttentionParams attention;
  Tensor norm_gain;  // [D]
  Tensor norm_bias;  // [D]
};

struct RecurrentLayerParams {
  DynamicGraphParams dynamic;
  CellParams cell;
};

struct ModelParams {
  ParamStore store;
  Tensor input_weight;  // [C, D]
  Tensor input_bias;    // [D]
  MaskEmbeddings mask;
  std::vector<EncoderLayerParams> encoder;
  StaticGraphParams static_graph;
  std::vector<RecurrentLayerParams> recurrent;
  Tensor head_weight;  // [D, tau * C]
  Tensor head_bias;    // [tau * C]

  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);
  void zero_grad();
};

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); embeddings ~ U(-0.1, 0.1);
/// layer-norm gains 1 and biases 0. Deterministic in `seed`.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

/// Fixed inputs the forward pass needs besides parameters.
struct ModelContext {
  Tensor topology;      // binary [N, N]
  Tensor dynamic_mask;  // binary [N, N]
  Normalizer normalizer;
};

struct ForwardOptions {
  bool training = false;
  std::mt19937_64* rng = nullptr;  // required when training with dropout
};

/// Predictions in raw units, [B, tau, N, C].
Tensor forward(const ForecastBatch& batch, const ModelParams& params, const ModelConfig& config, Ablation ablation,
               const ModelContext& context, const ForwardOptions& options = {});

}  // namespace htvgnn
