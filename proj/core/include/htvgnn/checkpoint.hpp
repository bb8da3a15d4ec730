// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <stdexcept>

#include "htvgnn/model.hpp"

namespace htvgnn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  ModelConfig config;
  Ablation ablation = Ablation::full;
  Normalizer normalizer;
  ModelParams params;
};

/// Text manifest (config, ablation, normalization, then one "name rank dims"
/// line per tensor) terminated by "end", followed by all tensor values as
/// little-endian f64 in manifest order.
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config, Ablation ablation,
                     const Normalizer& normalizer, const ModelParams& params);

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace htvgnn
