// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace htvgnn::cli {

/// Bad flags, missing caches or unusable inputs; maps to exit code 1.
class UserError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything needed to reproduce one training run.
struct RunManifest {
  std::string preset;
  std::string config_text;  // resolved ModelConfig, key=value lines
  std::string ablation;
  nlohmann::json flags;     // ablation switches as booleans and the static graph kind
  std::uint64_t seed = 1;
  std::size_t epochs = 0;
  std::size_t patience = 0;
  double learning_rate = 0.0;
  std::string prepared_dir;
  std::string prepared_hash;
  std::string values_hash;
  std::string dtw_file;
  std::string dtw_hash;
  std::string checkpoint;  // relative to the run directory
  std::string metric_log;  // relative to the run directory
  // Outcome.
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
  bool aborted = false;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  bool operator==(const RunManifest&) const = default;
};

/// Cache root: $HTVGNN_CACHE_DIR when set, else .htvgnn-cache.
std::filesystem::path cache_root();

/// Runs one command. Tables go to `out`, diagnostics to `err`. Returns 0 on
/// success, 1 on user errors and 2 on internal failures.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace htvgnn::cli
