// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "htvgnn/model.hpp"

namespace htvgnn {

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;      // measured error or count
  double tolerance = 0.0;  // pass when value <= tolerance
  std::string detail;
};

enum class Suite { gradcheck, invariants, oracles };

Suite parse_suite(const std::string& name);
std::string to_string(Suite suite);

struct SuiteReport {
  Suite suite = Suite::oracles;
  std::vector<CheckResult> checks;
  bool passed() const;
};

SuiteReport run_suite(Suite suite, std::uint64_t seed = 1);

std::string format_suite(const SuiteReport& report);

/// Tiny end-to-end instance: B=1, T=4, tau=2, N=3, D=8, 2 heads, d_m=4,
/// d_E=3, one recurrent layer, no dropout.
struct ToyProblem {
  ModelConfig config;
  ModelParams params;
  ForecastBatch batch;
  ModelContext context;
};

ToyProblem toy_problem(std::uint64_t seed);

/// Largest relative gradient error of the training loss over all parameters.
double full_loss_gradcheck(ToyProblem& problem, Ablation ablation = Ablation::full, double eps = 1e-5);

}  // namespace htvgnn
