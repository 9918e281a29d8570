// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sso/granularity.hpp"
#include "sso/models.hpp"
#include "sso/optimizer.hpp"

namespace sso {

// Deterministic toy training tasks.
struct ToyTask {
  std::string kind = "synthetic_regression";  // or "char_lm"
  std::uint64_t teacher_seed = 1;
  double noise = 0.1;
  std::string corpus_path;  // char_lm only
  int batch_size = 32;
  int seq_len = 16;  // char_lm only
  long steps = 100;
  std::uint64_t seed = 0;
};

struct Corpus {
  std::vector<int> tokens;
  int vocab = 0;
};

// Byte-level tokenization of a text file; ids are ranks of the distinct bytes.
Corpus load_corpus(const std::string& path);

struct StepMetrics {
  long step = 0;
  double loss = 0.0;
  std::map<std::string, ModuleStepRecord> per_module;
  std::map<std::string, ActivationProbe> activations;
};

struct RunResult {
  std::vector<StepMetrics> steps;
  bool diverged = false;
  double final_loss = 0.0;
};

// Runs the task on the registry, stepping each atomic module with its own
// optimizer. Deterministic given (task, registry seed, cfg). Stops early and
// flags divergence when the loss goes non-finite or above 1e6.
RunResult run_training(const ToyTask& task, const ArchConfig& arch, Registry& reg,
                       const SsoConfig& cfg);

// Metric files: one JSON-lines record per step plus a flat CSV summary.
void write_metrics_jsonl(const RunResult& result, const std::string& path);
void write_summary_csv(const RunResult& result, const std::string& path);

struct SweepCell {
  int width = 0;
  double eta = 0.0;
  double final_loss = 0.0;
  double init_ffn_rms = 0.0;
  double final_ffn_rms = 0.0;
  bool diverged = false;
  bool failed = false;
  std::string error;
};

struct SweepReport {
  std::vector<SweepCell> cells;
  std::map<int, double> argmin_eta;  // per width, eta with the lowest final loss
};

// Grid of runs over widths x learning rates; all cells share the same seeds.
// Per-cell failures are recorded without aborting the grid.
SweepReport width_sweep(const std::vector<int>& widths, const std::vector<double>& etas,
                        const ToyTask& task, const ArchConfig& base_arch,
                        OptimizerKind optimizer, const SsoConfig& base_cfg);

void write_sweep_csv(const SweepReport& report, const std::string& path);

struct MoeFactorEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

// Monte Carlo estimate of the routed-expert scaling factor
// sqrt(n_shared) / sqrt(sum g_j^2), g = renormalized top-k sigmoid scores of
// standard-normal logits.
MoeFactorEstimate moe_scaling_factor(int n_total, int k_routed, int n_shared, int trials,
                                     std::uint64_t seed);

}  // namespace sso
