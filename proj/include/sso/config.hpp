// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "sso/granularity.hpp"
#include "sso/harness.hpp"
#include "sso/optimizer.hpp"

namespace sso {

// One self-describing JSON document drives an experiment. Parsing is strict:
// unknown keys are fatal, so hyperparameter typos cannot pass silently.
struct ExperimentConfig {
  ToyTask task;
  ArchConfig arch;
  OptimizerKind optimizer = OptimizerKind::Sso;
  SsoConfig cfg;
  std::vector<int> widths;   // sweep only
  std::vector<double> etas;  // sweep only
  std::string output_dir = "out";
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);
std::string serialize_experiment_config(const ExperimentConfig& config);

}  // namespace sso
