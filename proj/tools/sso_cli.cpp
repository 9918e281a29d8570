// SPDX-License-Identifier: Apache-2.0
//
// Experiment CLI: train / sweep / place / moe-factor.
// Exit codes: 0 success, 1 usage or config error, 2 numerical divergence.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sso/config.hpp"
#include "sso/harness.hpp"
#include "sso/placement.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitDiverged = 2;

std::string resolve_output_dir(const std::string& configured) {
  if (const char* env = std::getenv("SSO_OUTPUT_DIR")) return env;
  return configured;
}

int cmd_train(const std::string& config_path) {
  sso::ExperimentConfig config = sso::load_experiment_config(config_path);
  const std::string out_dir = resolve_output_dir(config.output_dir);
  fs::create_directories(out_dir);

  if (config.task.kind == "char_lm" && config.arch.vocab == 0)
    config.arch.vocab = sso::load_corpus(config.task.corpus_path).vocab;

  sso::Registry reg = sso::init_registry(config.arch, config.optimizer, config.task.seed);
  sso::RunResult result = sso::run_training(config.task, config.arch, reg, config.cfg);
  sso::write_metrics_jsonl(result, out_dir + "/metrics.jsonl");
  sso::write_summary_csv(result, out_dir + "/summary.csv");

  if (result.diverged) {
    std::fprintf(stderr, "DivergenceDetected at step %ld\n",
                 result.steps.empty() ? 0L : result.steps.back().step);
    return kExitDiverged;
  }
  std::printf("train done: steps=%zu final_loss=%.6g metrics=%s/metrics.jsonl\n",
              result.steps.size(), result.final_loss, out_dir.c_str());
  return kExitOk;
}

int cmd_sweep(const std::string& config_path) {
  sso::ExperimentConfig config = sso::load_experiment_config(config_path);
  if (config.widths.empty() || config.etas.empty())
    throw sso::ConfigError("sweep needs non-empty \"widths\" and \"etas\"");
  const std::string out_dir = resolve_output_dir(config.output_dir);
  fs::create_directories(out_dir);

  sso::SweepReport report = sso::width_sweep(config.widths, config.etas, config.task, config.arch,
                                             config.optimizer, config.cfg);
  sso::write_sweep_csv(report, out_dir + "/sweep.csv");

  size_t ok = 0;
  for (const auto& c : report.cells)
    if (!c.failed && !c.diverged) ++ok;
  for (const auto& [width, eta] : report.argmin_eta)
    std::printf("width=%d argmin_eta=%g\n", width, eta);
  std::printf("sweep done: %zu/%zu cells ok, grid=%s/sweep.csv\n", ok, report.cells.size(),
              out_dir.c_str());
  return ok > 0 ? kExitOk : kExitDiverged;
}

json report_to_json(const sso::PlacementReport& rep) {
  json j;
  j["policy"] = rep.policy;
  j["assignment"] = rep.assignment;
  j["per_rank_load"] = rep.per_rank_load;
  j["imbalance"] = rep.imbalance;
  return j;
}

int cmd_place(const std::string& workload_path, int ranks, const std::string& policy) {
  std::ifstream in(workload_path, std::ios::binary);
  if (!in) throw sso::ConfigError("cannot open workload: " + workload_path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw sso::ConfigError(std::string("workload parse error: ") + e.what());
  }
  std::vector<sso::WorkItem> items;
  for (const auto& entry : j) {
    sso::WorkItem it;
    it.module_name = entry.at("module_name").get<std::string>();
    it.cost = entry.at("cost").get<double>();
    items.push_back(std::move(it));
  }

  json out;
  if (policy == "pingpong") {
    out = report_to_json(sso::place_pingpong(items, ranks));
  } else if (policy == "greedy") {
    out = report_to_json(sso::place_greedy(items, ranks));
  } else if (policy == "roundrobin") {
    out = report_to_json(sso::place_round_robin(items, ranks));
  } else if (policy == "all") {
    out = json::array({report_to_json(sso::place_pingpong(items, ranks)),
                       report_to_json(sso::place_greedy(items, ranks)),
                       report_to_json(sso::place_round_robin(items, ranks))});
  } else {
    throw sso::ConfigError("unknown policy: " + policy);
  }
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

int cmd_moe_factor(int n_total, int k, int n_shared, int trials, std::uint64_t seed) {
  sso::MoeFactorEstimate est = sso::moe_scaling_factor(n_total, k, n_shared, trials, seed);
  std::printf("moe scaling factor M = %.6f (stderr %.6f, trials %d)\n", est.mean, est.stderr_,
              trials);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral sphere optimization experiments"};
  app.require_subcommand(1);

  std::string config_path;
  auto* train = app.add_subcommand("train", "Run one training experiment from a JSON config");
  train->add_option("--config", config_path, "Path to experiment config")->required();

  std::string sweep_config_path;
  auto* sweep = app.add_subcommand("sweep", "Width x learning-rate grid from a JSON config");
  sweep->add_option("--config", sweep_config_path, "Path to experiment config")->required();

  std::string workload_path, policy = "pingpong";
  int ranks = 1;
  auto* place = app.add_subcommand("place", "Assign a workload file to simulated DP ranks");
  place->add_option("--workload", workload_path, "JSON list of {module_name, cost}")->required();
  place->add_option("--ranks", ranks, "Number of ranks")->required();
  place->add_option("--policy", policy, "pingpong | greedy | roundrobin | all");

  int n_total = 64, k = 4, n_shared = 1, trials = 10000;
  std::uint64_t seed = 0;
  auto* moe = app.add_subcommand("moe-factor", "Monte Carlo MoE routed-expert scaling factor");
  moe->add_option("--n-total", n_total, "Total experts");
  moe->add_option("--k", k, "Routed top-k");
  moe->add_option("--n-shared", n_shared, "Shared experts");
  moe->add_option("--trials", trials, "Monte Carlo trials");
  moe->add_option("--seed", seed, "RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (train->parsed()) return cmd_train(config_path);
    if (sweep->parsed()) return cmd_sweep(sweep_config_path);
    if (place->parsed()) return cmd_place(workload_path, ranks, policy);
    if (moe->parsed()) return cmd_moe_factor(n_total, k, n_shared, trials, seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitConfig;
}
