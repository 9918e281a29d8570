// SPDX-License-Identifier: Apache-2.0
#include "sso/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace sso {
namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& scope) {
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw ConfigError("unknown key \"" + key + "\" in " + scope);
}

template <typename T>
void get_if(const json& obj, const char* key, T& out) {
  if (auto it = obj.find(key); it != obj.end()) out = it->get<T>();
}

ScalerKind scaler_from_string(const std::string& s) {
  if (s == "spectral_mup") return ScalerKind::SpectralMuP;
  if (s == "align_adam_rms") return ScalerKind::AlignAdamRms;
  if (s == "spectral_kaiming") return ScalerKind::SpectralKaiming;
  throw ConfigError("unknown scaler: " + s);
}
std::string scaler_to_string(ScalerKind k) {
  switch (k) {
    case ScalerKind::SpectralMuP: return "spectral_mup";
    case ScalerKind::AlignAdamRms: return "align_adam_rms";
    case ScalerKind::SpectralKaiming: return "spectral_kaiming";
  }
  return "?";
}

void parse_task(const json& j, ToyTask& task) {
  reject_unknown(j, {"kind", "teacher_seed", "noise", "corpus_path", "batch_size", "seq_len",
                     "steps", "seed"},
                 "task");
  get_if(j, "kind", task.kind);
  get_if(j, "teacher_seed", task.teacher_seed);
  get_if(j, "noise", task.noise);
  get_if(j, "corpus_path", task.corpus_path);
  get_if(j, "batch_size", task.batch_size);
  get_if(j, "seq_len", task.seq_len);
  get_if(j, "steps", task.steps);
  get_if(j, "seed", task.seed);
}

void parse_arch(const json& j, ArchConfig& arch) {
  reject_unknown(j, {"model", "input_dim", "hidden_width", "output_dim", "num_heads", "head_dim",
                     "vocab", "radius_c", "init_sigma", "scaler", "embed_weight_decay"},
                 "arch");
  get_if(j, "model", arch.model);
  get_if(j, "input_dim", arch.input_dim);
  get_if(j, "hidden_width", arch.hidden_width);
  get_if(j, "output_dim", arch.output_dim);
  get_if(j, "num_heads", arch.num_heads);
  get_if(j, "head_dim", arch.head_dim);
  get_if(j, "vocab", arch.vocab);
  get_if(j, "radius_c", arch.radius_c);
  get_if(j, "init_sigma", arch.init_sigma);
  get_if(j, "embed_weight_decay", arch.embed_weight_decay);
  if (j.contains("scaler")) arch.scaler = scaler_from_string(j["scaler"].get<std::string>());
}

void parse_optimizer(const json& j, ExperimentConfig& config) {
  reject_unknown(j, {"kind", "eta", "beta", "nesterov", "msign_iters", "msign_schedule",
                     "solver_tol", "solver_max_iters", "retraction", "dynamic_lambda_wd",
                     "weight_decay", "adam_beta1", "adam_beta2", "adam_eps"},
                 "optimizer");
  if (j.contains("kind")) config.optimizer = optimizer_kind_from_string(j["kind"].get<std::string>());
  SsoConfig& c = config.cfg;
  get_if(j, "eta", c.eta);
  get_if(j, "beta", c.beta);
  get_if(j, "nesterov", c.nesterov);
  get_if(j, "msign_iters", c.msign_iters);
  get_if(j, "solver_tol", c.solver_tol);
  get_if(j, "solver_max_iters", c.solver_max_iters);
  get_if(j, "dynamic_lambda_wd", c.dynamic_lambda_wd);
  get_if(j, "weight_decay", c.weight_decay);
  get_if(j, "adam_beta1", c.adam_beta1);
  get_if(j, "adam_beta2", c.adam_beta2);
  get_if(j, "adam_eps", c.adam_eps);
  if (j.contains("msign_schedule")) {
    const std::string s = j["msign_schedule"].get<std::string>();
    if (s == "polar_express")
      c.msign_schedule = MsignSchedule::PolarExpress;
    else if (s == "newton_schulz")
      c.msign_schedule = MsignSchedule::NewtonSchulz;
    else
      throw ConfigError("unknown msign_schedule: " + s);
  }
  if (j.contains("retraction")) {
    const std::string s = j["retraction"].get<std::string>();
    if (s == "hard")
      c.retraction = RetractionKind::Hard;
    else if (s == "dynamic")
      c.retraction = RetractionKind::Dynamic;
    else
      throw ConfigError("unknown retraction: " + s);
  }
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig config;
  reject_unknown(j, {"task", "arch", "optimizer", "widths", "etas", "output_dir"}, "config root");
  if (j.contains("task")) parse_task(j["task"], config.task);
  if (j.contains("arch")) parse_arch(j["arch"], config.arch);
  if (j.contains("optimizer")) parse_optimizer(j["optimizer"], config);
  get_if(j, "widths", config.widths);
  get_if(j, "etas", config.etas);
  get_if(j, "output_dir", config.output_dir);
  config.cfg.radius_c = config.arch.radius_c;
  return config;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_experiment_config(text);
}

std::string serialize_experiment_config(const ExperimentConfig& config) {
  json j;
  j["task"] = {{"kind", config.task.kind},
               {"teacher_seed", config.task.teacher_seed},
               {"noise", config.task.noise},
               {"corpus_path", config.task.corpus_path},
               {"batch_size", config.task.batch_size},
               {"seq_len", config.task.seq_len},
               {"steps", config.task.steps},
               {"seed", config.task.seed}};
  j["arch"] = {{"model", config.arch.model},
               {"input_dim", config.arch.input_dim},
               {"hidden_width", config.arch.hidden_width},
               {"output_dim", config.arch.output_dim},
               {"num_heads", config.arch.num_heads},
               {"head_dim", config.arch.head_dim},
               {"vocab", config.arch.vocab},
               {"radius_c", config.arch.radius_c},
               {"init_sigma", config.arch.init_sigma},
               {"scaler", scaler_to_string(config.arch.scaler)},
               {"embed_weight_decay", config.arch.embed_weight_decay}};
  const SsoConfig& c = config.cfg;
  j["optimizer"] = {
      {"kind", to_string(config.optimizer)},
      {"eta", c.eta},
      {"beta", c.beta},
      {"nesterov", c.nesterov},
      {"msign_iters", c.msign_iters},
      {"msign_schedule", c.msign_schedule == MsignSchedule::PolarExpress ? "polar_express"
                                                                         : "newton_schulz"},
      {"solver_tol", c.solver_tol},
      {"solver_max_iters", c.solver_max_iters},
      {"retraction", c.retraction == RetractionKind::Hard ? "hard" : "dynamic"},
      {"dynamic_lambda_wd", c.dynamic_lambda_wd},
      {"weight_decay", c.weight_decay},
      {"adam_beta1", c.adam_beta1},
      {"adam_beta2", c.adam_beta2},
      {"adam_eps", c.adam_eps}};
  j["widths"] = config.widths;
  j["etas"] = config.etas;
  j["output_dir"] = config.output_dir;
  return j.dump(2);
}

}  // namespace sso
