// SPDX-License-Identifier: Apache-2.0
#include "sso/harness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>

#include <json.hpp>

#include "sso/spectral_geom.hpp"

namespace sso {
namespace {

Batch make_regression_batch(const ToyTask& task, const ArchConfig& arch, const Matrix& teacher,
                            std::mt19937_64& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  Batch b;
  b.x.resize(arch.input_dim, task.batch_size);
  for (Eigen::Index i = 0; i < b.x.rows(); ++i)
    for (Eigen::Index j = 0; j < b.x.cols(); ++j) b.x(i, j) = unit(rng);
  b.y = teacher * b.x;
  for (Eigen::Index i = 0; i < b.y.rows(); ++i)
    for (Eigen::Index j = 0; j < b.y.cols(); ++j) b.y(i, j) += task.noise * unit(rng);
  return b;
}

Batch make_lm_batch(const ToyTask& task, const Corpus& corpus, std::mt19937_64& rng) {
  std::uniform_int_distribution<size_t> start(
      0, corpus.tokens.size() - static_cast<size_t>(task.seq_len) - 1);
  Batch b;
  b.tokens.resize(static_cast<size_t>(task.batch_size));
  for (auto& seq : b.tokens) {
    const size_t s = start(rng);
    seq.assign(corpus.tokens.begin() + static_cast<long>(s),
               corpus.tokens.begin() + static_cast<long>(s) + task.seq_len);
  }
  return b;
}

SsoConfig module_cfg(const SsoConfig& base, const ArchConfig& arch, const AtomicModule& m) {
  SsoConfig cfg = base;
  if (!m.spectral) cfg.weight_decay = arch.embed_weight_decay;
  return cfg;
}

nlohmann::json probe_json(const std::map<std::string, ActivationProbe>& probes) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, p] : probes) j[name] = {{"rms", p.rms}, {"absmax", p.absmax}};
  return j;
}

}  // namespace

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open corpus: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text.size() < 64) throw ConfigError("corpus too small: " + path);
  std::array<int, 256> id;
  id.fill(-1);
  for (unsigned char c : text) id[c] = 0;
  int next = 0;
  for (int c = 0; c < 256; ++c)
    if (id[static_cast<size_t>(c)] == 0) id[static_cast<size_t>(c)] = next++;
  Corpus corpus;
  corpus.vocab = next;
  corpus.tokens.reserve(text.size());
  for (unsigned char c : text) corpus.tokens.push_back(id[c]);
  return corpus;
}

RunResult run_training(const ToyTask& task, const ArchConfig& arch, Registry& reg,
                       const SsoConfig& cfg) {
  std::mt19937_64 data_rng(task.seed);
  Matrix teacher;
  Corpus corpus;
  if (task.kind == "synthetic_regression") {
    teacher = gaussian_matrix(arch.output_dim, arch.input_dim,
                              1.0 / std::sqrt(static_cast<double>(arch.input_dim)),
                              task.teacher_seed);
  } else if (task.kind == "char_lm") {
    corpus = load_corpus(task.corpus_path);
    if (arch.vocab < corpus.vocab)
      throw ConfigError("arch vocab smaller than corpus vocab");
  } else {
    throw ConfigError("unknown task kind " + task.kind);
  }

  RunResult result;
  for (long step = 0; step < task.steps; ++step) {
    Batch batch = task.kind == "char_lm" ? make_lm_batch(task, corpus, data_rng)
                                         : make_regression_batch(task, arch, teacher, data_rng);
    ForwardBackward fb = model_forward_backward(reg, arch, batch);

    StepMetrics sm;
    sm.step = step;
    sm.loss = fb.loss;
    sm.activations = fb.probes;

    if (!std::isfinite(fb.loss) || fb.loss > 1e6) {
      result.diverged = true;
      result.steps.push_back(std::move(sm));
      break;
    }

    for (auto& m : reg.modules) {
      auto it = fb.grads.find(m.name);
      if (it == fb.grads.end()) continue;
      ModuleStepRecord rec;
      SsoConfig mcfg = module_cfg(cfg, arch, m);
      try {
        switch (m.optimizer_kind) {
          case OptimizerKind::Sso:
            m.weight = sso_step(m.weight, it->second, m.state, mcfg, m.radius, &rec);
            break;
          case OptimizerKind::MuonSphere:
            m.weight = muon_sphere_step(m.weight, it->second, m.state, mcfg, m.radius, &rec);
            break;
          case OptimizerKind::Muon:
            m.weight = muon_step(m.weight, it->second, m.state, mcfg,
                                 lr_scaler(m.scaler, m.d_out, m.d_in), &rec);
            break;
          case OptimizerKind::AdamW:
            m.weight = adamw_step(m.weight, it->second, m.state, mcfg, &rec);
            break;
        }
      } catch (const ZeroMatrixError&) {
        rec.degenerate = true;  // zero momentum: skip this module's update
      }
      sm.per_module[m.name] = rec;
    }
    result.steps.push_back(std::move(sm));
  }
  result.final_loss = result.steps.empty() ? 0.0 : result.steps.back().loss;
  return result;
}

void write_metrics_jsonl(const RunResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for write: " + path);
  for (const auto& sm : result.steps) {
    nlohmann::json j;
    j["step"] = sm.step;
    j["loss"] = sm.loss;
    nlohmann::json mods = nlohmann::json::object();
    for (const auto& [name, rec] : sm.per_module) {
      mods[name] = {{"spectral_norm", rec.spectral_norm},
                    {"update_spectral_norm", rec.update_spectral_norm},
                    {"lambda_star", rec.lambda_star},
                    {"solver_iters", rec.solver_iters},
                    {"tangent_overlap", rec.tangent_overlap},
                    {"degenerate", rec.degenerate}};
    }
    j["modules"] = std::move(mods);
    j["activations"] = probe_json(sm.activations);
    out << j.dump() << "\n";
  }
  if (result.diverged)
    out << nlohmann::json{{"diverged", true}}.dump() << "\n";
}

void write_summary_csv(const RunResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for write: " + path);
  out << "step,loss,max_spectral_norm,max_abs_lambda,max_solver_iters,ffn_rms,ffn_absmax\n";
  char buf[256];
  for (const auto& sm : result.steps) {
    double max_sn = 0.0, max_lam = 0.0;
    int max_it = 0;
    for (const auto& [name, rec] : sm.per_module) {
      max_sn = std::max(max_sn, rec.spectral_norm);
      max_lam = std::max(max_lam, std::abs(rec.lambda_star));
      max_it = std::max(max_it, rec.solver_iters);
    }
    double ffn_rms = 0.0, ffn_absmax = 0.0;
    if (auto it = sm.activations.find("ffn_hidden"); it != sm.activations.end()) {
      ffn_rms = it->second.rms;
      ffn_absmax = it->second.absmax;
    }
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%d,%.17g,%.17g\n", sm.step, sm.loss,
                  max_sn, max_lam, max_it, ffn_rms, ffn_absmax);
    out << buf;
  }
}

SweepReport width_sweep(const std::vector<int>& widths, const std::vector<double>& etas,
                        const ToyTask& task, const ArchConfig& base_arch,
                        OptimizerKind optimizer, const SsoConfig& base_cfg) {
  SweepReport report;
  for (int width : widths) {
    double best_loss = std::numeric_limits<double>::infinity();
    double best_eta = 0.0;
    for (double eta : etas) {
      SweepCell cell;
      cell.width = width;
      cell.eta = eta;
      try {
        ArchConfig arch = base_arch;
        arch.hidden_width = width;
        Registry reg = init_registry(arch, optimizer, task.seed);
        SsoConfig cfg = base_cfg;
        cfg.eta = eta;
        RunResult r = run_training(task, arch, reg, cfg);
        cell.final_loss = r.final_loss;
        cell.diverged = r.diverged;
        if (!r.steps.empty()) {
          auto probe = [](const StepMetrics& sm) {
            auto it = sm.activations.find("ffn_hidden");
            return it == sm.activations.end() ? 0.0 : it->second.rms;
          };
          cell.init_ffn_rms = probe(r.steps.front());
          cell.final_ffn_rms = probe(r.steps.back());
        }
        if (!r.diverged && r.final_loss < best_loss) {
          best_loss = r.final_loss;
          best_eta = eta;
        }
      } catch (const std::exception& e) {
        cell.failed = true;
        cell.error = e.what();
      }
      report.cells.push_back(std::move(cell));
    }
    if (std::isfinite(best_loss)) report.argmin_eta[width] = best_eta;
  }
  return report;
}

void write_sweep_csv(const SweepReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for write: " + path);
  out << "width,eta,final_loss,init_ffn_rms,final_ffn_rms,diverged,failed\n";
  char buf[256];
  for (const auto& c : report.cells) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%d,%d\n", c.width, c.eta,
                  c.final_loss, c.init_ffn_rms, c.final_ffn_rms, c.diverged ? 1 : 0,
                  c.failed ? 1 : 0);
    out << buf;
  }
}

MoeFactorEstimate moe_scaling_factor(int n_total, int k_routed, int n_shared, int trials,
                                     std::uint64_t seed) {
  if (n_shared < 1 || k_routed < 1 || k_routed > n_total - n_shared)
    throw ConfigError("moe_scaling_factor: need 1 <= k_routed <= n_total - n_shared");
  if (trials < 1) throw ConfigError("moe_scaling_factor: trials must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const int n_routed_pool = n_total - n_shared;
  std::vector<double> scores(static_cast<size_t>(n_routed_pool));
  double sum = 0.0, sum_sq = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    for (auto& s : scores) s = 1.0 / (1.0 + std::exp(-unit(rng)));
    std::partial_sort(scores.begin(), scores.begin() + k_routed, scores.end(),
                      std::greater<double>());
    double top_sum = 0.0;
    for (int j = 0; j < k_routed; ++j) top_sum += scores[static_cast<size_t>(j)];
    double mag_sq = 0.0;
    for (int j = 0; j < k_routed; ++j) {
      const double g = scores[static_cast<size_t>(j)] / top_sum;
      mag_sq += g * g;
    }
    const double factor = std::sqrt(static_cast<double>(n_shared)) / std::sqrt(mag_sq);
    sum += factor;
    sum_sq += factor * factor;
  }
  MoeFactorEstimate est;
  est.mean = sum / trials;
  const double var = std::max(0.0, sum_sq / trials - est.mean * est.mean);
  est.stderr_ = std::sqrt(var / trials);
  return est;
}

}  // namespace sso
