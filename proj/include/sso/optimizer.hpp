// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>

#include "sso/matrix.hpp"
#include "sso/msign.hpp"
#include "sso/power_iteration.hpp"
#include "sso/spectral_geom.hpp"

namespace sso {

enum class RetractionKind { Hard, Dynamic };

// Per-module optimizer state: momentum plus the singular-vector cache that
// warm-starts the next power iteration. The Adam moment buffers are allocated
// lazily and only used by adamw_step.
struct OptimizerState {
  Matrix momentum;
  std::optional<Vector> cached_u;
  std::optional<Vector> cached_v;
  long step_count = 0;

  Matrix exp_avg;
  Matrix exp_avg_sq;
};

struct SsoConfig {
  double eta = 1e-3;
  double beta = 0.9;
  bool nesterov = true;
  int msign_iters = 8;
  MsignSchedule msign_schedule = MsignSchedule::PolarExpress;
  double solver_tol = 2e-4;
  int solver_max_iters = 20;
  RetractionKind retraction = RetractionKind::Hard;
  double dynamic_lambda_wd = 0.1;  // only used with RetractionKind::Dynamic
  double radius_c = 2.0;
  double weight_decay = 0.1;  // baselines only; hidden SSO weights use none
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.95;
  double adam_eps = 1e-8;
  PowerIterOptions power;
};

struct SolveReport {
  double lambda_star = 0.0;
  double residual = 0.0;  // |h(lambda_star)|
  int bracket_steps = 0;
  int bisect_steps = 0;
  bool degenerate = false;
  bool converged = true;  // false iff the evaluation budget ran out first
};

// Per-step diagnostics for one module.
struct ModuleStepRecord {
  double spectral_norm = 0.0;         // measured on the post-step weight
  double pre_retraction_sigma = 0.0;  // sigma from the in-step power iteration
  double post_retraction_sigma = 0.0;      // measured on the retracted weight
  double post_retraction_frobenius = 0.0;  // ||W||_F right after retraction
  double update_spectral_norm = 0.0;  // ||W_next - W_retracted||_2
  double weight_frobenius = 0.0;
  double lambda_star = 0.0;
  double tangent_overlap = 0.0;  // <Theta, Phi>
  int solver_iters = 0;
  int power_iters = 0;
  bool degenerate = false;
};

// h(lambda) = <Theta, msign(M_hat + lambda * Theta)>. M_hat is expected to be
// Frobenius-normalized. Throws ZeroOperandError when M_hat + lambda*Theta
// vanishes (the exactly-aligned case, where msign is undefined).
double h_eval(const Matrix& m_hat, const Matrix& theta, double lambda, int msign_iters,
              MsignSchedule schedule = MsignSchedule::PolarExpress);

// Bracket-and-bisect root solver for h. Expands the bracket geometrically
// (start half-width 0.1, factor 2) away from sign(h(0)), capped at the
// Frobenius-based nuclear bound 2*sqrt(min(m,n))*||M_hat||_F, then bisects.
// Every h evaluation counts against cfg.solver_max_iters.
SolveReport solve_lambda(const Matrix& m_hat, const Matrix& theta, const SsoConfig& cfg);

// One SSO step (momentum -> normalize -> power iteration -> retract ->
// lambda solve -> msign update). Returns the new weight.
Matrix sso_step(const Matrix& w, const Matrix& g, OptimizerState& state, const SsoConfig& cfg,
                const RadiusSpec& radius, ModuleStepRecord* rec = nullptr);

// SSO with the solver short-circuited to lambda = 0. Shares the sso_step code
// path, so the two are bit-compatible.
Matrix muon_sphere_step(const Matrix& w, const Matrix& g, OptimizerState& state,
                        const SsoConfig& cfg, const RadiusSpec& radius,
                        ModuleStepRecord* rec = nullptr);

// Muon baseline: W <- W*(1 - eta*wd) - eta * r_lr * msign(momentum).
// No weight constraint.
Matrix muon_step(const Matrix& w, const Matrix& g, OptimizerState& state, const SsoConfig& cfg,
                 double r_lr, ModuleStepRecord* rec = nullptr);

// AdamW baseline with decoupled weight decay and bias correction.
Matrix adamw_step(const Matrix& w, const Matrix& g, OptimizerState& state, const SsoConfig& cfg,
                  ModuleStepRecord* rec = nullptr);

}  // namespace sso
