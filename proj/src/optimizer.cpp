// SPDX-License-Identifier: Apache-2.0
#include "sso/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace sso {
namespace {

void ensure_momentum(OptimizerState& state, const Matrix& w) {
  if (state.momentum.size() == 0) state.momentum = Matrix::Zero(w.rows(), w.cols());
  if (state.momentum.rows() != w.rows() || state.momentum.cols() != w.cols())
    throw ShapeMismatchError("optimizer state momentum shape does not match weight");
}

// Momentum EMA plus optional Nesterov lookahead; returns the raw direction.
Matrix momentum_direction(const Matrix& g, OptimizerState& state, const SsoConfig& cfg) {
  state.momentum = cfg.beta * state.momentum + (1.0 - cfg.beta) * g;
  if (cfg.nesterov) return cfg.beta * state.momentum + (1.0 - cfg.beta) * g;
  return state.momentum;
}

std::optional<std::pair<Vector, Vector>> cache_of(const OptimizerState& state) {
  if (state.cached_u && state.cached_v)
    return std::make_pair(*state.cached_u, *state.cached_v);
  return std::nullopt;
}

// Power iteration that keeps going when the budgeted iteration count was not
// enough. Retraction accuracy depends on sigma, so a clustered top of the
// spectrum (common late in constrained training) must not silently return an
// under-converged estimate.
SpectralTriplet converged_power(const Matrix& a,
                                std::optional<std::pair<Vector, Vector>> warm,
                                const PowerIterOptions& opts) {
  SpectralTriplet t = power_iteration(a, std::move(warm), opts);
  PowerIterOptions extended = opts;
  extended.max_iters_warm = std::max(20000, opts.max_iters);
  for (int pass = 0; pass < 3 && !t.converged; ++pass) {
    int prev_iters = t.iters;
    t = power_iteration(a, std::make_pair(t.u, t.v), extended);
    t.iters += prev_iters;
  }
  return t;
}

// Residual tolerance for sigma estimates that feed the retraction. A residual
// of tol implies a sigma error up to ~tol * sigma when the top of the
// spectrum clusters, and the retraction inherits that error directly, so this
// is held well below the looser tolerance used for direction estimates.
PowerIterOptions retraction_grade(const PowerIterOptions& base) {
  PowerIterOptions opts = base;
  opts.tol = std::min(base.tol, 1e-9);
  return opts;
}

// Post-step measurement, also refreshing the singular-vector cache.
void measure_and_cache(const Matrix& w, OptimizerState& state, const SsoConfig& cfg,
                       std::optional<std::pair<Vector, Vector>> warm, ModuleStepRecord* rec) {
  if (w.norm() == 0.0) {
    if (rec) rec->spectral_norm = 0.0;
    return;
  }
  SpectralTriplet t = converged_power(w, std::move(warm), cfg.power);
  state.cached_u = t.u;
  state.cached_v = t.v;
  if (rec) {
    rec->spectral_norm = t.sigma;
    rec->weight_frobenius = w.norm();
  }
}

Matrix spectral_step_core(const Matrix& w, const Matrix& g, OptimizerState& state,
                          const SsoConfig& cfg, const RadiusSpec& radius, bool solve,
                          ModuleStepRecord* rec) {
  ensure_momentum(state, w);
  if (g.rows() != w.rows() || g.cols() != w.cols())
    throw ShapeMismatchError("gradient shape does not match weight");
  const double r = radius.radius();

  Matrix dir = momentum_direction(g, state, cfg);
  const double dir_fn = dir.norm();

  SpectralTriplet t = converged_power(w, cache_of(state), retraction_grade(cfg.power));
  if (rec) {
    rec->pre_retraction_sigma = t.sigma;
    rec->power_iters = t.iters;
  }
  Matrix w_r = cfg.retraction == RetractionKind::Hard
                   ? retract_hard(w, t.sigma, r)
                   : retract_dynamic(w, t.sigma, r, cfg.dynamic_lambda_wd, cfg.eta);
  if (rec) {
    PowerIterOptions tight = retraction_grade(cfg.power);
    tight.max_iters_warm = tight.max_iters;
    rec->post_retraction_sigma =
        converged_power(w_r, std::make_pair(t.u, t.v), tight).sigma;
    rec->post_retraction_frobenius = w_r.norm();
  }

  if (dir_fn < 1e-14) {
    // Zero-gradient edge: nothing to descend along, retraction only.
    if (rec) rec->degenerate = true;
    state.step_count += 1;
    measure_and_cache(w_r, state, cfg, std::make_pair(t.u, t.v), rec);
    return w_r;
  }
  Matrix m_hat = dir / dir_fn;
  Matrix theta = tangent_projector(t);

  SolveReport rep;
  if (solve) rep = solve_lambda(m_hat, theta, cfg);

  Matrix phi;
  if (rep.degenerate && (m_hat + rep.lambda_star * theta).norm() < 1e-14) {
    // msign(0) = 0: the aligned case collapses the update entirely.
    phi = Matrix::Zero(w.rows(), w.cols());
  } else if (rep.lambda_star == 0.0) {
    phi = msign(m_hat, cfg.msign_iters, cfg.msign_schedule);
  } else {
    phi = msign(m_hat + rep.lambda_star * theta, cfg.msign_iters, cfg.msign_schedule);
  }

  Matrix w_next = w_r - (cfg.eta * r) * phi;
  state.step_count += 1;

  if (rec) {
    rec->lambda_star = rep.lambda_star;
    rec->solver_iters = rep.bracket_steps + rep.bisect_steps + 1;
    rec->degenerate = rep.degenerate || !rep.converged;
    rec->tangent_overlap = frob_inner(theta, phi);
    if (phi.norm() > 0.0)
      rec->update_spectral_norm = cfg.eta * r * power_iteration(phi, std::nullopt, cfg.power).sigma;
  }
  measure_and_cache(w_next, state, cfg, std::make_pair(t.u, t.v), rec);
  return w_next;
}

}  // namespace

double h_eval(const Matrix& m_hat, const Matrix& theta, double lambda, int msign_iters,
              MsignSchedule schedule) {
  if (m_hat.rows() != theta.rows() || m_hat.cols() != theta.cols())
    throw ShapeMismatchError("h_eval: shape mismatch");
  Matrix z = m_hat + lambda * theta;
  if (z.norm() < 1e-14) throw ZeroOperandError("h_eval: M_hat + lambda*Theta vanishes");
  return frob_inner(theta, msign(z, msign_iters, schedule));
}

SolveReport solve_lambda(const Matrix& m_hat, const Matrix& theta, const SsoConfig& cfg) {
  SolveReport rep;
  int evals = 0;
  bool hit_zero = false;
  auto h = [&](double lam) -> double {
    ++evals;
    try {
      return h_eval(m_hat, theta, lam, cfg.msign_iters, cfg.msign_schedule);
    } catch (const ZeroOperandError&) {
      hit_zero = true;
      return 0.0;
    }
  };

  const double h0 = h(0.0);
  if (hit_zero || std::abs(h0) <= cfg.solver_tol) {
    rep.residual = std::abs(h0);
    rep.degenerate = hit_zero;
    return rep;
  }

  // Frobenius-based upper bound on 2*||M_hat||_*.
  const double bound =
      2.0 * std::sqrt(static_cast<double>(std::min(m_hat.rows(), m_hat.cols()))) * m_hat.norm();
  const double sgn0 = h0 > 0 ? 1.0 : -1.0;
  const double dir = -sgn0;  // expand away from the sign of h(0)

  double inner = 0.0, inner_h = h0;  // endpoint with sign(h) == sign(h0)
  double outer = 0.0, outer_h = h0;
  double width = 0.1;
  bool bracketed = false;
  while (evals < cfg.solver_max_iters) {
    double lam = dir * std::min(width, bound);
    double hl = h(lam);
    rep.bracket_steps += 1;
    if (hit_zero) {
      rep.lambda_star = lam;
      rep.residual = 0.0;
      rep.degenerate = true;
      return rep;
    }
    if (std::abs(hl) <= cfg.solver_tol) {
      rep.lambda_star = lam;
      rep.residual = std::abs(hl);
      return rep;
    }
    if ((hl > 0) != (h0 > 0)) {
      outer = lam;
      outer_h = hl;
      bracketed = true;
      break;
    }
    inner = lam;
    inner_h = hl;
    if (std::min(width, bound) >= bound) break;  // bound reached, no sign change
    width *= 2.0;
  }
  if (!bracketed) {
    rep.lambda_star = std::abs(inner_h) <= std::abs(h0) ? inner : 0.0;
    rep.residual = std::min(std::abs(inner_h), std::abs(h0));
    rep.converged = false;
    return rep;
  }

  // Bisection. h may jump across zero without attaining it (msign
  // discontinuity); a collapsed interval reports the midpoint as degenerate.
  double best_lam = std::abs(inner_h) < std::abs(outer_h) ? inner : outer;
  double best_h = std::min(std::abs(inner_h), std::abs(outer_h));
  while (evals < cfg.solver_max_iters) {
    if (std::abs(outer - inner) < 1e-12) {
      rep.lambda_star = 0.5 * (inner + outer);
      rep.residual = best_h;
      rep.degenerate = true;
      return rep;
    }
    double mid = 0.5 * (inner + outer);
    double hm = h(mid);
    rep.bisect_steps += 1;
    if (hit_zero) {
      rep.lambda_star = mid;
      rep.residual = 0.0;
      rep.degenerate = true;
      return rep;
    }
    if (std::abs(hm) < best_h) {
      best_h = std::abs(hm);
      best_lam = mid;
    }
    if (std::abs(hm) <= cfg.solver_tol) {
      rep.lambda_star = mid;
      rep.residual = std::abs(hm);
      return rep;
    }
    if ((hm > 0) == (h0 > 0))
      inner = mid;
    else
      outer = mid;
  }
  rep.lambda_star = best_lam;
  rep.residual = best_h;
  rep.converged = false;
  return rep;
}

Matrix sso_step(const Matrix& w, const Matrix& g, OptimizerState& state, const SsoConfig& cfg,
                const RadiusSpec& radius, ModuleStepRecord* rec) {
  return spectral_step_core(w, g, state, cfg, radius, /*solve=*/true, rec);
}

Matrix muon_sphere_step(const Matrix& w, const Matrix& g, OptimizerState& state,
                        const SsoConfig& cfg, const RadiusSpec& radius, ModuleStepRecord* rec) {
  return spectral_step_core(w, g, state, cfg, radius, /*solve=*/false, rec);
}

Matrix muon_step(const Matrix& w, const Matrix& g, OptimizerState& state, const SsoConfig& cfg,
                 double r_lr, ModuleStepRecord* rec) {
  ensure_momentum(state, w);
  Matrix dir = momentum_direction(g, state, cfg);
  if (dir.norm() < 1e-14) throw ZeroMatrixError("muon_step: zero momentum");
  Matrix phi = msign(dir, cfg.msign_iters, cfg.msign_schedule);
  Matrix w_next = w * (1.0 - cfg.eta * cfg.weight_decay) - (cfg.eta * r_lr) * phi;
  state.step_count += 1;
  if (rec) {
    if (phi.norm() > 0.0)
      rec->update_spectral_norm = cfg.eta * r_lr * power_iteration(phi, std::nullopt, cfg.power).sigma;
  }
  measure_and_cache(w_next, state, cfg, cache_of(state), rec);
  return w_next;
}

Matrix adamw_step(const Matrix& w, const Matrix& g, OptimizerState& state, const SsoConfig& cfg,
                  ModuleStepRecord* rec) {
  if (state.exp_avg.size() == 0) {
    state.exp_avg = Matrix::Zero(w.rows(), w.cols());
    state.exp_avg_sq = Matrix::Zero(w.rows(), w.cols());
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  state.exp_avg = cfg.adam_beta1 * state.exp_avg + (1.0 - cfg.adam_beta1) * g;
  state.exp_avg_sq =
      cfg.adam_beta2 * state.exp_avg_sq.array().matrix() + (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, t);
  Matrix update =
      (state.exp_avg / bc1).array() / ((state.exp_avg_sq / bc2).array().sqrt() + cfg.adam_eps);
  Matrix w_next = w * (1.0 - cfg.eta * cfg.weight_decay) - cfg.eta * update;
  if (rec && update.norm() > 0.0)
    rec->update_spectral_norm = cfg.eta * power_iteration(update, std::nullopt, cfg.power).sigma;
  measure_and_cache(w_next, state, cfg, cache_of(state), rec);
  return w_next;
}

}  // namespace sso
