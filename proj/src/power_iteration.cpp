// SPDX-License-Identifier: Apache-2.0
#include "sso/power_iteration.hpp"

#include <cmath>

namespace sso {
namespace {

// Deterministic start vector with generic overlap against the top singular
// subspace: column norms of A, nudged so it is never exactly orthogonal.
Vector cold_start_v(const Matrix& a) {
  Vector v = a.colwise().norm().transpose();
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += 1e-3 * (1.0 + static_cast<double>(i % 7));
  v.normalize();
  return v;
}

void fix_sign(Vector& u, Vector& v) {
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (std::abs(u[i]) > 1e-12) {
      if (u[i] < 0) {
        u = -u;
        v = -v;
      }
      return;
    }
  }
}

}  // namespace

SpectralTriplet power_iteration(const Matrix& a,
                                std::optional<std::pair<Vector, Vector>> warm_start,
                                const PowerIterOptions& opts) {
  require_finite(a, "power_iteration");
  if (a.norm() == 0.0) throw ZeroMatrixError("power_iteration: zero matrix");
  if (warm_start) {
    if (warm_start->first.size() != a.rows() || warm_start->second.size() != a.cols())
      throw ShapeMismatchError("power_iteration: warm-start vector lengths do not match");
  }

  Vector v = warm_start ? warm_start->second.normalized() : cold_start_v(a);
  Vector u(a.rows());
  double sigma = 0.0;
  const int max_iters = warm_start ? opts.max_iters_warm : opts.max_iters;

  SpectralTriplet out;
  out.converged = false;
  for (int it = 1; it <= max_iters; ++it) {
    u.noalias() = a * v;
    double un = u.norm();
    if (un == 0.0) {
      // v landed exactly in the null space; restart deterministically
      v = cold_start_v(a);
      continue;
    }
    u /= un;
    Vector w = a.transpose() * u;
    sigma = w.norm();
    v = w / sigma;
    out.iters = it;
    double resid = (a * v - sigma * u).norm();
    if (resid <= opts.tol * sigma) {
      out.converged = true;
      break;
    }
  }
  fix_sign(u, v);
  out.sigma = sigma;
  out.u = std::move(u);
  out.v = std::move(v);
  return out;
}

}  // namespace sso
