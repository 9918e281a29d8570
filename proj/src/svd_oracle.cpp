// SPDX-License-Identifier: Apache-2.0
#include "sso/svd_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace sso {
namespace {

// One-sided Jacobi on B (m x n, m >= n): orthogonalizes the columns of B by
// plane rotations, accumulating them into V. Afterwards B = U * diag(s).
void jacobi_sweeps(Matrix& b, Matrix& v) {
  const Eigen::Index n = b.cols();
  const double tol = 1e-14;
  const int max_sweeps = 60;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double alpha = b.col(p).squaredNorm();
        const double beta = b.col(q).squaredNorm();
        const double gamma = b.col(p).dot(b.col(q));
        if (std::abs(gamma) <= tol * std::sqrt(alpha * beta) || gamma == 0.0) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        Vector bp = b.col(p);
        b.col(p) = c * bp - s * b.col(q);
        b.col(q) = s * bp + c * b.col(q);
        Vector vp = v.col(p);
        v.col(p) = c * vp - s * v.col(q);
        v.col(q) = s * vp + c * v.col(q);
      }
    }
    if (!rotated) break;
  }
}

// Orthonormal replacement for a numerically null column of U.
void complete_column(Matrix& u, Eigen::Index j) {
  const Eigen::Index m = u.rows();
  for (Eigen::Index cand = 0; cand < m; ++cand) {
    Vector e = Vector::Zero(m);
    e[cand] = 1.0;
    for (Eigen::Index k = 0; k < u.cols(); ++k) {
      if (k == j) continue;
      e -= u.col(k).dot(e) * u.col(k);
    }
    const double nrm = e.norm();
    if (nrm > 1e-6) {
      u.col(j) = e / nrm;
      return;
    }
  }
}

}  // namespace

SvdFactors svd_oracle(const Matrix& a) {
  require_finite(a, "svd_oracle");
  const Eigen::Index m = a.rows(), n = a.cols();
  if (std::min(m, n) > kSvdOracleMaxDim)
    throw TooLargeError("svd_oracle: min(rows, cols) exceeds 256");

  const bool transposed = m < n;
  Matrix b = transposed ? Matrix(a.transpose()) : a;
  const Eigen::Index k = b.cols();
  Matrix v = Matrix::Identity(k, k);
  jacobi_sweeps(b, v);

  Vector s(k);
  Matrix u(b.rows(), k);
  for (Eigen::Index j = 0; j < k; ++j) {
    s[j] = b.col(j).norm();
    if (s[j] > 0.0)
      u.col(j) = b.col(j) / s[j];
    else
      u.col(j).setZero();
  }

  // Sort nonincreasing.
  std::vector<Eigen::Index> order(static_cast<size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return s[i] > s[j]; });
  SvdFactors f;
  f.s.resize(k);
  f.u.resize(b.rows(), k);
  f.v.resize(k, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    f.s[j] = s[order[static_cast<size_t>(j)]];
    f.u.col(j) = u.col(order[static_cast<size_t>(j)]);
    f.v.col(j) = v.col(order[static_cast<size_t>(j)]);
  }
  for (Eigen::Index j = 0; j < k; ++j)
    if (f.s[j] == 0.0) complete_column(f.u, j);

  if (transposed) std::swap(f.u, f.v);
  return f;
}

double nuclear_norm(const Matrix& a) { return svd_oracle(a).s.sum(); }

}  // namespace sso
