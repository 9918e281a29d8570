// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sso/matrix.hpp"

namespace sso {

// Full SVD factors, desk-scale test oracle only.
struct SvdFactors {
  Matrix u;   // column-orthonormal, rows x min(rows, cols)
  Vector s;   // nonincreasing, nonnegative
  Matrix v;   // column-orthonormal, cols x min(rows, cols)
};

inline constexpr int kSvdOracleMaxDim = 256;

// One-sided Jacobi SVD (cyclic sweeps, i.e. implicit Jacobi on A^T A).
// O(n^3) per sweep; refuses matrices with min(rows, cols) > 256.
SvdFactors svd_oracle(const Matrix& a);

// Sum of singular values, via svd_oracle. Same size cap.
double nuclear_norm(const Matrix& a);

}  // namespace sso
