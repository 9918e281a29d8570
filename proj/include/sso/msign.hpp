// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sso/matrix.hpp"

namespace sso {

// Coefficient source for the Newton-Schulz style polar iteration.
enum class MsignSchedule {
  PolarExpress,   // tuned per-step quintic coefficients (default)
  NewtonSchulz,   // classical cubic 1.5*X - 0.5*X*X^T*X
};

// Approximate polar factor U_r V_r^T: all nonzero singular values mapped to 1.
// Input is pre-scaled internally by its Frobenius norm (an upper bound on the
// spectral norm), so the iteration always starts inside the contraction region.
Matrix msign(const Matrix& a, int iters = 8,
             MsignSchedule schedule = MsignSchedule::PolarExpress);

}  // namespace sso
