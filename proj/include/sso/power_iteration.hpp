// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <utility>

#include "sso/matrix.hpp"

namespace sso {

// Top singular value sigma and unit vectors (u, v) of a matrix.
struct SpectralTriplet {
  double sigma = 0.0;
  Vector u;  // length rows, unit l2 norm
  Vector v;  // length cols, unit l2 norm
  bool converged = true;
  int iters = 0;
};

struct PowerIterOptions {
  int max_iters = 50;        // cold-start default
  int max_iters_warm = 8;    // warm-start default
  double tol = 1e-6;         // relative residual ||Av - sigma u|| / sigma
};

// Power iteration for the top singular triplet. A warm start (u, v) from a
// previous, slightly perturbed matrix cuts the iteration count. Sign
// convention: first nonzero component of u is nonnegative, v carries the flip.
SpectralTriplet power_iteration(const Matrix& a,
                                std::optional<std::pair<Vector, Vector>> warm_start = std::nullopt,
                                const PowerIterOptions& opts = {});

}  // namespace sso
