// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "sso/matrix.hpp"
#include "sso/power_iteration.hpp"

namespace sso {

// Target spectral radius R = c * sqrt(d_out / d_in).
struct RadiusSpec {
  double c = 2.0;
  int d_out = 1;
  int d_in = 1;

  double radius() const;
};

enum class ScalerKind { SpectralMuP, AlignAdamRms, SpectralKaiming };

// Learning-rate scaler for a (d_out, d_in) module:
//   SpectralMuP     -> sqrt(d_out / d_in)
//   AlignAdamRms    -> 0.2 * sqrt(max(d_out, d_in))
//   SpectralKaiming -> sqrt(max(1, d_out / d_in))
double lr_scaler(ScalerKind kind, int d_out, int d_in);

// Seeded N(0, sigma^2) matrix draw.
Matrix gaussian_matrix(int d_out, int d_in, double sigma, std::uint64_t seed);

// Gaussian N(0, sigma_gauss^2) draw projected onto the spectral sphere of the
// given radius. Deterministic per seed; resamples (seed+1, ...) on a
// degenerate draw.
Matrix spectral_init(int d_out, int d_in, const RadiusSpec& radius, double sigma_gauss,
                     std::uint64_t seed);

// Rank-1 spectral-norm gradient u1 v1^T at the matrix the triplet came from.
Matrix tangent_projector(const SpectralTriplet& t);

// Exact projection back onto the sphere: W * (R / sigma).
Matrix retract_hard(const Matrix& w, double sigma, double r);

// Soft radial adjustment (1 + lambda_wd * eta * sign(R - sigma)) * W.
// sign(0) = 0, so an on-sphere W is returned unchanged.
Matrix retract_dynamic(const Matrix& w, double sigma, double r, double lambda_wd, double eta);

}  // namespace sso
