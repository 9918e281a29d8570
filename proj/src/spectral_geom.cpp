// SPDX-License-Identifier: Apache-2.0
#include "sso/spectral_geom.hpp"

#include <cmath>
#include <random>

namespace sso {

double RadiusSpec::radius() const {
  if (c <= 0 || d_out < 1 || d_in < 1) throw ConfigError("RadiusSpec: invalid fields");
  return c * std::sqrt(static_cast<double>(d_out) / static_cast<double>(d_in));
}

double lr_scaler(ScalerKind kind, int d_out, int d_in) {
  if (d_out < 1 || d_in < 1) throw ConfigError("lr_scaler: dims must be >= 1");
  const double dout = static_cast<double>(d_out), din = static_cast<double>(d_in);
  switch (kind) {
    case ScalerKind::SpectralMuP:
      return std::sqrt(dout / din);
    case ScalerKind::AlignAdamRms:
      return 0.2 * std::sqrt(std::max(dout, din));
    case ScalerKind::SpectralKaiming:
      return std::sqrt(std::max(1.0, dout / din));
  }
  throw ConfigError("lr_scaler: unknown kind");
}

Matrix gaussian_matrix(int d_out, int d_in, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, sigma);
  Matrix w(d_out, d_in);
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
  return w;
}

Matrix spectral_init(int d_out, int d_in, const RadiusSpec& radius, double sigma_gauss,
                     std::uint64_t seed) {
  if (sigma_gauss <= 0) throw ConfigError("spectral_init: sigma_gauss must be > 0");
  const double r = radius.radius();
  for (int attempt = 0; attempt < 16; ++attempt) {
    Matrix wk = gaussian_matrix(d_out, d_in, sigma_gauss, seed + static_cast<std::uint64_t>(attempt));
    // Tight estimate: the init should land on the sphere, not merely near it.
    PowerIterOptions opts;
    opts.max_iters = 5000;
    opts.tol = 1e-9;
    SpectralTriplet t;
    try {
      t = power_iteration(wk, std::nullopt, opts);
    } catch (const ZeroMatrixError&) {
      continue;  // degenerate draw, resample with incremented seed
    }
    if (t.sigma < 1e-12) continue;
    return Matrix(wk * (r / t.sigma));
  }
  throw ZeroMatrixError("spectral_init: repeated degenerate draws");
}

Matrix tangent_projector(const SpectralTriplet& t) {
  return t.u * t.v.transpose();
}

Matrix retract_hard(const Matrix& w, double sigma, double r) {
  if (sigma <= 0) throw std::invalid_argument("retract_hard: sigma must be > 0");
  return w * (r / sigma);
}

Matrix retract_dynamic(const Matrix& w, double sigma, double r, double lambda_wd, double eta) {
  const double s = (r > sigma) ? 1.0 : (r < sigma ? -1.0 : 0.0);
  return (1.0 + lambda_wd * eta * s) * w;
}

}  // namespace sso
