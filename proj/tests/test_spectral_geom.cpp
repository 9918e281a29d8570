// SPDX-License-Identifier: Apache-2.0
//
// Radius, learning-rate scalers, spectral initialization, tangent projector,
// and both retraction variants.

#include <doctest.h>

#include <cmath>

#include "sso/spectral_geom.hpp"
#include "sso/svd_oracle.hpp"
#include "test_util.hpp"

using namespace sso;
using test::randn;
using test::sigma_max;

TEST_CASE("radius and learning-rate scalers") {
  CHECK(RadiusSpec{2.0, 64, 16}.radius() == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(RadiusSpec{1.0, 16, 64}.radius() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS((RadiusSpec{0.0, 4, 4}.radius()), ConfigError);

  CHECK(lr_scaler(ScalerKind::SpectralMuP, 4096, 1024) == doctest::Approx(2.0));
  CHECK(lr_scaler(ScalerKind::AlignAdamRms, 4096, 1024) == doctest::Approx(12.8));
  CHECK(lr_scaler(ScalerKind::SpectralKaiming, 1024, 4096) == doctest::Approx(1.0));
  CHECK(lr_scaler(ScalerKind::SpectralKaiming, 4096, 1024) == doctest::Approx(2.0));
  CHECK(lr_scaler(ScalerKind::SpectralMuP, 512, 512) == doctest::Approx(1.0));
  CHECK_THROWS_AS(lr_scaler(ScalerKind::SpectralMuP, 0, 4), ConfigError);
}

TEST_CASE("gaussian draws are deterministic per seed") {
  Matrix a = gaussian_matrix(8, 12, 0.02, 42);
  Matrix b = gaussian_matrix(8, 12, 0.02, 42);
  Matrix c = gaussian_matrix(8, 12, 0.02, 43);
  CHECK((a - b).norm() == 0.0);
  CHECK((a - c).norm() != 0.0);
}

TEST_CASE("spectral init lands exactly on the sphere") {
  RadiusSpec r{1.0, 64, 16};
  Matrix w = spectral_init(64, 16, r, 0.02, 7);
  CHECK(std::abs(sigma_max(w) - r.radius()) < 1e-8);
  Matrix w2 = spectral_init(64, 16, r, 0.02, 7);
  CHECK((w - w2).norm() == 0.0);
}

TEST_CASE("Kaiming-style draw has spectral norm near 1 + sqrt(d_out/d_in)") {
  // N(0, 1/d_in) at 256 x 1024: expected top singular value 1.5.
  const int d_out = 256, d_in = 1024;
  double mean = 0.0;
  const int draws = 5;
  for (int i = 0; i < draws; ++i)
    mean += sigma_max(gaussian_matrix(d_out, d_in, 1.0 / std::sqrt(d_in), 60 + i));
  mean /= draws;
  CHECK(mean == doctest::Approx(1.5).epsilon(0.05));
}

TEST_CASE("tangent projector is the rank-1 singular pair outer product") {
  Matrix w = Matrix::Zero(3, 4);
  w(0, 1) = 5.0;  // top pair: u = e0, v = e1
  SpectralTriplet t = power_iteration(w);
  Matrix theta = tangent_projector(t);
  CHECK(theta(0, 1) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(theta.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(frob_inner(theta, w) == doctest::Approx(5.0).epsilon(1e-9));

  Matrix a = randn(24, 32, 91);
  SpectralTriplet ta = power_iteration(a, std::nullopt, {1000, 8, 1e-10});
  CHECK(frob_inner(tangent_projector(ta), a) ==
        doctest::Approx(svd_oracle(a).s[0]).epsilon(1e-6));
}

TEST_CASE("hard retraction rescales onto the sphere and is idempotent") {
  Matrix w = randn(16, 24, 33);
  const double sigma = sigma_max(w);
  const double r = 2.5;
  Matrix wr = retract_hard(w, sigma, r);
  CHECK(std::abs(sigma_max(wr) - r) < 1e-8);
  // Retracting an on-sphere matrix with its true sigma is a no-op.
  Matrix wr2 = retract_hard(wr, sigma_max(wr), r);
  CHECK((wr2 - wr).norm() < 1e-10 * wr.norm());
  // Frobenius norm stays below sqrt(min dim) * R.
  CHECK(wr.norm() <= std::sqrt(16.0) * r + 1e-9);
  CHECK_THROWS(retract_hard(w, 0.0, r));
}

TEST_CASE("dynamic retraction nudges sigma toward R and fixes the sphere") {
  const double r = 2.0, lwd = 0.1, eta = 0.05;
  Matrix w = randn(8, 8, 44);
  Matrix on_sphere = retract_hard(w, sigma_max(w), r);
  // sign(R - sigma) = 0 on the sphere: unchanged.
  CHECK((retract_dynamic(on_sphere, r, r, lwd, eta) - on_sphere).norm() == 0.0);

  // Off-sphere: one multiplicative nudge of the right sign.
  Matrix big = 2.0 * on_sphere;
  Matrix nudged = retract_dynamic(big, 2.0 * r, r, lwd, eta);
  CHECK((nudged - (1.0 - lwd * eta) * big).norm() == 0.0);

  // The scalar recurrence sigma <- (1 + lwd*eta*sign(R - sigma)) * sigma
  // converges from above into a band of relative width lwd*eta around R.
  double sigma = 4.0 * r;
  for (int i = 0; i < 500; ++i)
    sigma *= 1.0 + lwd * eta * (r > sigma ? 1.0 : (r < sigma ? -1.0 : 0.0));
  CHECK(std::abs(sigma - r) <= lwd * eta * r * 1.01);
}
