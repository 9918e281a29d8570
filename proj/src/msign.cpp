// SPDX-License-Identifier: Apache-2.0
#include "sso/msign.hpp"

#include <array>

namespace sso {
namespace {

struct Quintic {
  double a, b, c;
};

// Polar Express schedule (Amsel et al.): per-step optimal odd quintics.
// Steps past the table reuse the final Newton-Schulz fixed-point polynomial.
constexpr std::array<Quintic, 8> kPolarExpress = {{
    {8.28721201814563, -23.595886519098837, 17.300387312530933},
    {4.107059111542203, -2.9478499167379106, 0.5448431082926601},
    {3.9486908534822946, -2.908902115962949, 0.5518191394370137},
    {3.3184196573706015, -2.488488024314874, 0.51004894012372},
    {2.300652019954817, -1.6689039845747493, 0.4188073119525673},
    {1.891301407787398, -1.2679958271945868, 0.37680408948524835},
    {1.8750014808534479, -1.2500016453999487, 0.3750001645474248},
    {1.875, -1.25, 0.375},
}};

constexpr Quintic kNewtonSchulz{1.5, -0.5, 0.0};

}  // namespace

Matrix msign(const Matrix& a, int iters, MsignSchedule schedule) {
  require_finite(a, "msign");
  const double fn = a.norm();
  if (fn == 0.0) throw ZeroMatrixError("msign: zero matrix");

  // Work on the thin side so the Gram matrix is min(m,n) x min(m,n).
  const bool transposed = a.rows() < a.cols();
  Matrix x = transposed ? Matrix(a.transpose() / fn) : Matrix(a / fn);

  for (int k = 0; k < iters; ++k) {
    Quintic q = kNewtonSchulz;
    if (schedule == MsignSchedule::PolarExpress)
      q = kPolarExpress[static_cast<size_t>(k) < kPolarExpress.size() ? k
                                                                      : kPolarExpress.size() - 1];
    Matrix g = x.transpose() * x;  // n x n, n = min(m,n)
    if (q.c == 0.0) {
      x = q.a * x + q.b * (x * g);
    } else {
      Matrix g2 = g * g;
      x = q.a * x + x * (q.b * g + q.c * g2);
    }
  }
  return transposed ? Matrix(x.transpose()) : x;
}

}  // namespace sso
