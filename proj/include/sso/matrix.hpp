// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace sso {

// Dense real matrix, row-major, 64-bit elements. The universal value type.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct ZeroMatrixError : std::runtime_error {
  explicit ZeroMatrixError(const std::string& what) : std::runtime_error(what) {}
};
struct TooLargeError : std::runtime_error {
  explicit TooLargeError(const std::string& what) : std::runtime_error(what) {}
};
struct ShapeMismatchError : std::runtime_error {
  explicit ShapeMismatchError(const std::string& what) : std::runtime_error(what) {}
};
struct ZeroOperandError : std::runtime_error {
  explicit ZeroOperandError(const std::string& what) : std::runtime_error(what) {}
};
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

inline double frobenius_norm(const Matrix& a) { return a.norm(); }

inline double frob_inner(const Matrix& a, const Matrix& b) {
  return a.cwiseProduct(b).sum();
}

inline bool all_finite(const Matrix& a) { return a.allFinite(); }

inline void require_finite(const Matrix& a, const char* ctx) {
  if (!all_finite(a)) throw std::invalid_argument(std::string(ctx) + ": non-finite entries");
}

}  // namespace sso
