// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "sso/granularity.hpp"
#include "sso/matrix.hpp"

namespace sso {

struct ActivationProbe {
  double rms = 0.0;     // batch mean of per-sample RMS
  double absmax = 0.0;  // max |entry| over the batch
};

// One training batch. Regression tasks fill x/y (columns = samples); the
// char-LM task fills tokens as batch-many rows of seq_len token ids.
struct Batch {
  Matrix x;
  Matrix y;
  std::vector<std::vector<int>> tokens;
};

struct ForwardBackward {
  double loss = 0.0;
  std::map<std::string, Matrix> grads;
  std::map<std::string, ActivationProbe> probes;
};

// ||x||_2 / sqrt(dim).
double activation_rms(const Vector& x);

// ||W||_2 * sqrt(d_in / d_out), spectral norm via power iteration.
double rms_to_rms_gain(const Matrix& w);

// Loss + per-module gradients + activation probes for the architecture the
// registry was built for. Pure in the weights; no state is modified.
ForwardBackward linear_forward_backward(const Registry& reg, const Batch& batch);
ForwardBackward mlp_forward_backward(const Registry& reg, const Batch& batch);
ForwardBackward transformer_forward_backward(const Registry& reg, const ArchConfig& arch,
                                             const Batch& batch);

ForwardBackward model_forward_backward(const Registry& reg, const ArchConfig& arch,
                                       const Batch& batch);

}  // namespace sso
