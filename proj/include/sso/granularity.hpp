// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "sso/matrix.hpp"
#include "sso/optimizer.hpp"
#include "sso/spectral_geom.hpp"

namespace sso {

enum class OptimizerKind { Sso, Muon, MuonSphere, AdamW };

OptimizerKind optimizer_kind_from_string(const std::string& s);
std::string to_string(OptimizerKind k);

// A named, independently optimized weight matrix.
struct AtomicModule {
  std::string name;  // dot-path, e.g. "layer0.attn.q.head3"
  int d_out = 0;
  int d_in = 0;
  Matrix weight;
  RadiusSpec radius;
  ScalerKind scaler = ScalerKind::SpectralMuP;
  OptimizerKind optimizer_kind = OptimizerKind::Sso;
  bool spectral = true;  // false: embedding/head style, AdamW-handled
  OptimizerState state;
};

// How to cut a fused tensor into atomic modules. Fused layouts are
// row-stacked: [Q-heads; K-heads; V-heads] and [gate; up].
struct QkvPerHead {
  int num_heads = 0;
  int head_dim = 0;
};
struct GateUpSeparate {};
struct NoSplit {};
using SplitRule = std::variant<QkvPerHead, GateUpSeparate, NoSplit>;

// A contiguous row block of a fused tensor.
struct SplitPart {
  std::string name;
  int row_begin = 0;
  int d_out = 0;
  int d_in = 0;
  Matrix weight;
};

// Splits a fused matrix into row blocks; concatenating the blocks in order
// reconstructs the input exactly.
std::vector<SplitPart> split_fused(const Matrix& fused, const SplitRule& rule,
                                   const std::string& base_name = "fused");

struct ArchConfig {
  std::string model = "mlp";  // "linear" | "mlp" | "transformer"
  int input_dim = 16;
  int hidden_width = 64;
  int output_dim = 16;
  int num_heads = 2;
  int head_dim = 16;
  int vocab = 0;  // transformer LM only; 0 = regression transformer
  double radius_c = 2.0;
  double init_sigma = 0.02;
  ScalerKind scaler = ScalerKind::SpectralMuP;
  double embed_weight_decay = 0.1;  // config switch, 0 disables
};

struct Registry {
  std::vector<AtomicModule> modules;

  AtomicModule& find(const std::string& name);
  const AtomicModule& find(const std::string& name) const;
};

// Builds the parameter registry for an architecture: every hidden 2-D module
// spectrally initialized on its own sphere, embedding/head flagged
// non-spectral (AdamW-handled).
Registry init_registry(const ArchConfig& arch, OptimizerKind hidden_optimizer,
                       std::uint64_t seed);

// Bit-exact binary round trip of weights and names.
void save_registry(const Registry& reg, std::ostream& out);
Registry load_registry(std::istream& in);

}  // namespace sso
