// SPDX-License-Identifier: Apache-2.0
//
// Fused-tensor splitting, registry construction, module independence, and the
// binary registry round trip.

#include <doctest.h>

#include <cmath>
#include <sstream>

#include "sso/granularity.hpp"
#include "test_util.hpp"

using namespace sso;
using test::randn;
using test::sigma_max;

TEST_CASE("qkv fused tensor splits into per-head row blocks") {
  const int heads = 8, head_dim = 64, d = 512;
  Matrix fused = randn(3 * heads * head_dim, d, 5, 0.02);
  auto parts = split_fused(fused, QkvPerHead{heads, head_dim}, "layer.attn");
  REQUIRE(parts.size() == 24);
  CHECK(parts[0].name == "layer.attn.q.head0");
  CHECK(parts[7].name == "layer.attn.q.head7");
  CHECK(parts[8].name == "layer.attn.k.head0");
  CHECK(parts[16].name == "layer.attn.v.head0");
  for (const auto& p : parts) {
    CHECK(p.d_out == head_dim);
    CHECK(p.d_in == d);
  }
  // Bit-exact reconstruction by row concatenation.
  Matrix recon(fused.rows(), fused.cols());
  for (const auto& p : parts) recon.middleRows(p.row_begin, p.d_out) = p.weight;
  CHECK((recon - fused).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(split_fused(randn(100, 8, 6), QkvPerHead{8, 64}), ShapeMismatchError);
}

TEST_CASE("gate/up and no-split rules") {
  Matrix fused = randn(128, 32, 7);
  auto parts = split_fused(fused, GateUpSeparate{}, "ffn");
  REQUIRE(parts.size() == 2);
  CHECK(parts[0].name == "ffn.gate");
  CHECK(parts[1].name == "ffn.up");
  CHECK(parts[0].d_out == 64);
  CHECK((parts[0].weight - fused.topRows(64)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((parts[1].weight - fused.bottomRows(64)).cwiseAbs().maxCoeff() == 0.0);

  auto whole = split_fused(fused, NoSplit{}, "w");
  REQUIRE(whole.size() == 1);
  CHECK((whole[0].weight - fused).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(split_fused(randn(5, 3, 8), GateUpSeparate{}), ShapeMismatchError);
}

TEST_CASE("mlp registry: spheres with the documented radii") {
  ArchConfig arch;
  arch.model = "mlp";
  arch.input_dim = 256;
  arch.hidden_width = 1024;
  arch.output_dim = 256;
  arch.radius_c = 1.0;
  Registry reg = init_registry(arch, OptimizerKind::Sso, 1);
  REQUIRE(reg.modules.size() == 2);
  // R = sqrt(1024/256) = 2 for fc1, sqrt(256/1024) = 0.5 for fc2.
  CHECK(reg.find("mlp.fc1").radius.radius() == doctest::Approx(2.0));
  CHECK(reg.find("mlp.fc2").radius.radius() == doctest::Approx(0.5));
  CHECK(std::abs(sigma_max(reg.find("mlp.fc1").weight) - 2.0) < 1e-6);
  CHECK(std::abs(sigma_max(reg.find("mlp.fc2").weight) - 0.5) < 1e-6);
  CHECK(reg.find("mlp.fc1").spectral);
}

TEST_CASE("transformer registry: atomic per-head modules on their spheres") {
  ArchConfig arch;
  arch.model = "transformer";
  arch.hidden_width = 32;
  arch.num_heads = 2;
  arch.head_dim = 16;
  arch.vocab = 50;
  arch.radius_c = 1.0;
  Registry reg = init_registry(arch, OptimizerKind::Sso, 9);

  // embed + head + 6 attention heads (q/k/v x 2) + o + gate + up + down.
  CHECK(reg.modules.size() == 2 + 6 + 1 + 3);
  CHECK(!reg.find("embed").spectral);
  CHECK(reg.find("embed").optimizer_kind == OptimizerKind::AdamW);
  CHECK(!reg.find("head").spectral);

  const AtomicModule& q0 = reg.find("block.attn.q.head0");
  CHECK(q0.d_out == 16);
  CHECK(q0.d_in == 32);
  CHECK(std::abs(sigma_max(q0.weight) - q0.radius.radius()) < 1e-6);
  const AtomicModule& gate = reg.find("block.ffn.gate");
  CHECK(gate.d_out == 64);  // FFN inner = 2 * width
  CHECK(std::abs(sigma_max(gate.weight) - gate.radius.radius()) < 1e-6);

  CHECK_THROWS_AS(reg.find("no.such.module"), ConfigError);
  ArchConfig bad = arch;
  bad.model = "resnet";
  CHECK_THROWS_AS(init_registry(bad, OptimizerKind::Sso, 9), ConfigError);
}

TEST_CASE("stepping one module never touches another module's bytes") {
  ArchConfig arch;
  arch.model = "mlp";
  arch.radius_c = 1.0;
  Registry reg = init_registry(arch, OptimizerKind::Sso, 11);
  Matrix other_before = reg.find("mlp.fc2").weight;

  AtomicModule& fc1 = reg.find("mlp.fc1");
  SsoConfig cfg;
  cfg.eta = 0.1;
  Matrix g = randn(fc1.d_out, fc1.d_in, 12, 0.1);
  fc1.weight = sso_step(fc1.weight, g, fc1.state, cfg, fc1.radius);

  const AtomicModule& fc2 = reg.find("mlp.fc2");
  CHECK((fc2.weight - other_before).cwiseAbs().maxCoeff() == 0.0);
  CHECK(fc2.state.momentum.size() == 0);
  CHECK(fc2.state.step_count == 0);
}

TEST_CASE("registry serialization round-trips bit-exactly") {
  ArchConfig arch;
  arch.model = "transformer";
  arch.hidden_width = 16;
  arch.num_heads = 2;
  arch.head_dim = 8;
  arch.vocab = 30;
  Registry reg = init_registry(arch, OptimizerKind::MuonSphere, 13);
  // Populate optimizer state on one module so it is exercised too.
  AtomicModule& m = reg.find("block.ffn.down");
  SsoConfig cfg;
  m.weight = muon_sphere_step(m.weight, randn(m.d_out, m.d_in, 14, 0.1), m.state, cfg, m.radius);

  std::stringstream buf;
  save_registry(reg, buf);
  Registry back = load_registry(buf);
  REQUIRE(back.modules.size() == reg.modules.size());
  for (size_t i = 0; i < reg.modules.size(); ++i) {
    const AtomicModule& a = reg.modules[i];
    const AtomicModule& b = back.modules[i];
    CHECK(a.name == b.name);
    CHECK(a.d_out == b.d_out);
    CHECK(a.d_in == b.d_in);
    CHECK(a.spectral == b.spectral);
    CHECK(a.optimizer_kind == b.optimizer_kind);
    CHECK((a.weight - b.weight).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.state.step_count == b.state.step_count);
    CHECK(a.state.cached_u.has_value() == b.state.cached_u.has_value());
    if (a.state.momentum.size() > 0)
      CHECK((a.state.momentum - b.state.momentum).cwiseAbs().maxCoeff() == 0.0);
  }

  std::stringstream junk("not a registry stream");
  CHECK_THROWS_AS(load_registry(junk), ConfigError);
}
