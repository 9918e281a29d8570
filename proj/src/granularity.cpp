// SPDX-License-Identifier: Apache-2.0
#include "sso/granularity.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>

namespace sso {
namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_i64(std::ostream& out, std::int64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void write_matrix(std::ostream& out, const Matrix& m) {
  write_i64(out, m.rows());
  write_i64(out, m.cols());
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(m.size())));
}
void write_vector(std::ostream& out, const std::optional<Vector>& v) {
  write_i64(out, v ? v->size() : -1);
  if (v)
    out.write(reinterpret_cast<const char*>(v->data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(v->size())));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
std::int64_t read_i64(std::istream& in) {
  std::int64_t v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
double read_f64(std::istream& in) {
  double v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
std::string read_string(std::istream& in) {
  std::string s(read_u32(in), '\0');
  in.read(s.data(), static_cast<std::streamsize>(s.size()));
  return s;
}
Matrix read_matrix(std::istream& in) {
  const auto rows = read_i64(in);
  const auto cols = read_i64(in);
  Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(m.size())));
  return m;
}
std::optional<Vector> read_vector(std::istream& in) {
  const auto n = read_i64(in);
  if (n < 0) return std::nullopt;
  Vector v(n);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(n)));
  return v;
}

AtomicModule make_spectral(std::string name, Matrix w, const ArchConfig& arch,
                           OptimizerKind opt) {
  AtomicModule m;
  m.name = std::move(name);
  m.d_out = static_cast<int>(w.rows());
  m.d_in = static_cast<int>(w.cols());
  m.weight = std::move(w);
  m.radius = RadiusSpec{arch.radius_c, m.d_out, m.d_in};
  m.scaler = arch.scaler;
  m.optimizer_kind = opt;
  m.spectral = true;
  return m;
}

AtomicModule make_dense(std::string name, Matrix w, const ArchConfig& arch) {
  AtomicModule m;
  m.name = std::move(name);
  m.d_out = static_cast<int>(w.rows());
  m.d_in = static_cast<int>(w.cols());
  m.weight = std::move(w);
  m.radius = RadiusSpec{arch.radius_c, m.d_out, m.d_in};
  m.scaler = arch.scaler;
  m.optimizer_kind = OptimizerKind::AdamW;
  m.spectral = false;
  return m;
}

Matrix project_to_sphere(const Matrix& w, double r) {
  PowerIterOptions opts;
  opts.max_iters = 5000;
  opts.tol = 1e-9;
  SpectralTriplet t = power_iteration(w, std::nullopt, opts);
  return retract_hard(w, t.sigma, r);
}

}  // namespace

OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "sso") return OptimizerKind::Sso;
  if (s == "muon") return OptimizerKind::Muon;
  if (s == "muon_sphere") return OptimizerKind::MuonSphere;
  if (s == "adamw") return OptimizerKind::AdamW;
  throw ConfigError("unknown optimizer kind: " + s);
}

std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::Sso: return "sso";
    case OptimizerKind::Muon: return "muon";
    case OptimizerKind::MuonSphere: return "muon_sphere";
    case OptimizerKind::AdamW: return "adamw";
  }
  return "?";
}

std::vector<SplitPart> split_fused(const Matrix& fused, const SplitRule& rule,
                                   const std::string& base_name) {
  std::vector<SplitPart> parts;
  auto push = [&](std::string name, int row_begin, int rows) {
    SplitPart p;
    p.name = std::move(name);
    p.row_begin = row_begin;
    p.d_out = rows;
    p.d_in = static_cast<int>(fused.cols());
    p.weight = fused.middleRows(row_begin, rows);
    parts.push_back(std::move(p));
  };

  if (std::holds_alternative<NoSplit>(rule)) {
    push(base_name, 0, static_cast<int>(fused.rows()));
  } else if (std::holds_alternative<GateUpSeparate>(rule)) {
    if (fused.rows() % 2 != 0)
      throw ShapeMismatchError("split_fused: gate/up needs an even row count");
    const int half = static_cast<int>(fused.rows()) / 2;
    push(base_name + ".gate", 0, half);
    push(base_name + ".up", half, half);
  } else {
    const auto& qkv = std::get<QkvPerHead>(rule);
    if (qkv.num_heads < 1 || qkv.head_dim < 1)
      throw ShapeMismatchError("split_fused: invalid head layout");
    if (fused.rows() != static_cast<Eigen::Index>(3) * qkv.num_heads * qkv.head_dim)
      throw ShapeMismatchError("split_fused: fused rows != 3*num_heads*head_dim");
    const char* kinds[3] = {"q", "k", "v"};
    int row = 0;
    for (const char* kind : kinds) {
      for (int head = 0; head < qkv.num_heads; ++head) {
        push(base_name + "." + kind + ".head" + std::to_string(head), row, qkv.head_dim);
        row += qkv.head_dim;
      }
    }
  }
  return parts;
}

AtomicModule& Registry::find(const std::string& name) {
  for (auto& m : modules)
    if (m.name == name) return m;
  throw ConfigError("registry: no module named " + name);
}
const AtomicModule& Registry::find(const std::string& name) const {
  for (const auto& m : modules)
    if (m.name == name) return m;
  throw ConfigError("registry: no module named " + name);
}

Registry init_registry(const ArchConfig& arch, OptimizerKind hidden_optimizer,
                       std::uint64_t seed) {
  if (arch.input_dim < 1 || arch.hidden_width < 1 || arch.output_dim < 1)
    throw ConfigError("init_registry: dimensions must be >= 1");
  Registry reg;
  std::uint64_t s = seed;
  auto next_seed = [&s]() { return s++ * 0x9E3779B97F4A7C15ULL + 0x2545F4914F6CDD1DULL; };

  auto add_spectral = [&](std::string name, int d_out, int d_in) {
    RadiusSpec r{arch.radius_c, d_out, d_in};
    Matrix w = spectral_init(d_out, d_in, r, arch.init_sigma, next_seed());
    reg.modules.push_back(make_spectral(std::move(name), std::move(w), arch, hidden_optimizer));
  };
  auto add_dense = [&](std::string name, int d_out, int d_in) {
    Matrix w = gaussian_matrix(d_out, d_in, arch.init_sigma, next_seed());
    reg.modules.push_back(make_dense(std::move(name), std::move(w), arch));
  };

  if (arch.model == "linear") {
    add_spectral("linear.w", arch.output_dim, arch.input_dim);
  } else if (arch.model == "mlp") {
    add_spectral("mlp.fc1", arch.hidden_width, arch.input_dim);
    add_spectral("mlp.fc2", arch.output_dim, arch.hidden_width);
  } else if (arch.model == "transformer") {
    const int d = arch.hidden_width;
    if (arch.num_heads < 1 || arch.head_dim < 1)
      throw ConfigError("init_registry: transformer needs heads");
    if (arch.vocab > 0) {
      add_dense("embed", arch.vocab, d);
      add_dense("head", arch.vocab, d);
    } else {
      add_dense("in_proj", d, arch.input_dim);
      add_dense("head", arch.output_dim, d);
    }
    // Fused QKV drawn once, split per head, each block projected to its sphere.
    const int qkv_rows = 3 * arch.num_heads * arch.head_dim;
    Matrix fused_qkv = gaussian_matrix(qkv_rows, d, arch.init_sigma, next_seed());
    for (auto& part : split_fused(fused_qkv, QkvPerHead{arch.num_heads, arch.head_dim},
                                  "block.attn")) {
      RadiusSpec r{arch.radius_c, part.d_out, part.d_in};
      Matrix w = project_to_sphere(part.weight, r.radius());
      reg.modules.push_back(
          make_spectral(part.name, std::move(w), arch, hidden_optimizer));
    }
    add_spectral("block.attn.o", d, arch.num_heads * arch.head_dim);
    const int ffn = 2 * d;
    Matrix fused_gu = gaussian_matrix(2 * ffn, d, arch.init_sigma, next_seed());
    for (auto& part : split_fused(fused_gu, GateUpSeparate{}, "block.ffn")) {
      RadiusSpec r{arch.radius_c, part.d_out, part.d_in};
      Matrix w = project_to_sphere(part.weight, r.radius());
      reg.modules.push_back(
          make_spectral(part.name, std::move(w), arch, hidden_optimizer));
    }
    add_spectral("block.ffn.down", d, ffn);
  } else {
    throw ConfigError("init_registry: unknown model " + arch.model);
  }

  std::set<std::string> names;
  for (const auto& m : reg.modules)
    if (!names.insert(m.name).second) throw ConfigError("duplicate module name " + m.name);
  return reg;
}

void save_registry(const Registry& reg, std::ostream& out) {
  out.write("SSOREG1\n", 8);
  write_i64(out, static_cast<std::int64_t>(reg.modules.size()));
  for (const auto& m : reg.modules) {
    write_string(out, m.name);
    write_i64(out, m.d_out);
    write_i64(out, m.d_in);
    write_f64(out, m.radius.c);
    write_u32(out, static_cast<std::uint32_t>(m.scaler));
    write_u32(out, static_cast<std::uint32_t>(m.optimizer_kind));
    write_u32(out, m.spectral ? 1 : 0);
    write_matrix(out, m.weight);
    write_matrix(out, m.state.momentum);
    write_matrix(out, m.state.exp_avg);
    write_matrix(out, m.state.exp_avg_sq);
    write_vector(out, m.state.cached_u);
    write_vector(out, m.state.cached_v);
    write_i64(out, m.state.step_count);
  }
}

Registry load_registry(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (std::string(magic, 8) != "SSOREG1\n") throw ConfigError("load_registry: bad magic");
  Registry reg;
  const auto n = read_i64(in);
  for (std::int64_t i = 0; i < n; ++i) {
    AtomicModule m;
    m.name = read_string(in);
    m.d_out = static_cast<int>(read_i64(in));
    m.d_in = static_cast<int>(read_i64(in));
    m.radius = RadiusSpec{read_f64(in), m.d_out, m.d_in};
    m.scaler = static_cast<ScalerKind>(read_u32(in));
    m.optimizer_kind = static_cast<OptimizerKind>(read_u32(in));
    m.spectral = read_u32(in) != 0;
    m.weight = read_matrix(in);
    m.state.momentum = read_matrix(in);
    m.state.exp_avg = read_matrix(in);
    m.state.exp_avg_sq = read_matrix(in);
    m.state.cached_u = read_vector(in);
    m.state.cached_v = read_vector(in);
    m.state.step_count = read_i64(in);
    if (!in) throw ConfigError("load_registry: truncated stream");
    reg.modules.push_back(std::move(m));
  }
  return reg;
}

}  // namespace sso
