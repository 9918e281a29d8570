// SPDX-License-Identifier: Apache-2.0
#include "sso/models.hpp"

#include <cmath>

namespace sso {
namespace {

ActivationProbe probe_of(const Matrix& acts) {
  ActivationProbe p;
  if (acts.size() == 0) return p;
  const double sd = std::sqrt(static_cast<double>(acts.rows()));
  double acc = 0.0;
  for (Eigen::Index j = 0; j < acts.cols(); ++j) acc += acts.col(j).norm() / sd;
  p.rms = acc / static_cast<double>(acts.cols());
  p.absmax = acts.cwiseAbs().maxCoeff();
  return p;
}

// Column-wise gainless RMSNorm: y = x / rms(x). Returns normalized matrix and
// the per-column rms values.
Matrix rmsnorm_cols(const Matrix& x, Vector& rms_out) {
  const double sd = std::sqrt(static_cast<double>(x.rows()));
  Matrix y(x.rows(), x.cols());
  rms_out.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    double r = x.col(j).norm() / sd;
    r = std::max(r, 1e-12);
    rms_out[j] = r;
    y.col(j) = x.col(j) / r;
  }
  return y;
}

// Backprop through rmsnorm: dx = (dy - y * (y . dy) / d) / r.
Matrix rmsnorm_back(const Matrix& dy, const Matrix& y, const Vector& rms) {
  const double d = static_cast<double>(y.rows());
  Matrix dx(y.rows(), y.cols());
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    const double dot = y.col(j).dot(dy.col(j));
    dx.col(j) = (dy.col(j) - y.col(j) * (dot / d)) / rms[j];
  }
  return dx;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

double activation_rms(const Vector& x) {
  if (x.size() == 0) throw std::invalid_argument("activation_rms: empty vector");
  return x.norm() / std::sqrt(static_cast<double>(x.size()));
}

double rms_to_rms_gain(const Matrix& w) {
  const double sigma = power_iteration(w).sigma;
  return sigma * std::sqrt(static_cast<double>(w.cols()) / static_cast<double>(w.rows()));
}

ForwardBackward linear_forward_backward(const Registry& reg, const Batch& batch) {
  const Matrix& w = reg.find("linear.w").weight;
  const double b = static_cast<double>(batch.x.cols());
  Matrix yhat = w * batch.x;
  Matrix err = yhat - batch.y;
  ForwardBackward fb;
  fb.loss = err.squaredNorm() / (2.0 * b);
  fb.grads["linear.w"] = (err * batch.x.transpose()) / b;
  fb.probes["output"] = probe_of(yhat);
  return fb;
}

ForwardBackward mlp_forward_backward(const Registry& reg, const Batch& batch) {
  const Matrix& w1 = reg.find("mlp.fc1").weight;
  const Matrix& w2 = reg.find("mlp.fc2").weight;
  const double b = static_cast<double>(batch.x.cols());

  Matrix h_pre = w1 * batch.x;
  Matrix h = h_pre.cwiseMax(0.0);  // ReLU
  Matrix yhat = w2 * h;
  Matrix err = yhat - batch.y;

  ForwardBackward fb;
  fb.loss = err.squaredNorm() / (2.0 * b);
  fb.probes["ffn_hidden"] = probe_of(h_pre);  // pre-activation

  Matrix dy = err / b;
  fb.grads["mlp.fc2"] = dy * h.transpose();
  Matrix dh = w2.transpose() * dy;
  Matrix dh_pre = (h_pre.array() > 0.0).select(dh, Matrix::Zero(dh.rows(), dh.cols()));
  fb.grads["mlp.fc1"] = dh_pre * batch.x.transpose();
  return fb;
}

ForwardBackward transformer_forward_backward(const Registry& reg, const ArchConfig& arch,
                                             const Batch& batch) {
  const int d = arch.hidden_width;
  const int nh = arch.num_heads;
  const int dh = arch.head_dim;
  const bool lm = arch.vocab > 0;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  int bsz, seq_len;
  if (lm) {
    bsz = static_cast<int>(batch.tokens.size());
    seq_len = static_cast<int>(batch.tokens[0].size());
  } else {
    bsz = static_cast<int>(batch.x.cols());
    seq_len = 1;
  }
  const int n = bsz * seq_len;

  // Embed / project in.
  Matrix x0(d, n);
  const Matrix* embed = nullptr;
  if (lm) {
    embed = &reg.find("embed").weight;
    for (int b = 0; b < bsz; ++b)
      for (int t = 0; t < seq_len; ++t)
        x0.col(b * seq_len + t) = embed->row(batch.tokens[static_cast<size_t>(b)][static_cast<size_t>(t)]).transpose();
  } else {
    x0 = reg.find("in_proj").weight * batch.x;
  }

  Vector r0;
  Matrix a_in = rmsnorm_cols(x0, r0);

  // Per-head attention.
  std::vector<Matrix> q(static_cast<size_t>(nh)), k(static_cast<size_t>(nh)),
      v(static_cast<size_t>(nh));
  std::vector<std::vector<Matrix>> probs(static_cast<size_t>(nh));  // per head, per sequence
  Matrix concat(nh * dh, n);
  for (int h = 0; h < nh; ++h) {
    const std::string suffix = ".head" + std::to_string(h);
    q[h] = reg.find("block.attn.q" + suffix).weight * a_in;
    k[h] = reg.find("block.attn.k" + suffix).weight * a_in;
    v[h] = reg.find("block.attn.v" + suffix).weight * a_in;
    probs[h].resize(static_cast<size_t>(bsz));
    for (int b = 0; b < bsz; ++b) {
      Matrix p(seq_len, seq_len);
      for (int t = 0; t < seq_len; ++t) {
        double mx = -1e300;
        Vector score(seq_len);
        for (int tp = 0; tp <= t; ++tp) {
          score[tp] = q[h].col(b * seq_len + t).dot(k[h].col(b * seq_len + tp)) * inv_sqrt_dh;
          mx = std::max(mx, score[tp]);
        }
        double z = 0.0;
        for (int tp = 0; tp <= t; ++tp) z += std::exp(score[tp] - mx);
        for (int tp = 0; tp < seq_len; ++tp)
          p(t, tp) = tp <= t ? std::exp(score[tp] - mx) / z : 0.0;
        Vector o = Vector::Zero(dh);
        for (int tp = 0; tp <= t; ++tp) o += p(t, tp) * v[h].col(b * seq_len + tp);
        concat.block(h * dh, b * seq_len + t, dh, 1) = o;
      }
      probs[h][static_cast<size_t>(b)] = std::move(p);
    }
  }
  const Matrix& wo = reg.find("block.attn.o").weight;
  Matrix attn_out = wo * concat;
  Matrix x1 = x0 + attn_out;

  // SwiGLU FFN.
  Vector r1;
  Matrix f_in = rmsnorm_cols(x1, r1);
  const Matrix& wg = reg.find("block.ffn.gate").weight;
  const Matrix& wu = reg.find("block.ffn.up").weight;
  const Matrix& wd = reg.find("block.ffn.down").weight;
  Matrix g = wg * f_in;
  Matrix u = wu * f_in;
  Matrix sig = g.unaryExpr([](double z) { return sigmoid(z); });
  Matrix silu = g.cwiseProduct(sig);
  Matrix hf = silu.cwiseProduct(u);
  Matrix ffn_out = wd * hf;
  Matrix x2 = x1 + ffn_out;

  Vector r2;
  Matrix xf = rmsnorm_cols(x2, r2);
  const Matrix& whead = reg.find("head").weight;
  Matrix logits = whead * xf;

  ForwardBackward fb;
  fb.probes["attn_out"] = probe_of(attn_out);
  fb.probes["ffn_hidden"] = probe_of(hf);

  // Loss and dlogits.
  Matrix dlogits = Matrix::Zero(logits.rows(), logits.cols());
  if (lm) {
    const double np = static_cast<double>(bsz * (seq_len - 1));
    double loss = 0.0;
    for (int b = 0; b < bsz; ++b) {
      for (int t = 0; t + 1 < seq_len; ++t) {
        const int col = b * seq_len + t;
        const int target = batch.tokens[static_cast<size_t>(b)][static_cast<size_t>(t + 1)];
        Vector l = logits.col(col);
        const double mx = l.maxCoeff();
        Vector e = (l.array() - mx).exp();
        const double z = e.sum();
        loss += -(l[target] - mx - std::log(z));
        dlogits.col(col) = e / (z * np);
        dlogits(target, col) -= 1.0 / np;
      }
    }
    fb.loss = loss / np;
  } else {
    const double b = static_cast<double>(bsz);
    Matrix err = logits - batch.y;
    fb.loss = err.squaredNorm() / (2.0 * b);
    dlogits = err / b;
  }

  // Backward.
  fb.grads["head"] = dlogits * xf.transpose();
  Matrix dxf = whead.transpose() * dlogits;
  Matrix dx2 = rmsnorm_back(dxf, xf, r2);

  fb.grads["block.ffn.down"] = dx2 * hf.transpose();
  Matrix dhf = wd.transpose() * dx2;
  Matrix dsilu = dhf.cwiseProduct(u);
  Matrix du = dhf.cwiseProduct(silu);
  Matrix dsilu_dg =
      sig.array() * (1.0 + g.array() * (1.0 - sig.array()));  // d silu / d g
  Matrix dg = dsilu.cwiseProduct(dsilu_dg.matrix());
  fb.grads["block.ffn.gate"] = dg * f_in.transpose();
  fb.grads["block.ffn.up"] = du * f_in.transpose();
  Matrix df_in = wg.transpose() * dg + wu.transpose() * du;
  Matrix dx1 = dx2 + rmsnorm_back(df_in, f_in, r1);

  fb.grads["block.attn.o"] = dx1 * concat.transpose();
  Matrix dconcat = wo.transpose() * dx1;
  Matrix da_in = Matrix::Zero(d, n);
  for (int h = 0; h < nh; ++h) {
    Matrix dq = Matrix::Zero(dh, n), dk = Matrix::Zero(dh, n), dv = Matrix::Zero(dh, n);
    for (int b = 0; b < bsz; ++b) {
      const Matrix& p = probs[h][static_cast<size_t>(b)];
      for (int t = 0; t < seq_len; ++t) {
        const int col = b * seq_len + t;
        Vector dout = dconcat.block(h * dh, col, dh, 1);
        // dP(t, tp) = dout . v_tp ; softmax backward per row
        Vector dp = Vector::Zero(seq_len);
        for (int tp = 0; tp <= t; ++tp) dp[tp] = dout.dot(v[h].col(b * seq_len + tp));
        double dot = 0.0;
        for (int tp = 0; tp <= t; ++tp) dot += dp[tp] * p(t, tp);
        for (int tp = 0; tp <= t; ++tp) {
          const double ds = p(t, tp) * (dp[tp] - dot) * inv_sqrt_dh;
          dq.col(col) += ds * k[h].col(b * seq_len + tp);
          dk.col(b * seq_len + tp) += ds * q[h].col(col);
          dv.col(b * seq_len + tp) += p(t, tp) * dout;
        }
      }
    }
    const std::string suffix = ".head" + std::to_string(h);
    fb.grads["block.attn.q" + suffix] = dq * a_in.transpose();
    fb.grads["block.attn.k" + suffix] = dk * a_in.transpose();
    fb.grads["block.attn.v" + suffix] = dv * a_in.transpose();
    da_in += reg.find("block.attn.q" + suffix).weight.transpose() * dq +
             reg.find("block.attn.k" + suffix).weight.transpose() * dk +
             reg.find("block.attn.v" + suffix).weight.transpose() * dv;
  }
  Matrix dx0 = dx1 + rmsnorm_back(da_in, a_in, r0);

  if (lm) {
    Matrix dembed = Matrix::Zero(embed->rows(), embed->cols());
    for (int b = 0; b < bsz; ++b)
      for (int t = 0; t < seq_len; ++t)
        dembed.row(batch.tokens[static_cast<size_t>(b)][static_cast<size_t>(t)]) +=
            dx0.col(b * seq_len + t).transpose();
    fb.grads["embed"] = std::move(dembed);
  } else {
    fb.grads["in_proj"] = dx0 * batch.x.transpose();
  }
  return fb;
}

ForwardBackward model_forward_backward(const Registry& reg, const ArchConfig& arch,
                                       const Batch& batch) {
  if (arch.model == "linear") return linear_forward_backward(reg, batch);
  if (arch.model == "mlp") return mlp_forward_backward(reg, batch);
  if (arch.model == "transformer") return transformer_forward_backward(reg, arch, batch);
  throw ConfigError("unknown model " + arch.model);
}

}  // namespace sso
