// src/transducer_model.cc

// Copyright 2026  The ftsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "ftsim/transducer_model.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ftsim/rng.h"

namespace ftsim {

namespace {

// Raw pointers into the packed groups. P is `const double` for the
// parameters and `double` for gradients.
template <typename P>
struct WeightViews {
  P *enc_in, *wq, *wk, *wv, *wo, *enc_out, *emb, *w_ih, *w_hh, *w_out, *joiner;
  P *b_in, *b_q, *b_v, *b_o, *b_enc_out, *b_rnn, *b_pred_out, *b_joiner;
};

template <typename P, typename Set>
WeightViews<P> MakeViews(const ModelConfig &c, Set &params) {
  const std::size_t D = c.hidden_dim, J = c.joint_dim;
  auto data = [&](const char *name) -> P * {
    return params.Group(name).values.data();
  };
  WeightViews<P> w;
  w.enc_in = data("enc_in");
  w.wq = data("attn_q");
  w.wk = data("attn_k");
  w.wv = data("attn_v");
  w.wo = data("attn_o");
  w.enc_out = data("enc_out");
  w.emb = data("pred_emb");
  w.w_ih = data("pred_rnn");
  w.w_hh = w.w_ih + D * D;
  w.w_out = w.w_hh + D * D;
  w.joiner = data("joiner");
  P *b = data("bias_all");
  w.b_in = b;
  w.b_q = b + D;
  w.b_v = b + 2 * D;
  w.b_o = b + 3 * D;
  w.b_enc_out = b + 4 * D;
  w.b_rnn = b + 4 * D + J;
  w.b_pred_out = b + 5 * D + J;
  w.b_joiner = b + 5 * D + 2 * J;
  return w;
}

// y = W x + b  (W is rows x cols, row-major; b may be null)
void Affine(const double *W, const double *b, const double *x, int rows,
            int cols, double *y) {
  for (int r = 0; r < rows; ++r) {
    double acc = b != nullptr ? b[r] : 0.0;
    const double *row = W + std::size_t(r) * cols;
    for (int c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

// dx += W^T dy
void AddTransposed(const double *W, const double *dy, int rows, int cols,
                   double *dx) {
  for (int r = 0; r < rows; ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    const double *row = W + std::size_t(r) * cols;
    for (int c = 0; c < cols; ++c) dx[c] += row[c] * g;
  }
}

// dW += dy x^T
void AddOuter(const double *dy, const double *x, int rows, int cols, double *dW) {
  for (int r = 0; r < rows; ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    double *row = dW + std::size_t(r) * cols;
    for (int c = 0; c < cols; ++c) row[c] += g * x[c];
  }
}

void AddTo(const double *src, int n, double *dst) {
  for (int i = 0; i < n; ++i) dst[i] += src[i];
}

void CheckInputs(const ModelConfig &config, const ParameterSet &params,
                 const Features &features, std::span<const int> targets) {
  config.Validate();
  if (features.frames < 1)
    throw std::invalid_argument("model: features need at least one frame");
  if (features.dim != config.feat_dim)
    throw std::invalid_argument("model: feature dim " +
                                std::to_string(features.dim) + " != config " +
                                std::to_string(config.feat_dim));
  if (features.values.size() != std::size_t(features.frames) * features.dim)
    throw std::invalid_argument("model: feature buffer size mismatch");
  for (int y : targets)
    if (y < 0 || y >= config.vocab || y == config.blank_id)
      throw std::invalid_argument("model: target token out of range or blank");
  const ParameterSet layout = MakeParameterLayout(config);
  if (!layout.SameStructure(params))
    throw std::invalid_argument(
        "model: parameters do not match config at group '" +
        layout.FirstMismatch(params) + "'");
}

// Encoder forward; fills the encoder part of the cache.
void EncoderForward(const ModelConfig &c, const WeightViews<const double> &w,
                    const Features &x, ActivationCache &cache) {
  const int T = x.frames, D = c.hidden_dim, J = c.joint_dim, F = c.feat_dim;
  cache.enc_proj.assign(std::size_t(T) * D, 0.0);
  cache.query.assign(std::size_t(T) * D, 0.0);
  cache.key.assign(std::size_t(T) * D, 0.0);
  cache.value.assign(std::size_t(T) * D, 0.0);
  cache.attention.assign(std::size_t(T) * T, 0.0);
  cache.context.assign(std::size_t(T) * D, 0.0);
  cache.residual.assign(std::size_t(T) * D, 0.0);
  cache.enc_out.assign(std::size_t(T) * J, 0.0);

  for (int t = 0; t < T; ++t) {
    double *a = &cache.enc_proj[std::size_t(t) * D];
    Affine(w.enc_in, w.b_in, x.Row(t).data(), D, F, a);
    Affine(w.wq, w.b_q, a, D, D, &cache.query[std::size_t(t) * D]);
    Affine(w.wk, nullptr, a, D, D, &cache.key[std::size_t(t) * D]);
    Affine(w.wv, w.b_v, a, D, D, &cache.value[std::size_t(t) * D]);
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(D));
  for (int t = 0; t < T; ++t) {
    double *att = &cache.attention[std::size_t(t) * T];
    const double *q = &cache.query[std::size_t(t) * D];
    for (int s = 0; s < T; ++s) {
      const double *k = &cache.key[std::size_t(s) * D];
      double dot = 0.0;
      for (int d = 0; d < D; ++d) dot += q[d] * k[d];
      att[s] = dot * scale;
    }
    LogSoftmaxInPlace({att, std::size_t(T)});
    for (int s = 0; s < T; ++s) att[s] = std::exp(att[s]);

    double *ctx = &cache.context[std::size_t(t) * D];
    for (int s = 0; s < T; ++s) {
      const double *v = &cache.value[std::size_t(s) * D];
      for (int d = 0; d < D; ++d) ctx[d] += att[s] * v[d];
    }
    double *z = &cache.residual[std::size_t(t) * D];
    Affine(w.wo, w.b_o, ctx, D, D, z);
    AddTo(&cache.enc_proj[std::size_t(t) * D], D, z);
    double *h = &cache.enc_out[std::size_t(t) * J];
    Affine(w.enc_out, w.b_enc_out, z, J, D, h);
    for (int j = 0; j < J; ++j) h[j] = std::tanh(h[j]);
  }
}

void PredictorForwardStep(const ModelConfig &c, const WeightViews<const double> &w,
                          const double *prev_s, int token, double *s, double *g) {
  const int D = c.hidden_dim, J = c.joint_dim;
  const double *e = w.emb + std::size_t(token) * D;
  Affine(w.w_ih, w.b_rnn, e, D, D, s);
  if (prev_s != nullptr) {
    for (int r = 0; r < D; ++r) {
      const double *row = w.w_hh + std::size_t(r) * D;
      double acc = 0.0;
      for (int k = 0; k < D; ++k) acc += row[k] * prev_s[k];
      s[r] += acc;
    }
  }
  for (int d = 0; d < D; ++d) s[d] = std::tanh(s[d]);
  Affine(w.w_out, w.b_pred_out, s, J, D, g);
  for (int j = 0; j < J; ++j) g[j] = std::tanh(g[j]);
}

void JointForward(const ModelConfig &c, const WeightViews<const double> &w,
                  const double *h, const double *g, double *act, double *logits) {
  const int J = c.joint_dim;
  for (int j = 0; j < J; ++j) act[j] = std::max(0.0, h[j] + g[j]);
  Affine(w.joiner, w.b_joiner, act, c.vocab, J, logits);
}

}  // namespace

void ModelConfig::Validate() const {
  if (feat_dim < 1 || hidden_dim < 1 || joint_dim < 1)
    throw std::invalid_argument("model config: dimensions must be >= 1");
  if (vocab < 2) throw std::invalid_argument("model config: vocab must be >= 2");
  if (blank_id < 0 || blank_id >= vocab)
    throw std::invalid_argument("model config: blank_id out of range");
}

ParameterSet MakeParameterLayout(const ModelConfig &config) {
  config.Validate();
  const std::size_t D = config.hidden_dim, F = config.feat_dim,
                    J = config.joint_dim, V = config.vocab;
  ParameterSet p;
  p.AddGroup("enc_in", {D, F});
  p.AddGroup("attn_q", {D, D});
  p.AddGroup("attn_k", {D, D});
  p.AddGroup("attn_v", {D, D});
  p.AddGroup("attn_o", {D, D});
  p.AddGroup("enc_out", {J, D});
  p.AddGroup("pred_emb", {V, D});
  p.AddGroup("pred_rnn", {2 * D + J, D});
  p.AddGroup("joiner", {V, J});
  p.AddGroup("bias_all", {5 * D + 2 * J + V});
  return p;
}

ParameterSet InitParams(const ModelConfig &config) {
  ParameterSet p = MakeParameterLayout(config);
  for (auto &g : p.Groups()) {
    if (g.name == "bias_all") continue;
    // Embedding rows are looked up, not summed over, so they get unit scale.
    const double fan_in = g.name == "pred_emb" ? 1.0 : double(g.shape[1]);
    const double bound = 1.0 / std::sqrt(fan_in);
    Rng rng(MixSeed(config.seed, HashName(g.name)));
    for (double &v : g.values) v = rng.Uniform(-bound, bound);
  }
  return p;
}

EncoderOutput Encode(const ModelConfig &config, const ParameterSet &params,
                     const Features &features) {
  CheckInputs(config, params, features, {});
  const auto w = MakeViews<const double>(config, params);
  ActivationCache cache;
  EncoderForward(config, w, features, cache);
  return {features.frames, std::move(cache.enc_out)};
}

PredictorState PredictorStart(const ModelConfig &config,
                              const ParameterSet &params) {
  const auto w = MakeViews<const double>(config, params);
  PredictorState st{std::vector<double>(config.hidden_dim),
                    std::vector<double>(config.joint_dim)};
  PredictorForwardStep(config, w, nullptr, config.blank_id, st.s.data(),
                       st.g.data());
  return st;
}

PredictorState PredictorStep(const ModelConfig &config,
                             const ParameterSet &params,
                             const PredictorState &prev, int token) {
  if (token < 0 || token >= config.vocab || token == config.blank_id)
    throw std::invalid_argument("predictor: token out of range or blank");
  const auto w = MakeViews<const double>(config, params);
  PredictorState st{std::vector<double>(config.hidden_dim),
                    std::vector<double>(config.joint_dim)};
  PredictorForwardStep(config, w, prev.s.data(), token, st.s.data(), st.g.data());
  return st;
}

void JointLogits(const ModelConfig &config, const ParameterSet &params,
                 std::span<const double> h_t, std::span<const double> g_u,
                 std::span<double> out) {
  const auto w = MakeViews<const double>(config, params);
  std::vector<double> act(config.joint_dim);
  JointForward(config, w, h_t.data(), g_u.data(), act.data(), out.data());
}

ForwardResult ModelForward(const ModelConfig &config, const ParameterSet &params,
                           const Features &features,
                           std::span<const int> targets) {
  CheckInputs(config, params, features, targets);
  const auto w = MakeViews<const double>(config, params);
  const int T = features.frames, U = static_cast<int>(targets.size());
  const int D = config.hidden_dim, J = config.joint_dim, V = config.vocab;

  ActivationCache cache;
  cache.frames = T;
  cache.targets.assign(targets.begin(), targets.end());
  cache.input = features;
  EncoderForward(config, w, features, cache);

  cache.pred_state.assign(std::size_t(U + 1) * D, 0.0);
  cache.pred_out.assign(std::size_t(U + 1) * J, 0.0);
  for (int u = 0; u <= U; ++u) {
    const double *prev = u == 0 ? nullptr : &cache.pred_state[std::size_t(u - 1) * D];
    const int token = u == 0 ? config.blank_id : targets[u - 1];
    PredictorForwardStep(config, w, prev, token,
                         &cache.pred_state[std::size_t(u) * D],
                         &cache.pred_out[std::size_t(u) * J]);
  }

  LogitLattice lattice = LogitLattice::Zeros(T, cache.targets, V, config.blank_id);
  cache.joint_act.assign(std::size_t(T) * (U + 1) * J, 0.0);
  for (int t = 0; t < T; ++t) {
    for (int u = 0; u <= U; ++u) {
      JointForward(config, w, &cache.enc_out[std::size_t(t) * J],
                   &cache.pred_out[std::size_t(u) * J],
                   &cache.joint_act[(std::size_t(t) * (U + 1) + u) * J],
                   lattice.Cell(t, u).data());
    }
  }
  return {std::move(lattice), std::move(cache)};
}

ParameterSet ModelBackward(const ModelConfig &config, const ParameterSet &params,
                           const ActivationCache &cache,
                           std::span<const double> dlogits) {
  const int T = cache.frames, U = static_cast<int>(cache.targets.size());
  const int D = config.hidden_dim, J = config.joint_dim, V = config.vocab,
            F = config.feat_dim;
  if (cache.input.frames != T || cache.enc_out.size() != std::size_t(T) * J ||
      cache.pred_out.size() != std::size_t(U + 1) * J ||
      cache.joint_act.size() != std::size_t(T) * (U + 1) * J)
    throw std::invalid_argument("model backward: cache does not match config");
  if (dlogits.size() != std::size_t(T) * (U + 1) * V)
    throw std::invalid_argument("model backward: gradient shape mismatch");

  const auto w = MakeViews<const double>(config, params);
  ParameterSet grads = params.ZerosLike();
  auto gw = MakeViews<double>(config, grads);

  // Joiner.
  std::vector<double> dh(std::size_t(T) * J, 0.0);
  std::vector<double> dg(std::size_t(U + 1) * J, 0.0);
  std::vector<double> dact(J);
  for (int t = 0; t < T; ++t) {
    for (int u = 0; u <= U; ++u) {
      const std::size_t cell = std::size_t(t) * (U + 1) + u;
      const double *dl = dlogits.data() + cell * V;
      const double *act = &cache.joint_act[cell * J];
      AddOuter(dl, act, V, J, gw.joiner);
      AddTo(dl, V, gw.b_joiner);
      std::fill(dact.begin(), dact.end(), 0.0);
      AddTransposed(w.joiner, dl, V, J, dact.data());
      for (int j = 0; j < J; ++j) {
        if (act[j] <= 0.0) continue;
        dh[std::size_t(t) * J + j] += dact[j];
        dg[std::size_t(u) * J + j] += dact[j];
      }
    }
  }

  // Predictor, back through the recurrence.
  std::vector<double> ds_next(D, 0.0), ds(D), dpre(D), dg_pre(J);
  for (int u = U; u >= 0; --u) {
    const double *s = &cache.pred_state[std::size_t(u) * D];
    const double *g = &cache.pred_out[std::size_t(u) * J];
    for (int j = 0; j < J; ++j)
      dg_pre[j] = dg[std::size_t(u) * J + j] * (1.0 - g[j] * g[j]);
    AddOuter(dg_pre.data(), s, J, D, gw.w_out);
    AddTo(dg_pre.data(), J, gw.b_pred_out);
    ds = ds_next;
    AddTransposed(w.w_out, dg_pre.data(), J, D, ds.data());
    for (int d = 0; d < D; ++d) dpre[d] = ds[d] * (1.0 - s[d] * s[d]);

    const int token = u == 0 ? config.blank_id : cache.targets[u - 1];
    const double *e = w.emb + std::size_t(token) * D;
    AddOuter(dpre.data(), e, D, D, gw.w_ih);
    AddTo(dpre.data(), D, gw.b_rnn);
    AddTransposed(w.w_ih, dpre.data(), D, D, gw.emb + std::size_t(token) * D);
    std::fill(ds_next.begin(), ds_next.end(), 0.0);
    if (u > 0) {
      AddOuter(dpre.data(), &cache.pred_state[std::size_t(u - 1) * D], D, D,
               gw.w_hh);
      AddTransposed(w.w_hh, dpre.data(), D, D, ds_next.data());
    }
  }

  // Encoder output projection and residual.
  std::vector<double> dz(std::size_t(T) * D, 0.0);
  std::vector<double> dh_pre(J);
  for (int t = 0; t < T; ++t) {
    const double *h = &cache.enc_out[std::size_t(t) * J];
    for (int j = 0; j < J; ++j)
      dh_pre[j] = dh[std::size_t(t) * J + j] * (1.0 - h[j] * h[j]);
    AddOuter(dh_pre.data(), &cache.residual[std::size_t(t) * D], J, D, gw.enc_out);
    AddTo(dh_pre.data(), J, gw.b_enc_out);
    AddTransposed(w.enc_out, dh_pre.data(), J, D, &dz[std::size_t(t) * D]);
  }

  // Attention.
  std::vector<double> da = dz;  // residual path
  std::vector<double> dctx(std::size_t(T) * D, 0.0);
  for (int t = 0; t < T; ++t) {
    const double *dzt = &dz[std::size_t(t) * D];
    AddOuter(dzt, &cache.context[std::size_t(t) * D], D, D, gw.wo);
    AddTo(dzt, D, gw.b_o);
    AddTransposed(w.wo, dzt, D, D, &dctx[std::size_t(t) * D]);
  }
  std::vector<double> dq(std::size_t(T) * D, 0.0), dk(std::size_t(T) * D, 0.0),
      dv(std::size_t(T) * D, 0.0), dscore(T);
  const double scale = 1.0 / std::sqrt(static_cast<double>(D));
  for (int t = 0; t < T; ++t) {
    const double *att = &cache.attention[std::size_t(t) * T];
    const double *dc = &dctx[std::size_t(t) * D];
    double weighted = 0.0;
    for (int s = 0; s < T; ++s) {
      const double *v = &cache.value[std::size_t(s) * D];
      double d_att = 0.0;
      for (int d = 0; d < D; ++d) {
        d_att += dc[d] * v[d];
        dv[std::size_t(s) * D + d] += att[s] * dc[d];
      }
      dscore[s] = d_att;
      weighted += att[s] * d_att;
    }
    // Softmax Jacobian.
    for (int s = 0; s < T; ++s) dscore[s] = att[s] * (dscore[s] - weighted) * scale;
    const double *q = &cache.query[std::size_t(t) * D];
    for (int s = 0; s < T; ++s) {
      const double *k = &cache.key[std::size_t(s) * D];
      for (int d = 0; d < D; ++d) {
        dq[std::size_t(t) * D + d] += dscore[s] * k[d];
        dk[std::size_t(s) * D + d] += dscore[s] * q[d];
      }
    }
  }
  for (int t = 0; t < T; ++t) {
    const double *a = &cache.enc_proj[std::size_t(t) * D];
    double *dat = &da[std::size_t(t) * D];
    const double *dqt = &dq[std::size_t(t) * D];
    const double *dkt = &dk[std::size_t(t) * D];
    const double *dvt = &dv[std::size_t(t) * D];
    AddOuter(dqt, a, D, D, gw.wq);
    AddTo(dqt, D, gw.b_q);
    AddTransposed(w.wq, dqt, D, D, dat);
    AddOuter(dkt, a, D, D, gw.wk);
    AddTransposed(w.wk, dkt, D, D, dat);
    AddOuter(dvt, a, D, D, gw.wv);
    AddTo(dvt, D, gw.b_v);
    AddTransposed(w.wv, dvt, D, D, dat);

    AddOuter(dat, cache.input.Row(t).data(), D, F, gw.enc_in);
    AddTo(dat, D, gw.b_in);
  }
  return grads;
}

}  // namespace ftsim
