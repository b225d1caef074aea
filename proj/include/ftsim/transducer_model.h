// include/ftsim/transducer_model.h

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

#ifndef FTSIM_TRANSDUCER_MODEL_H_
#define FTSIM_TRANSDUCER_MODEL_H_

#include <cstdint>
#include <span>
#include <vector>

#include "ftsim/parameter_set.h"
#include "ftsim/rnnt_lattice.h"

namespace ftsim {

// Row-major [frames][dim] feature matrix.
struct Features {
  int frames = 0;
  int dim = 0;
  std::vector<double> values;

  Features() = default;
  Features(int t, int d) : frames(t), dim(d), values(std::size_t(t) * d, 0.0) {}

  double At(int t, int f) const { return values[std::size_t(t) * dim + f]; }
  double &At(int t, int f) { return values[std::size_t(t) * dim + f]; }
  std::span<const double> Row(int t) const {
    return {values.data() + std::size_t(t) * dim, std::size_t(dim)};
  }
  std::span<double> Row(int t) {
    return {values.data() + std::size_t(t) * dim, std::size_t(dim)};
  }
  bool operator==(const Features &) const = default;
};

struct ModelConfig {
  int feat_dim = 8;
  int hidden_dim = 16;
  int joint_dim = 16;
  int vocab = 17;  // including blank
  int blank_id = 0;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument.
  void Validate() const;
  bool operator==(const ModelConfig &) const = default;
};

// Group layout (D = hidden, F = feat, J = joint, V = vocab):
//   enc_in   [D][F]        input projection
//   attn_q/k/v/o [D][D]    single-head self-attention
//   enc_out  [J][D]        encoder projection (tanh)
//   pred_emb [V][D]        token embedding; the blank row is the start symbol
//   pred_rnn [2D+J][D]     rows: W_ih, W_hh, W_out (tanh recurrence + tanh
//                          projection to J)
//   joiner   [V][J]        output layer after relu(h_t + g_u)
//   bias_all [4D+J+D+J+V]  b_in, b_q, b_v, b_o, b_enc_out, b_rnn, b_pred_out,
//                          b_joiner
// attn_k has no bias: a key bias shifts every score of a query equally.
ParameterSet MakeParameterLayout(const ModelConfig &config);

/// Weights uniform in +-1/sqrt(fan_in), one deterministic stream per group
/// seeded from (config.seed, group name); bias_all is zero.
ParameterSet InitParams(const ModelConfig &config);

// Everything the backward pass needs from a forward call.
struct ActivationCache {
  int frames = 0;
  std::vector<int> targets;
  Features input;
  std::vector<double> enc_proj;   // a  [T][D]
  std::vector<double> query;      // q  [T][D]
  std::vector<double> key;        // k  [T][D]
  std::vector<double> value;      // v  [T][D]
  std::vector<double> attention;  // A  [T][T], rows sum to 1
  std::vector<double> context;    // c  [T][D]
  std::vector<double> residual;   // z = a + W_o c + b_o  [T][D]
  std::vector<double> enc_out;    // h  [T][J]
  std::vector<double> pred_state; // s  [U+1][D]
  std::vector<double> pred_out;   // g  [U+1][J]
  std::vector<double> joint_act;  // relu(h_t + g_u)  [T][U+1][J]
};

struct EncoderOutput {
  int frames = 0;
  std::vector<double> h;  // [T][J]
  std::span<const double> Frame(int t, int joint_dim) const {
    return {h.data() + std::size_t(t) * joint_dim, std::size_t(joint_dim)};
  }
};

// Recurrent predictor state after consuming a token prefix.
struct PredictorState {
  std::vector<double> s;  // [D]
  std::vector<double> g;  // [J]
};

/// Encoder only, for decoding.
EncoderOutput Encode(const ModelConfig &config, const ParameterSet &params,
                     const Features &features);

/// State after the start symbol.
PredictorState PredictorStart(const ModelConfig &config,
                              const ParameterSet &params);
PredictorState PredictorStep(const ModelConfig &config,
                             const ParameterSet &params,
                             const PredictorState &prev, int token);

/// Raw joiner logits for one (h_t, g_u) pair; out has size V.
void JointLogits(const ModelConfig &config, const ParameterSet &params,
                 std::span<const double> h_t, std::span<const double> g_u,
                 std::span<double> out);

struct ForwardResult {
  LogitLattice lattice;  // raw logits
  ActivationCache cache;
};

/// Full forward pass over the T x (U+1) grid. Throws std::invalid_argument on
/// shape mismatch or out-of-range targets.
ForwardResult ModelForward(const ModelConfig &config, const ParameterSet &params,
                           const Features &features,
                           std::span<const int> targets);

/// Backpropagates d(loss)/d(raw logits) (shaped like the lattice) into a
/// gradient set with the structure of `params`.
ParameterSet ModelBackward(const ModelConfig &config, const ParameterSet &params,
                           const ActivationCache &cache,
                           std::span<const double> dlogits);

}  // namespace ftsim

#endif  // FTSIM_TRANSDUCER_MODEL_H_
