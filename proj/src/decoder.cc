// src/decoder.cc

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

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace ftsim {

namespace {

double LogAdd(double a, double b) {
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

void JointLogProbs(const ModelConfig &c, const ParameterSet &params,
                   const EncoderOutput &enc, int t, const PredictorState &st,
                   std::vector<double> &out) {
  out.resize(c.vocab);
  JointLogits(c, params, enc.Frame(t, c.joint_dim), st.g, out);
  LogSoftmaxInPlace(out);
}

void Finish(Hypothesis &h, int frames) {
  h.frames = frames;
  h.norm_score = h.log_prob / static_cast<double>(h.tokens.size() + frames);
}

struct BeamEntry {
  std::vector<int> tokens;
  PredictorState state;
  double score = 0.0;
  AlignmentPath best;  // best.log_prob is the best-alignment score
};

struct Candidate {
  double score;
  std::size_t parent;
  int token;
};

void MergeInto(std::map<std::vector<int>, BeamEntry> &pool, BeamEntry entry) {
  auto it = pool.find(entry.tokens);
  if (it == pool.end()) {
    pool.emplace(entry.tokens, std::move(entry));
    return;
  }
  BeamEntry &kept = it->second;
  kept.score = LogAdd(kept.score, entry.score);
  if (entry.best.log_prob > kept.best.log_prob) kept.best = std::move(entry.best);
}

// Best first; equal scores ordered by token sequence for determinism.
std::vector<BeamEntry> Prune(std::map<std::vector<int>, BeamEntry> &pool,
                             int beam_size) {
  std::vector<BeamEntry> out;
  out.reserve(pool.size());
  for (auto &kv : pool) out.push_back(std::move(kv.second));
  std::stable_sort(out.begin(), out.end(), [](const BeamEntry &a, const BeamEntry &b) {
    return a.score > b.score;
  });
  if (out.size() > std::size_t(beam_size)) out.resize(beam_size);
  return out;
}

}  // namespace

Hypothesis GreedyDecode(const ModelConfig &config, const ParameterSet &params,
                        const Features &features, int max_emits_per_frame) {
  if (max_emits_per_frame < 1)
    throw std::invalid_argument("greedy decode: max_emits_per_frame must be >= 1");
  const EncoderOutput enc = Encode(config, params, features);
  const int T = features.frames, blank = config.blank_id;

  Hypothesis h;
  PredictorState st = PredictorStart(config, params);
  std::vector<double> lp;
  int u = 0, emitted_here = 0;
  for (int t = 0; t < T;) {
    JointLogProbs(config, params, enc, t, st, lp);
    int k = static_cast<int>(std::max_element(lp.begin(), lp.end()) - lp.begin());
    if (emitted_here >= max_emits_per_frame) k = blank;
    h.log_prob += lp[k];
    h.alignment.steps.push_back({t, u, k});
    if (k == blank) {
      ++t;
      emitted_here = 0;
    } else {
      h.tokens.push_back(k);
      st = PredictorStep(config, params, st, k);
      ++u;
      ++emitted_here;
    }
  }
  h.alignment.log_prob = h.log_prob;
  Finish(h, T);
  return h;
}

std::vector<Hypothesis> BeamDecode(const ModelConfig &config,
                                   const ParameterSet &params,
                                   const Features &features, int beam_size,
                                   int max_emits_per_frame) {
  if (beam_size < 1) throw std::invalid_argument("beam decode: beam_size must be >= 1");
  if (max_emits_per_frame < 1)
    throw std::invalid_argument("beam decode: max_emits_per_frame must be >= 1");
  const EncoderOutput enc = Encode(config, params, features);
  const int T = features.frames, V = config.vocab, blank = config.blank_id;

  std::vector<BeamEntry> frame_hyps(1);
  frame_hyps[0].state = PredictorStart(config, params);

  std::vector<std::vector<double>> log_probs;
  for (int t = 0; t < T; ++t) {
    std::map<std::vector<int>, BeamEntry> next_frame;
    std::vector<BeamEntry> live = std::move(frame_hyps);
    for (int round = 0; round <= max_emits_per_frame && !live.empty(); ++round) {
      const bool may_emit = round < max_emits_per_frame;
      log_probs.resize(live.size());
      std::vector<Candidate> cands;
      for (std::size_t i = 0; i < live.size(); ++i) {
        JointLogProbs(config, params, enc, t, live[i].state, log_probs[i]);
        for (int k = 0; k < V; ++k) {
          if (k != blank && !may_emit) continue;
          cands.push_back({live[i].score + log_probs[i][k], i, k});
        }
      }
      std::stable_sort(cands.begin(), cands.end(),
                       [](const Candidate &a, const Candidate &b) {
                         return a.score > b.score;
                       });
      if (cands.size() > std::size_t(beam_size)) {
        std::vector<char> survived(live.size(), 0);
        for (int j = 0; j < beam_size; ++j) survived[cands[j].parent] = 1;
        std::vector<Candidate> kept(cands.begin(), cands.begin() + beam_size);
        // A parent with no surviving candidate still closes the frame.
        for (std::size_t j = beam_size; j < cands.size(); ++j)
          if (!survived[cands[j].parent] && cands[j].token == blank) kept.push_back(cands[j]);
        cands = std::move(kept);
      }

      std::vector<BeamEntry> next_live;
      for (const Candidate &c : cands) {
        const BeamEntry &parent = live[c.parent];
        BeamEntry child;
        child.tokens = parent.tokens;
        child.score = c.score;
        child.best = parent.best;
        const int u = static_cast<int>(parent.tokens.size());
        child.best.steps.push_back({t, u, c.token});
        child.best.log_prob += log_probs[c.parent][c.token];
        if (c.token == blank) {
          child.state = parent.state;
          MergeInto(next_frame, std::move(child));
        } else {
          child.tokens.push_back(c.token);
          child.state = PredictorStep(config, params, parent.state, c.token);
          next_live.push_back(std::move(child));
        }
      }
      live = std::move(next_live);
    }
    frame_hyps = Prune(next_frame, beam_size);
  }

  std::vector<Hypothesis> out;
  out.reserve(frame_hyps.size());
  for (auto &e : frame_hyps) {
    Hypothesis h;
    h.tokens = std::move(e.tokens);
    h.log_prob = e.score;
    h.alignment = std::move(e.best);
    Finish(h, T);
    out.push_back(std::move(h));
  }
  return out;
}

double Confidence(const Hypothesis &h) { return h.norm_score; }

}  // namespace ftsim
