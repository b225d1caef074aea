// include/ftsim/decoder.h

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

#ifndef FTSIM_DECODER_H_
#define FTSIM_DECODER_H_

#include <vector>

#include "ftsim/parameter_set.h"
#include "ftsim/rnnt_lattice.h"
#include "ftsim/transducer_model.h"

namespace ftsim {

struct Hypothesis {
  std::vector<int> tokens;  // non-blank ids
  // Total log-probability. For greedy decoding this is the single decoded
  // path; beam hypotheses sum every merged alignment of the same tokens.
  double log_prob = 0.0;
  // Best single alignment seen for `tokens`; alignment.log_prob is its score.
  AlignmentPath alignment;
  int frames = 0;
  // log_prob / (tokens + frames)
  double norm_score = 0.0;
};

/// Frame-synchronous argmax decoding (ties to the lowest token id). After
/// `max_emits_per_frame` consecutive emissions in one frame, blank is forced.
Hypothesis GreedyDecode(const ModelConfig &config, const ParameterSet &params,
                        const Features &features, int max_emits_per_frame = 4);

/// Frame-synchronous beam search. Within a frame, every expansion round keeps
/// the beam_size best one-step extensions (blank or token) over all live
/// hypotheses, plus the blank extension of any hypothesis that would otherwise
/// lose all of its extensions. Blank extensions move to the next frame, where
/// hypotheses with identical tokens are merged by log-sum of scores while
/// keeping the best single alignment. Returns at most beam_size hypotheses,
/// best first.
std::vector<Hypothesis> BeamDecode(const ModelConfig &config,
                                   const ParameterSet &params,
                                   const Features &features, int beam_size,
                                   int max_emits_per_frame = 4);

/// Length-normalized decode score used for confidence filtering; <= 0.
double Confidence(const Hypothesis &h);

}  // namespace ftsim

#endif  // FTSIM_DECODER_H_
