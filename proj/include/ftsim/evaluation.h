// include/ftsim/evaluation.h

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

#ifndef FTSIM_EVALUATION_H_
#define FTSIM_EVALUATION_H_

#include <cstddef>
#include <span>

#include "ftsim/parameter_set.h"
#include "ftsim/transducer_model.h"
#include "ftsim/utterance.h"

namespace ftsim {

/// Levenshtein distance; substitutions, insertions and deletions cost 1.
std::size_t EditDistance(std::span<const int> hyp, std::span<const int> ref);

/// EditDistance / |ref|. An empty reference gives |hyp| (each insertion
/// counts as a full error).
double TokenErrorRate(std::span<const int> hyp, std::span<const int> ref);

struct EvalResult {
  double token_error_rate = 0.0;  // corpus level: sum of edits / sum of |ref|
  double mean_loss = 0.0;         // full transducer loss with true labels
  std::size_t edits = 0;
  std::size_t ref_tokens = 0;
  std::size_t utterances = 0;
};

/// Greedy decoding for TER plus the full-sum loss on the ground truth. Throws
/// std::invalid_argument on an empty dataset.
EvalResult Evaluate(const ModelConfig &config, const ParameterSet &params,
                    std::span<const Utterance> data, bool with_loss = true);

}  // namespace ftsim

#endif  // FTSIM_EVALUATION_H_
