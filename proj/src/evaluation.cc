// src/evaluation.cc

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

#include "ftsim/evaluation.h"

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "ftsim/decoder.h"
#include "ftsim/rnnt_lattice.h"

namespace ftsim {

std::size_t EditDistance(std::span<const int> hyp, std::span<const int> ref) {
  // One row of the (|hyp|+1) x (|ref|+1) table at a time.
  std::vector<std::size_t> row(ref.size() + 1);
  for (std::size_t j = 0; j <= ref.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= hyp.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({up + 1, row[j - 1] + 1,
                         diag + (hyp[i - 1] == ref[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[ref.size()];
}

double TokenErrorRate(std::span<const int> hyp, std::span<const int> ref) {
  const double d = double(EditDistance(hyp, ref));
  return ref.empty() ? d : d / double(ref.size());
}

EvalResult Evaluate(const ModelConfig &config, const ParameterSet &params,
                    std::span<const Utterance> data, bool with_loss) {
  if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
  EvalResult r;
  double loss_sum = 0.0;
  for (const Utterance &utt : data) {
    const Hypothesis h = GreedyDecode(config, params, utt.features);
    r.edits += EditDistance(h.tokens, utt.tokens);
    r.ref_tokens += utt.tokens.size();
    if (with_loss)
      loss_sum += RnntLossFull(
          ModelForward(config, params, utt.features, utt.tokens).lattice);
  }
  r.utterances = data.size();
  r.token_error_rate =
      r.ref_tokens ? double(r.edits) / double(r.ref_tokens) : double(r.edits);
  r.mean_loss = with_loss ? loss_sum / double(data.size()) : 0.0;
  return r;
}

}  // namespace ftsim
