// include/ftsim/utterance.h

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

#ifndef FTSIM_UTTERANCE_H_
#define FTSIM_UTTERANCE_H_

#include <string_view>
#include <vector>

#include "ftsim/rnnt_lattice.h"
#include "ftsim/transducer_model.h"

namespace ftsim {

enum class Domain { kSource, kTarget };

std::string_view DomainName(Domain d);

// One generated utterance with its ground truth.
struct Utterance {
  Features features;
  std::vector<int> tokens;
  // Emits `tokens` over features.frames; each token at the first frame of its
  // span.
  AlignmentPath true_alignment;
  Domain domain = Domain::kSource;
};

}  // namespace ftsim

#endif  // FTSIM_UTTERANCE_H_
