// include/ftsim/checkpoint.h

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

#ifndef FTSIM_CHECKPOINT_H_
#define FTSIM_CHECKPOINT_H_

#include <optional>
#include <stdexcept>
#include <string>

#include "ftsim/parameter_set.h"

namespace ftsim {

// File layout:
//   FTSIM1
//   groups <n>
//   param <name> <rank> <dims...> <byte offset> <value count>   (n lines)
//   server <round> <block momentum>                             (optional)
//   prev <name> <rank> <dims...> <byte offset> <value count>    (n lines,
//                                                                only with
//                                                                server)
//   data <byte count>
// followed by the raw values as little-endian IEEE-754 doubles. Offsets are
// relative to the start of the data block.

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { kIo, kBadMagic, kTruncated, kMalformed, kShapeMismatch };
  CheckpointError(Kind kind, const std::string &what)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Server history saved alongside mid-adaptation weights.
struct CheckpointServerState {
  int round = 0;
  double block_momentum = 0.0;
  ParameterSet w_prev;
};

struct Checkpoint {
  ParameterSet params;
  std::optional<CheckpointServerState> server;
};

/// Throws CheckpointError (kIo) when the file cannot be written.
void SaveCheckpoint(const std::string &path, const Checkpoint &checkpoint);
/// Throws CheckpointError.
Checkpoint LoadCheckpoint(const std::string &path);
/// LoadCheckpoint, then checks every group against `layout`; a mismatch
/// raises kShapeMismatch naming the first offending group.
Checkpoint LoadCheckpoint(const std::string &path, const ParameterSet &layout);

}  // namespace ftsim

#endif  // FTSIM_CHECKPOINT_H_
