// include/ftsim/rnnt_lattice.h

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

#ifndef FTSIM_RNNT_LATTICE_H_
#define FTSIM_RNNT_LATTICE_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ftsim {

// Transducer lattice of per-cell output scores, stored row-major as
// [frames][target_len + 1][vocab]. Cell (t, u) holds the scores of
// Pr(. | h_t, g_u); a blank moves (t, u) -> (t + 1, u) and the target token
// targets[u] moves (t, u) -> (t, u + 1).
//
// A lattice is either raw (joiner logits) or normalized (per-cell
// log-probabilities, as produced by Normalize()).
class LogitLattice {
 public:
  LogitLattice(int frames, std::vector<int> targets, int vocab, int blank_id,
               std::vector<double> scores, bool normalized = false);

  static LogitLattice Zeros(int frames, std::vector<int> targets, int vocab,
                            int blank_id);

  int Frames() const { return frames_; }
  int TargetLen() const { return static_cast<int>(targets_.size()); }
  int Vocab() const { return vocab_; }
  int BlankId() const { return blank_id_; }
  bool Normalized() const { return normalized_; }
  const std::vector<int> &Targets() const { return targets_; }

  double At(int t, int u, int k) const { return scores_[Index(t, u) + k]; }
  double &At(int t, int u, int k) { return scores_[Index(t, u) + k]; }

  std::span<const double> Cell(int t, int u) const {
    return {scores_.data() + Index(t, u), static_cast<std::size_t>(vocab_)};
  }
  std::span<double> Cell(int t, int u) {
    return {scores_.data() + Index(t, u), static_cast<std::size_t>(vocab_)};
  }

  const std::vector<double> &Scores() const { return scores_; }
  std::vector<double> &Scores() { return scores_; }

 private:
  std::size_t Index(int t, int u) const {
    return (static_cast<std::size_t>(t) * (targets_.size() + 1) + u) * vocab_;
  }

  int frames_;
  std::vector<int> targets_;
  int vocab_;
  int blank_id_;
  std::vector<double> scores_;
  bool normalized_;
};

// Dense [rows][cols] grid of doubles.
struct Grid {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  Grid() = default;
  Grid(int r, int c, double fill) : rows(r), cols(c), values(std::size_t(r) * c, fill) {}
  double At(int r, int c) const { return values[std::size_t(r) * cols + c]; }
  double &At(int r, int c) { return values[std::size_t(r) * cols + c]; }
};

// log_alpha / log_beta over the [T][U+1] grid. Cells outside a band mask hold
// -infinity.
struct ForwardBackwardGrids {
  Grid log_alpha;
  Grid log_beta;
  double total_log_prob = 0.0;
};

// One lattice move taken at cell (t, u). label == blank advances t, any other
// label advances u.
struct AlignmentStep {
  int t = 0;
  int u = 0;
  int label = 0;
  bool operator==(const AlignmentStep &) const = default;
};

// A complete monotone path: T blank steps and U emissions, ending with the
// terminating blank at (T - 1, U).
struct AlignmentPath {
  std::vector<AlignmentStep> steps;
  double log_prob = 0.0;
};

// Structural check of `path` against a lattice of the given shape.
bool IsValidPath(const AlignmentPath &path, int frames,
                 std::span<const int> targets, int blank_id);

// Frame at which each target token is emitted, in order (size U). Emissions
// are recognized structurally (the following step advances u).
std::vector<int> EmissionFrames(const AlignmentPath &path);

// Builds the path that emits targets[u] at frames[u] and blanks everywhere
// else. frames must be non-decreasing and inside [0, frames_total). log_prob
// is left at 0.
AlignmentPath PathFromEmissionFrames(std::span<const int> frames,
                                     std::span<const int> targets,
                                     int frames_total, int blank_id);

// Cell validity region for the restricted losses.
class BandMask {
 public:
  BandMask(int frames, int target_len, int b_left, int b_right);

  // Every cell valid.
  static BandMask Full(int frames, int target_len);

  int Frames() const { return frames_; }
  int TargetLen() const { return target_len_; }
  int BandLeft() const { return b_left_; }
  int BandRight() const { return b_right_; }

  bool Valid(int t, int u) const {
    return valid_[std::size_t(t) * (target_len_ + 1) + u] != 0;
  }
  void SetValid(int t, int u, bool v) {
    valid_[std::size_t(t) * (target_len_ + 1) + u] = v ? 1 : 0;
  }
  std::size_t CountValid() const;

 private:
  int frames_;
  int target_len_;
  int b_left_;
  int b_right_;
  std::vector<std::uint8_t> valid_;
};

/// Per-cell log-softmax. Throws std::invalid_argument on non-finite scores.
LogitLattice Normalize(const LogitLattice &lattice);

/// In-place log-softmax of one score vector; returns the log normalizer.
double LogSoftmaxInPlace(std::span<double> scores);

// Full-sum recursions. Both accept raw or normalized lattices (raw ones are
// normalized first). With a mask, paths are confined to valid cells.
ForwardBackwardGrids RnntForward(const LogitLattice &lattice,
                                 const BandMask *mask = nullptr);
ForwardBackwardGrids RnntBackward(const LogitLattice &lattice,
                                  const BandMask *mask = nullptr);

/// -log Pr(y | x) summed over every alignment.
double RnntLossFull(const LogitLattice &lattice);

/// Gradient of RnntLossFull with respect to the raw logits, shaped like the
/// lattice scores. `lattice` must be raw.
std::vector<double> RnntGrad(const LogitLattice &lattice);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;  // [T][U+1][V], w.r.t. raw logits
  std::size_t cells_touched = 0;
};

/// Loss and gradient in one forward-backward pass; `mask` may be null for the
/// full-sum loss. Throws std::invalid_argument when the mask does not connect
/// (0, 0) to (T - 1, U).
LossAndGrad RnntLossAndGrad(const LogitLattice &raw_lattice,
                            const BandMask *mask = nullptr);

// Number of monotone alignments, C(T + U - 1, U), saturated at UINT64_MAX.
std::uint64_t CountAlignments(int frames, int target_len);

/// Enumerates every alignment with its log-probability accumulated step by
/// step from (0, 0). Refuses (std::length_error) above `path_limit` paths.
std::vector<AlignmentPath> EnumerateAlignments(const LogitLattice &lattice,
                                               std::uint64_t path_limit = 10000);

/// Exhaustive log-sum-exp over all alignments; test oracle for RnntLossFull.
double BruteForceLoss(const LogitLattice &lattice,
                      std::uint64_t path_limit = 10000);

/// Max-probability alignment. Among equally scored paths the one that takes
/// its blanks earliest is returned.
AlignmentPath ViterbiAlign(const LogitLattice &lattice);

/// Band around `path`: token u may be emitted at frames
/// [a_u - b_left, a_u + b_right] where a_u is the path's emission frame, and a
/// cell is valid when it lies on some path using only permitted emissions.
/// Throws std::invalid_argument if the path does not fit a frames x
/// (target_len + 1) grid.
BandMask MakeBandMask(const AlignmentPath &path, int b_left, int b_right,
                      int frames, int target_len);

double RestrictedLoss(const LogitLattice &lattice, const BandMask &mask);
std::vector<double> RestrictedGrad(const LogitLattice &lattice,
                                   const BandMask &mask);

}  // namespace ftsim

#endif  // FTSIM_RNNT_LATTICE_H_
