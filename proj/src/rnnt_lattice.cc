// src/rnnt_lattice.cc

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

#include "ftsim/rnnt_lattice.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace ftsim {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double LogAdd(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

void CheckShape(int frames, const std::vector<int> &targets, int vocab,
                int blank_id) {
  if (frames < 1) throw std::invalid_argument("lattice: frames must be >= 1");
  if (vocab < 2) throw std::invalid_argument("lattice: vocab must be >= 2");
  if (blank_id < 0 || blank_id >= vocab)
    throw std::invalid_argument("lattice: blank_id out of range");
  for (int y : targets) {
    if (y < 0 || y >= vocab || y == blank_id)
      throw std::invalid_argument("lattice: target token " + std::to_string(y) +
                                  " is blank or out of range");
  }
}

void CheckMaskShape(const LogitLattice &lattice, const BandMask &mask) {
  if (mask.Frames() != lattice.Frames() ||
      mask.TargetLen() != lattice.TargetLen())
    throw std::invalid_argument("band mask shape does not match lattice");
}

const LogitLattice &EnsureNormalized(const LogitLattice &lattice,
                                     std::optional<LogitLattice> &storage) {
  if (lattice.Normalized()) return lattice;
  storage.emplace(Normalize(lattice));
  return *storage;
}

bool CellValid(const BandMask *mask, int t, int u) {
  return mask == nullptr || mask->Valid(t, u);
}

// Both recursions assume `lp` is normalized.
Grid Alpha(const LogitLattice &lp, const BandMask *mask) {
  const int T = lp.Frames(), U = lp.TargetLen(), blank = lp.BlankId();
  const auto &y = lp.Targets();
  Grid alpha(T, U + 1, kNegInf);
  for (int t = 0; t < T; ++t) {
    for (int u = 0; u <= U; ++u) {
      if (!CellValid(mask, t, u)) continue;
      if (t == 0 && u == 0) {
        alpha.At(0, 0) = 0.0;
        continue;
      }
      double a = kNegInf;
      if (t > 0) a = alpha.At(t - 1, u) + lp.At(t - 1, u, blank);
      if (u > 0) a = LogAdd(a, alpha.At(t, u - 1) + lp.At(t, u - 1, y[u - 1]));
      alpha.At(t, u) = a;
    }
  }
  return alpha;
}

Grid Beta(const LogitLattice &lp, const BandMask *mask) {
  const int T = lp.Frames(), U = lp.TargetLen(), blank = lp.BlankId();
  const auto &y = lp.Targets();
  Grid beta(T, U + 1, kNegInf);
  for (int t = T - 1; t >= 0; --t) {
    for (int u = U; u >= 0; --u) {
      if (!CellValid(mask, t, u)) continue;
      if (t == T - 1 && u == U) {
        beta.At(t, u) = lp.At(t, u, blank);
        continue;
      }
      double b = kNegInf;
      if (t < T - 1) b = beta.At(t + 1, u) + lp.At(t, u, blank);
      if (u < U) b = LogAdd(b, beta.At(t, u + 1) + lp.At(t, u, y[u]));
      beta.At(t, u) = b;
    }
  }
  return beta;
}

void CheckConnected(const BandMask &mask, const Grid &alpha) {
  const int T = mask.Frames(), U = mask.TargetLen();
  if (!mask.Valid(0, 0) || !mask.Valid(T - 1, U) ||
      alpha.At(T - 1, U) == kNegInf)
    throw std::invalid_argument(
        "band mask is disconnected: (T-1, U) unreachable from (0, 0)");
}

}  // namespace

LogitLattice::LogitLattice(int frames, std::vector<int> targets, int vocab,
                           int blank_id, std::vector<double> scores,
                           bool normalized)
    : frames_(frames),
      targets_(std::move(targets)),
      vocab_(vocab),
      blank_id_(blank_id),
      scores_(std::move(scores)),
      normalized_(normalized) {
  CheckShape(frames_, targets_, vocab_, blank_id_);
  const std::size_t expected =
      std::size_t(frames_) * (targets_.size() + 1) * vocab_;
  if (scores_.size() != expected)
    throw std::invalid_argument("lattice: score count " +
                                std::to_string(scores_.size()) +
                                " != T*(U+1)*V = " + std::to_string(expected));
}

LogitLattice LogitLattice::Zeros(int frames, std::vector<int> targets,
                                 int vocab, int blank_id) {
  const std::size_t n = std::size_t(std::max(frames, 0)) *
                        (targets.size() + 1) * std::max(vocab, 0);
  return LogitLattice(frames, std::move(targets), vocab, blank_id,
                      std::vector<double>(n, 0.0));
}

bool IsValidPath(const AlignmentPath &path, int frames,
                 std::span<const int> targets, int blank_id) {
  const int U = static_cast<int>(targets.size());
  if (path.steps.size() != std::size_t(frames) + U) return false;
  int t = 0, u = 0;
  for (std::size_t i = 0; i < path.steps.size(); ++i) {
    const AlignmentStep &s = path.steps[i];
    if (s.t != t || s.u != u) return false;
    if (s.label == blank_id) {
      ++t;
    } else {
      if (u >= U || s.label != targets[u]) return false;
      ++u;
    }
    if (t > frames) return false;
  }
  // The last step must be the terminating blank out of (T - 1, U).
  return t == frames && u == U && path.steps.back().label == blank_id;
}

std::vector<int> EmissionFrames(const AlignmentPath &path) {
  std::vector<int> frames;
  for (std::size_t i = 0; i + 1 < path.steps.size(); ++i) {
    if (path.steps[i + 1].u == path.steps[i].u + 1)
      frames.push_back(path.steps[i].t);
  }
  return frames;
}

AlignmentPath PathFromEmissionFrames(std::span<const int> frames,
                                     std::span<const int> targets,
                                     int frames_total, int blank_id) {
  if (frames.size() != targets.size())
    throw std::invalid_argument("emission frame count != target count");
  AlignmentPath path;
  std::size_t u = 0;
  for (int t = 0; t < frames_total; ++t) {
    while (u < frames.size() && frames[u] == t) {
      path.steps.push_back({t, static_cast<int>(u), targets[u]});
      ++u;
    }
    if (u < frames.size() && frames[u] < t)
      throw std::invalid_argument("emission frames not non-decreasing");
    path.steps.push_back({t, static_cast<int>(u), blank_id});
  }
  if (u != frames.size())
    throw std::invalid_argument("emission frame beyond the last frame");
  return path;
}

BandMask::BandMask(int frames, int target_len, int b_left, int b_right)
    : frames_(frames),
      target_len_(target_len),
      b_left_(b_left),
      b_right_(b_right),
      valid_(std::size_t(std::max(frames, 0)) * (std::max(target_len, 0) + 1),
             0) {
  if (frames < 1 || target_len < 0 || b_left < 0 || b_right < 0)
    throw std::invalid_argument("band mask: bad shape or negative buffer");
}

BandMask BandMask::Full(int frames, int target_len) {
  const int wide = std::max(frames, target_len);
  BandMask mask(frames, target_len, wide, wide);
  std::fill(mask.valid_.begin(), mask.valid_.end(), 1);
  return mask;
}

std::size_t BandMask::CountValid() const {
  return static_cast<std::size_t>(std::count(valid_.begin(), valid_.end(), 1));
}

double LogSoftmaxInPlace(std::span<double> scores) {
  double max_score = kNegInf;
  for (double s : scores) {
    if (!std::isfinite(s))
      throw std::invalid_argument("normalize: non-finite score");
    max_score = std::max(max_score, s);
  }
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - max_score);
  const double log_z = max_score + std::log(sum);
  for (double &s : scores) s -= log_z;
  return log_z;
}

LogitLattice Normalize(const LogitLattice &lattice) {
  LogitLattice out(lattice.Frames(), lattice.Targets(), lattice.Vocab(),
                   lattice.BlankId(), lattice.Scores(), /*normalized=*/true);
  for (int t = 0; t < out.Frames(); ++t)
    for (int u = 0; u <= out.TargetLen(); ++u) LogSoftmaxInPlace(out.Cell(t, u));
  return out;
}

ForwardBackwardGrids RnntForward(const LogitLattice &lattice,
                                 const BandMask *mask) {
  std::optional<LogitLattice> storage;
  const LogitLattice &lp = EnsureNormalized(lattice, storage);
  if (mask != nullptr) CheckMaskShape(lp, *mask);
  ForwardBackwardGrids out;
  out.log_alpha = Alpha(lp, mask);
  if (mask != nullptr) CheckConnected(*mask, out.log_alpha);
  const int T = lp.Frames(), U = lp.TargetLen();
  out.total_log_prob = out.log_alpha.At(T - 1, U) + lp.At(T - 1, U, lp.BlankId());
  return out;
}

ForwardBackwardGrids RnntBackward(const LogitLattice &lattice,
                                  const BandMask *mask) {
  std::optional<LogitLattice> storage;
  const LogitLattice &lp = EnsureNormalized(lattice, storage);
  if (mask != nullptr) CheckMaskShape(lp, *mask);
  ForwardBackwardGrids out;
  out.log_beta = Beta(lp, mask);
  if (mask != nullptr && out.log_beta.At(0, 0) == kNegInf)
    throw std::invalid_argument(
        "band mask is disconnected: (T-1, U) unreachable from (0, 0)");
  out.total_log_prob = out.log_beta.At(0, 0);
  return out;
}

// -log P is non-negative; rounding in near-certain lattices can leave a
// value a few ulps below zero.
double ClampLoss(double loss) { return std::max(loss, 0.0); }

double RnntLossFull(const LogitLattice &lattice) {
  return ClampLoss(-RnntForward(lattice).total_log_prob);
}

LossAndGrad RnntLossAndGrad(const LogitLattice &raw_lattice,
                            const BandMask *mask) {
  if (raw_lattice.Normalized())
    throw std::invalid_argument("gradient needs the raw (unnormalized) lattice");
  const LogitLattice lp = Normalize(raw_lattice);
  if (mask != nullptr) CheckMaskShape(lp, *mask);

  const int T = lp.Frames(), U = lp.TargetLen(), V = lp.Vocab();
  const int blank = lp.BlankId();
  const auto &y = lp.Targets();

  const Grid alpha = Alpha(lp, mask);
  if (mask != nullptr) CheckConnected(*mask, alpha);
  const Grid beta = Beta(lp, mask);
  const double total = alpha.At(T - 1, U) + lp.At(T - 1, U, blank);

  LossAndGrad out;
  out.loss = ClampLoss(-total);
  out.grad.assign(lp.Scores().size(), 0.0);
  std::vector<double> g(V);
  for (int t = 0; t < T; ++t) {
    for (int u = 0; u <= U; ++u) {
      if (!CellValid(mask, t, u)) continue;
      ++out.cells_touched;
      const double a = alpha.At(t, u);
      if (a == kNegInf || beta.At(t, u) == kNegInf) continue;
      // g = d(loss)/d(log p(k | t, u)): minus the posterior of each arc.
      std::fill(g.begin(), g.end(), 0.0);
      if (t == T - 1 && u == U) {
        g[blank] = -std::exp(a + lp.At(t, u, blank) - total);
      } else if (t < T - 1) {
        g[blank] = -std::exp(a + lp.At(t, u, blank) + beta.At(t + 1, u) - total);
      }
      if (u < U)
        g[y[u]] = -std::exp(a + lp.At(t, u, y[u]) + beta.At(t, u + 1) - total);
      double g_sum = 0.0;
      for (double v : g) g_sum += v;
      const auto cell = lp.Cell(t, u);
      double *dst = out.grad.data() + (std::size_t(t) * (U + 1) + u) * V;
      for (int k = 0; k < V; ++k) dst[k] = g[k] - std::exp(cell[k]) * g_sum;
    }
  }
  return out;
}

std::vector<double> RnntGrad(const LogitLattice &lattice) {
  return RnntLossAndGrad(lattice, nullptr).grad;
}

double RestrictedLoss(const LogitLattice &lattice, const BandMask &mask) {
  return ClampLoss(-RnntForward(lattice, &mask).total_log_prob);
}

std::vector<double> RestrictedGrad(const LogitLattice &lattice,
                                   const BandMask &mask) {
  return RnntLossAndGrad(lattice, &mask).grad;
}

std::uint64_t CountAlignments(int frames, int target_len) {
  // C(n, k) with n = T + U - 1, k = U, built incrementally; each partial
  // product C(n - k + i, i) is an integer.
  const std::uint64_t n = std::uint64_t(frames) + target_len - 1;
  std::uint64_t result = 1;
  for (std::uint64_t i = 1; i <= std::uint64_t(target_len); ++i) {
    const std::uint64_t factor = n - target_len + i;
    if (result > UINT64_MAX / factor) return UINT64_MAX;
    result = result * factor / i;
  }
  return result;
}

std::vector<AlignmentPath> EnumerateAlignments(const LogitLattice &lattice,
                                               std::uint64_t path_limit) {
  const std::uint64_t count =
      CountAlignments(lattice.Frames(), lattice.TargetLen());
  if (count > path_limit)
    throw std::length_error("too many alignments to enumerate: " +
                            std::to_string(count) + " > limit " +
                            std::to_string(path_limit));
  std::optional<LogitLattice> storage;
  const LogitLattice &lp = EnsureNormalized(lattice, storage);
  const int T = lp.Frames(), U = lp.TargetLen(), blank = lp.BlankId();
  const auto &y = lp.Targets();

  std::vector<AlignmentPath> paths;
  paths.reserve(count);
  AlignmentPath current;
  current.steps.reserve(std::size_t(T) + U);
  // Depth-first over (t, u); the running log-prob is accumulated in path order.
  auto recurse = [&](auto &self, int t, int u, double score) -> void {
    if (t == T - 1 && u == U) {
      current.steps.push_back({t, u, blank});
      current.log_prob = score + lp.At(t, u, blank);
      paths.push_back(current);
      current.steps.pop_back();
      return;
    }
    if (t < T - 1) {
      current.steps.push_back({t, u, blank});
      self(self, t + 1, u, score + lp.At(t, u, blank));
      current.steps.pop_back();
    }
    if (u < U) {
      current.steps.push_back({t, u, y[u]});
      self(self, t, u + 1, score + lp.At(t, u, y[u]));
      current.steps.pop_back();
    }
  };
  recurse(recurse, 0, 0, 0.0);
  return paths;
}

double BruteForceLoss(const LogitLattice &lattice, std::uint64_t path_limit) {
  const auto paths = EnumerateAlignments(lattice, path_limit);
  double best = kNegInf;
  for (const auto &p : paths) best = std::max(best, p.log_prob);
  double sum = 0.0;
  for (const auto &p : paths) sum += std::exp(p.log_prob - best);
  return -(best + std::log(sum));
}

AlignmentPath ViterbiAlign(const LogitLattice &lattice) {
  std::optional<LogitLattice> storage;
  const LogitLattice &lp = EnsureNormalized(lattice, storage);
  const int T = lp.Frames(), U = lp.TargetLen(), blank = lp.BlankId();
  const auto &y = lp.Targets();

  Grid best(T, U + 1, kNegInf);
  // 1 when the best predecessor of (t, u) is the blank arc from (t-1, u)
  std::vector<std::uint8_t> from_blank(std::size_t(T) * (U + 1), 0);
  best.At(0, 0) = 0.0;
  for (int t = 0; t < T; ++t) {
    for (int u = 0; u <= U; ++u) {
      if (t == 0 && u == 0) continue;
      const double via_blank =
          t > 0 ? best.At(t - 1, u) + lp.At(t - 1, u, blank) : kNegInf;
      const double via_emit =
          u > 0 ? best.At(t, u - 1) + lp.At(t, u - 1, y[u - 1]) : kNegInf;
      // Ties go to the emit predecessor, so that among equal-scoring paths
      // the backtrace yields the one taking its blanks first.
      if (via_blank > via_emit) {
        best.At(t, u) = via_blank;
        from_blank[std::size_t(t) * (U + 1) + u] = 1;
      } else {
        best.At(t, u) = via_emit;
      }
    }
  }

  AlignmentPath path;
  path.log_prob = best.At(T - 1, U) + lp.At(T - 1, U, blank);
  path.steps.resize(std::size_t(T) + U);
  std::size_t i = path.steps.size() - 1;
  path.steps[i] = {T - 1, U, blank};
  int t = T - 1, u = U;
  while (t > 0 || u > 0) {
    --i;
    if (from_blank[std::size_t(t) * (U + 1) + u]) {
      --t;
      path.steps[i] = {t, u, blank};
    } else {
      --u;
      path.steps[i] = {t, u, y[u]};
    }
  }
  return path;
}

BandMask MakeBandMask(const AlignmentPath &path, int b_left, int b_right,
                      int frames, int target_len) {
  const int T = frames, U = target_len;
  if (path.steps.size() != std::size_t(T) + U || path.steps.empty() ||
      path.steps.front().t != 0 || path.steps.front().u != 0 ||
      path.steps.back().t != T - 1 || path.steps.back().u != U)
    throw std::invalid_argument("band mask: path does not match lattice shape");
  const std::vector<int> emit_frames = EmissionFrames(path);
  if (static_cast<int>(emit_frames.size()) != U)
    throw std::invalid_argument("band mask: path emits " +
                                std::to_string(emit_frames.size()) +
                                " tokens, expected " + std::to_string(U));

  BandMask mask(T, U, b_left, b_right);
  // Emission of token u (1-based; arc (t, u-1) -> (t, u)) is permitted at t.
  auto permitted = [&](int u, int t) {
    const int a = emit_frames[u - 1];
    return t >= a - b_left && t <= a + b_right;
  };
  const std::size_t cols = std::size_t(U) + 1;
  std::vector<std::uint8_t> reach(std::size_t(T) * cols, 0);
  std::vector<std::uint8_t> coreach(std::size_t(T) * cols, 0);
  for (int t = 0; t < T; ++t) {
    for (int u = 0; u <= U; ++u) {
      bool r = (t == 0 && u == 0);
      if (t > 0 && reach[(t - 1) * cols + u]) r = true;
      if (u > 0 && reach[t * cols + u - 1] && permitted(u, t)) r = true;
      reach[t * cols + u] = r;
    }
  }
  for (int t = T - 1; t >= 0; --t) {
    for (int u = U; u >= 0; --u) {
      bool c = (t == T - 1 && u == U);
      if (t < T - 1 && coreach[(t + 1) * cols + u]) c = true;
      if (u < U && coreach[t * cols + u + 1] && permitted(u + 1, t)) c = true;
      coreach[t * cols + u] = c;
    }
  }
  for (int t = 0; t < T; ++t)
    for (int u = 0; u <= U; ++u)
      mask.SetValid(t, u, reach[t * cols + u] && coreach[t * cols + u]);
  mask.SetValid(0, 0, true);
  mask.SetValid(T - 1, U, true);
  return mask;
}

}  // namespace ftsim
