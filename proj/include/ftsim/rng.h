// include/ftsim/rng.h

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

#ifndef FTSIM_RNG_H_
#define FTSIM_RNG_H_

#include <cstdint>
#include <random>
#include <string_view>

namespace ftsim {

// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t MixSeed(std::uint64_t a, std::uint64_t b);
std::uint64_t MixSeed(std::uint64_t a, std::uint64_t b, std::uint64_t c);

// FNV-1a over the bytes of `name`. Stable across platforms, unlike std::hash.
std::uint64_t HashName(std::string_view name);

/// Deterministic random stream. Wraps mt19937_64 (whose output sequence is
/// fixed by the standard) and derives every variate with portable arithmetic,
/// so a seed produces the same numbers under any standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double Uniform();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in the closed range [lo, hi].
  int UniformInt(int lo, int hi);

  // Standard normal via Box-Muller.
  double Normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ftsim

#endif  // FTSIM_RNG_H_
