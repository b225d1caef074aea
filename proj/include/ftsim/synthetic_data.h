// include/ftsim/synthetic_data.h

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

#ifndef FTSIM_SYNTHETIC_DATA_H_
#define FTSIM_SYNTHETIC_DATA_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ftsim/rng.h"
#include "ftsim/utterance.h"

namespace ftsim {

// Generative description of one acoustic domain. Each token owns a prototype
// feature vector; an utterance is a sequence of token spans whose frames are
// the prototype plus Gaussian noise. Consecutive tokens always differ, so
// every span boundary is visible in the features.
struct DomainConfig {
  Domain domain = Domain::kSource;
  int vocab = 17;  // including blank
  int blank_id = 0;
  int feat_dim = 8;
  std::vector<double> token_prior;  // [vocab], blank entry ignored
  int min_tokens = 2;
  int max_tokens = 10;
  int d_min = 1;  // frames per token
  int d_max = 3;
  std::vector<double> prototypes;  // [vocab][feat_dim], blank row unused
  double noise_sigma = 0.1;
  // Relative distance of the prototypes from the source domain's.
  double perturbation_scale = 0.0;

  std::span<const double> Prototype(int token) const {
    return {prototypes.data() + std::size_t(token) * feat_dim,
            std::size_t(feat_dim)};
  }
  // Throws std::invalid_argument.
  void Validate() const;
};

// Knobs for MakeDomains.
struct DomainSpec {
  int vocab = 17;
  int feat_dim = 8;
  int min_tokens = 2;
  int max_tokens = 10;
  int d_min = 1;
  int d_max = 3;
  double prototype_scale = 1.0;  // per-coordinate std of source prototypes
  double source_noise = 0.1;
  double target_noise = 0.3;
  // Each target prototype moves by target_shift * |p| in a random direction
  // orthogonal to p.
  double target_shift = 0.2;
  // Source prior falls off as exp(-prior_skew * rank / (vocab - 2)); the
  // target prior reverses the ranking.
  double prior_skew = 1.0;
};

struct DomainPair {
  DomainConfig source;
  DomainConfig target;
};

/// Source and target domains sharing a vocabulary, fixed by `seed`.
DomainPair MakeDomains(const DomainSpec &spec, std::uint64_t seed);

Utterance GenerateUtterance(const DomainConfig &domain, Rng &rng);

/// n utterances from one stream seeded with `seed`.
std::vector<Utterance> GenDataset(const DomainConfig &domain, int n,
                                  std::uint64_t seed);

// Endless deterministic utterance stream.
class UtteranceStream {
 public:
  UtteranceStream(DomainConfig domain, std::uint64_t seed)
      : domain_(std::move(domain)), rng_(seed) {}
  Utterance Next() { return GenerateUtterance(domain_, rng_); }
  const DomainConfig &Config() const { return domain_; }

 private:
  DomainConfig domain_;
  Rng rng_;
};

// Datasets on disk: one JSON object per line,
//   {"domain":"target","frames":T,"dim":F,"blank":0,
//    "features":[T*F numbers, row major],"tokens":[...],"alignment":[...]}
// where "alignment" lists the emission frame of each token. Doubles are
// written with round-trip precision.
void SaveDataset(const std::string &path, std::span<const Utterance> data);
/// Throws std::runtime_error naming the line on malformed input.
std::vector<Utterance> LoadDataset(const std::string &path);

}  // namespace ftsim

#endif  // FTSIM_SYNTHETIC_DATA_H_
