// src/synthetic_data.cc

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

#include "ftsim/synthetic_data.h"

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace ftsim {

namespace {

[[noreturn]] void Fail(const char *what) {
  throw std::invalid_argument(std::string("domain config: ") + what);
}

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Draws a token from the prior, never `previous` and never blank.
int SampleToken(const DomainConfig &d, int previous, Rng &rng) {
  double total = 0.0;
  for (int k = 0; k < d.vocab; ++k)
    if (k != d.blank_id && k != previous) total += d.token_prior[k];
  double x = rng.Uniform() * total;
  int last = -1;
  for (int k = 0; k < d.vocab; ++k) {
    if (k == d.blank_id || k == previous || d.token_prior[k] <= 0.0) continue;
    last = k;
    x -= d.token_prior[k];
    if (x < 0.0) return k;
  }
  return last;
}

}  // namespace

void DomainConfig::Validate() const {
  if (vocab < 3) Fail("vocab must be >= 3");
  if (blank_id < 0 || blank_id >= vocab) Fail("blank_id out of range");
  if (feat_dim < 1) Fail("feat_dim must be >= 1");
  if (token_prior.size() != std::size_t(vocab)) Fail("token_prior size");
  int positive = 0;
  for (int k = 0; k < vocab; ++k) {
    if (!(token_prior[k] >= 0.0) || !std::isfinite(token_prior[k]))
      Fail("token_prior entries must be finite and >= 0");
    if (k != blank_id && token_prior[k] > 0.0) ++positive;
  }
  if (positive < 2) Fail("need two tokens with positive prior");
  if (min_tokens < 0 || max_tokens < min_tokens) Fail("token count range");
  if (d_min < 1 || d_max < d_min) Fail("duration range");
  if (prototypes.size() != std::size_t(vocab) * feat_dim)
    Fail("prototypes size");
  if (!(noise_sigma >= 0.0)) Fail("noise_sigma must be >= 0");
}

DomainPair MakeDomains(const DomainSpec &spec, std::uint64_t seed) {
  DomainConfig src;
  src.domain = Domain::kSource;
  src.vocab = spec.vocab;
  src.feat_dim = spec.feat_dim;
  src.min_tokens = spec.min_tokens;
  src.max_tokens = spec.max_tokens;
  src.d_min = spec.d_min;
  src.d_max = spec.d_max;
  src.noise_sigma = spec.source_noise;
  if (spec.vocab < 3 || spec.feat_dim < 1) Fail("vocab or feat_dim too small");

  const int V = spec.vocab, F = spec.feat_dim;
  Rng proto_rng(MixSeed(seed, HashName("prototypes")));
  src.prototypes.assign(std::size_t(V) * F, 0.0);
  for (int k = 1; k < V; ++k)
    for (int f = 0; f < F; ++f)
      src.prototypes[std::size_t(k) * F + f] =
          spec.prototype_scale * proto_rng.Normal();

  // Rank order of tokens for the prior, shuffled per seed.
  std::vector<int> order(V - 1);
  std::iota(order.begin(), order.end(), 1);
  Rng prior_rng(MixSeed(seed, HashName("prior")));
  for (int i = int(order.size()) - 1; i > 0; --i)
    std::swap(order[i], order[prior_rng.UniformInt(0, i)]);
  src.token_prior.assign(V, 0.0);
  DomainConfig tgt = src;
  const double span = std::max(1, V - 2);
  for (int r = 0; r < V - 1; ++r) {
    src.token_prior[order[r]] = std::exp(-spec.prior_skew * r / span);
    tgt.token_prior[order[r]] = std::exp(-spec.prior_skew * (V - 2 - r) / span);
  }

  tgt.domain = Domain::kTarget;
  tgt.noise_sigma = spec.target_noise;
  tgt.perturbation_scale = spec.target_shift;
  Rng shift_rng(MixSeed(seed, HashName("target_shift")));
  for (int k = 1; k < V; ++k) {
    std::span<const double> p = src.Prototype(k);
    std::vector<double> dir(F);
    for (double &v : dir) v = shift_rng.Normal();
    const double pp = Dot(p, p);
    if (pp > 0.0) {
      const double c = Dot(dir, p) / pp;
      for (int f = 0; f < F; ++f) dir[f] -= c * p[f];
    }
    const double dn = std::sqrt(Dot(dir, dir));
    const double scale = dn > 0.0 ? spec.target_shift * std::sqrt(pp) / dn : 0.0;
    for (int f = 0; f < F; ++f)
      tgt.prototypes[std::size_t(k) * F + f] = p[f] + scale * dir[f];
  }
  src.Validate();
  tgt.Validate();
  return {std::move(src), std::move(tgt)};
}

Utterance GenerateUtterance(const DomainConfig &d, Rng &rng) {
  const int U = rng.UniformInt(d.min_tokens, d.max_tokens);
  Utterance utt;
  utt.domain = d.domain;
  std::vector<int> starts;
  std::vector<int> durations;
  int frames = 0, previous = -1;
  for (int u = 0; u < U; ++u) {
    const int k = SampleToken(d, previous, rng);
    utt.tokens.push_back(k);
    starts.push_back(frames);
    durations.push_back(rng.UniformInt(d.d_min, d.d_max));
    frames += durations.back();
    previous = k;
  }
  // An empty utterance still needs a frame to carry the final blank.
  if (frames == 0) frames = d.d_min;

  utt.features = Features(frames, d.feat_dim);
  int t = 0;
  for (int u = 0; u < U; ++u) {
    std::span<const double> p = d.Prototype(utt.tokens[u]);
    for (int i = 0; i < durations[u]; ++i, ++t)
      for (int f = 0; f < d.feat_dim; ++f)
        utt.features.At(t, f) = p[f] + d.noise_sigma * rng.Normal();
  }
  for (; t < frames; ++t)
    for (int f = 0; f < d.feat_dim; ++f)
      utt.features.At(t, f) = d.noise_sigma * rng.Normal();
  utt.true_alignment =
      PathFromEmissionFrames(starts, utt.tokens, frames, d.blank_id);
  return utt;
}

std::vector<Utterance> GenDataset(const DomainConfig &domain, int n,
                                  std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("gen dataset: n must be >= 1");
  domain.Validate();
  Rng rng(seed);
  std::vector<Utterance> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(GenerateUtterance(domain, rng));
  return out;
}

void SaveDataset(const std::string &path, std::span<const Utterance> data) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error(path + ": cannot open for writing");
  for (const Utterance &u : data) {
    const int blank =
        u.true_alignment.steps.empty() ? 0 : u.true_alignment.steps.back().label;
    nlohmann::json j;
    j["domain"] = DomainName(u.domain);
    j["frames"] = u.features.frames;
    j["dim"] = u.features.dim;
    j["blank"] = blank;
    j["features"] = u.features.values;
    j["tokens"] = u.tokens;
    j["alignment"] = EmissionFrames(u.true_alignment);
    os << j.dump() << '\n';
  }
  if (!os) throw std::runtime_error(path + ": write failed");
}

std::vector<Utterance> LoadDataset(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error(path + ": cannot open");
  std::vector<Utterance> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      Utterance u;
      const std::string domain = j.at("domain").get<std::string>();
      if (domain != "source" && domain != "target")
        throw std::runtime_error("unknown domain '" + domain + "'");
      u.domain = domain == "source" ? Domain::kSource : Domain::kTarget;
      u.features.frames = j.at("frames").get<int>();
      u.features.dim = j.at("dim").get<int>();
      u.features.values = j.at("features").get<std::vector<double>>();
      if (u.features.frames < 1 || u.features.dim < 1 ||
          u.features.values.size() !=
              std::size_t(u.features.frames) * u.features.dim)
        throw std::runtime_error("feature shape mismatch");
      u.tokens = j.at("tokens").get<std::vector<int>>();
      const auto frames = j.at("alignment").get<std::vector<int>>();
      if (frames.size() != u.tokens.size())
        throw std::runtime_error("alignment length differs from tokens");
      for (std::size_t i = 0; i < frames.size(); ++i)
        if (frames[i] < 0 || frames[i] >= u.features.frames ||
            (i > 0 && frames[i] < frames[i - 1]))
          throw std::runtime_error("alignment frames out of order or range");
      u.true_alignment = PathFromEmissionFrames(
          frames, u.tokens, u.features.frames, j.at("blank").get<int>());
      out.push_back(std::move(u));
    } catch (const std::exception &e) {
      throw std::runtime_error(where + ": " + e.what());
    }
  }
  return out;
}

}  // namespace ftsim
