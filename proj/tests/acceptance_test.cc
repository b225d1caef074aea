// tests/acceptance_test.cc

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

// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "ftsim/device_trainer.h"
#include "ftsim/experiment.h"
#include "ftsim/fl_server.h"
#include "ftsim/rnnt_lattice.h"
#include "ftsim/transducer_model.h"
#include "test_util.h"

namespace ftsim {
namespace {

using testing::FiniteDifferenceGradient;
using testing::RandomFeatures;
using testing::RandomLattice;
using testing::RelativeError;

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

int failures = 0;

void Report(int id, const char *name, bool ok, const std::string &detail,
            double seconds) {
  std::printf("[%s] %2d %s: %s (%.1f s)\n", ok ? "PASS" : "FAIL", id, name,
              detail.c_str(), seconds);
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string Fmt(const char *fmt, double a, double b = 0, double c = 0,
                double d = 0) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, a, b, c, d);
  return buf;
}

void LossOracle() {
  const auto start = Clock::now();
  Rng rng(1001);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const LogitLattice lat =
        RandomLattice(rng, rng.UniformInt(1, 5), rng.UniformInt(0, 4),
                      rng.UniformInt(2, 6));
    worst = std::max(worst, std::abs(RnntLossFull(lat) - BruteForceLoss(lat)));
  }
  const double secs = Seconds(start);
  Report(1, "loss oracle", worst < 1e-10 && secs < 5.0,
         Fmt("200 lattices, max |full - brute force| = %.2e", worst), secs);
}

void GradientChecks() {
  const auto start = Clock::now();
  Rng rng(1002);
  double lattice_err = 0.0;
  for (int i = 0; i < 50; ++i) {
    LogitLattice lat = RandomLattice(rng, rng.UniformInt(1, 5),
                                     rng.UniformInt(0, 4), rng.UniformInt(2, 6));
    const auto full = FiniteDifferenceGradient(
        lat.Scores(), [&] { return RnntLossFull(lat); });
    lattice_err = std::max(lattice_err, RelativeError(RnntGrad(lat), full));

    const int bl = rng.UniformInt(0, 2), br = rng.UniformInt(0, 2);
    const BandMask band =
        MakeBandMask(ViterbiAlign(lat), bl, br, lat.Frames(), lat.TargetLen());
    const auto restricted = FiniteDifferenceGradient(
        lat.Scores(), [&] { return RestrictedLoss(lat, band); });
    lattice_err = std::max(lattice_err,
                           RelativeError(RestrictedGrad(lat, band), restricted));
  }

  ModelConfig c;
  c.feat_dim = 3;
  c.hidden_dim = 4;
  c.joint_dim = 5;
  c.vocab = 6;
  double model_err = 0.0;
  for (int i = 0; i < 3; ++i) {
    c.seed = 500 + i;
    ParameterSet p = InitParams(c);
    for (double &v : p.Group("bias_all").values) v = rng.Uniform(-0.3, 0.3);
    const Features x = RandomFeatures(rng, rng.UniformInt(3, 6), c.feat_dim);
    std::vector<int> y(rng.UniformInt(1, 3));
    for (int &k : y) k = rng.UniformInt(1, c.vocab - 1);
    const ForwardResult r = ModelForward(c, p, x, y);
    const ParameterSet analytic =
        ModelBackward(c, p, r.cache, RnntGrad(r.lattice));
    for (ParameterGroup &g : p.Groups()) {
      const auto fd = FiniteDifferenceGradient(g.values, [&] {
        return RnntLossFull(ModelForward(c, p, x, y).lattice);
      });
      model_err =
          std::max(model_err, RelativeError(analytic.Group(g.name).values, fd));
    }
  }
  const double secs = Seconds(start);
  Report(2, "gradient checks",
         lattice_err < 1e-5 && model_err < 1e-4 && secs < 60.0,
         Fmt("lattice grads max rel err %.2e over 50 instances; D=4 model max "
             "rel err %.2e",
             lattice_err, model_err),
         secs);
}

void BandSaturation() {
  const auto start = Clock::now();
  Rng rng(1003);
  double saturation_err = 0.0;
  int violations = 0;
  for (int i = 0; i < 100; ++i) {
    const int T = rng.UniformInt(1, 7), U = rng.UniformInt(0, 5);
    const LogitLattice lat = RandomLattice(rng, T, U, rng.UniformInt(2, 6));
    // Reference path: tokens at random sorted frames.
    std::vector<int> frames(U);
    for (int &f : frames) f = rng.UniformInt(0, T - 1);
    std::sort(frames.begin(), frames.end());
    const AlignmentPath ref =
        PathFromEmissionFrames(frames, lat.Targets(), T, lat.BlankId());
    const int wide = std::max(T, U);
    saturation_err = std::max(
        saturation_err,
        std::abs(RestrictedLoss(lat, MakeBandMask(ref, wide, wide, T, U)) -
                 RnntLossFull(lat)));
    double prev = INFINITY;
    for (int b = 0; b <= wide; ++b) {
      const double loss = RestrictedLoss(lat, MakeBandMask(ref, b, b, T, U));
      if (loss > prev) ++violations;
      prev = loss;
    }
  }
  Report(3, "band saturation and monotonicity",
         saturation_err <= 1e-12 && violations == 0,
         Fmt("100 instances, saturated |restricted - full| = %.2e, "
             "monotonicity violations = %.0f",
             saturation_err, violations),
         Seconds(start));
}

void ViterbiOptimality() {
  const auto start = Clock::now();
  Rng rng(1004);
  int instances = 0, mismatches = 0, above_total = 0;
  for (int T = 1; T <= 9; ++T) {
    for (int U = 0; U <= 6; ++U) {
      if (CountAlignments(T, U) > 10000) continue;
      for (int rep = 0; rep < 4; ++rep) {
        const LogitLattice lat = RandomLattice(rng, T, U, rng.UniformInt(2, 6));
        double best = -INFINITY;
        for (const AlignmentPath &p : EnumerateAlignments(lat))
          best = std::max(best, p.log_prob);
        const AlignmentPath v = ViterbiAlign(lat);
        mismatches += v.log_prob != best;
        above_total += v.log_prob > -RnntLossFull(lat);
        ++instances;
      }
    }
  }
  Report(4, "Viterbi optimality", mismatches == 0 && above_total == 0,
         Fmt("%.0f enumerable instances, %.0f not exactly optimal, %.0f above "
             "total log-prob",
             instances, mismatches, above_total),
         Seconds(start));
}

// Small model and target stream shared by the protocol checks.
struct ProtocolFixture {
  ModelConfig model;
  DomainPair domains;
  std::shared_ptr<const ParameterSet> w0;

  ProtocolFixture() {
    model.seed = 77;
    domains = MakeDomains(DomainSpec(), 77);
    w0 = std::make_shared<const ParameterSet>(InitParams(model));
  }
  UtteranceSource Stream(std::uint64_t seed) const {
    auto s = std::make_shared<UtteranceStream>(domains.target, seed);
    return [s]() -> std::optional<Utterance> { return s->Next(); };
  }
};

void FlEqualsSgd() {
  const auto start = Clock::now();
  ProtocolFixture fx;
  TrainerConfig tc;
  tc.local_updates = 1;
  tc.optimizer = OptimizerKind::kSgd;
  tc.learning_rate = 0.05;
  tc.loss = LossKind::kSr;

  std::vector<Device> fl;
  fl.emplace_back(0, fx.model, fx.w0, fx.Stream(5));
  Device central(0, fx.model, fx.w0, fx.Stream(5));
  ServerState state = ServerState::Initial(*fx.w0, 0.0, tc.mask);
  ParameterSet w = *fx.w0;
  Optimizer sgd(tc);
  Rng unused(0);
  double worst = 0.0;
  for (int step = 0; step < 100; ++step) {
    RunRound(state, fl, tc, {3, 1});
    TrainStep(fx.model, w, *central.NextBatch(tc), tc, sgd, unused);
    const ParameterSet diff = state.w_curr - w;
    for (const auto &g : diff.Groups())
      for (double v : g.values) worst = std::max(worst, std::abs(v));
  }
  const double moved = (w - *fx.w0).L2Norm();
  Report(5, "FL equals SGD", worst <= 1e-12 && moved > 0.0,
         Fmt("100 rounds, max |w_fl - w_sgd| = %.2e, |w_100 - w_0| = %.3f",
             worst, moved),
         Seconds(start));
}

void MomentumRecurrence() {
  const auto start = Clock::now();
  ProtocolFixture fx;
  std::vector<Device> devices;
  for (int i = 0; i < 3; ++i)
    devices.emplace_back(i, fx.model, fx.w0, fx.Stream(10 + i));
  TrainerConfig tc;
  tc.local_updates = 2;
  tc.learning_rate = 1e-3;
  ServerState state = ServerState::Initial(*fx.w0, 0.8, tc.mask);
  // Two real rounds give the history a velocity.
  for (int r = 0; r < 2; ++r) RunRound(state, devices, tc, {4, 1});

  tc.learning_rate = 0.0;  // every device delta is exactly zero
  bool exact = true;
  for (int r = 0; r < 10; ++r) {
    ParameterSet expect = state.w_curr;
    auto &eg = expect.Groups();
    const auto &cg = state.w_curr.Groups();
    const auto &pg = state.w_prev.Groups();
    for (std::size_t i = 0; i < eg.size(); ++i)
      for (std::size_t j = 0; j < eg[i].values.size(); ++j)
        eg[i].values[j] =
            cg[i].values[j] + 0.8 * (cg[i].values[j] - pg[i].values[j]);
    const RoundMetrics m = RunRound(state, devices, tc, {4, 1});
    exact = exact && m.delta_norm == 0.0 && state.w_curr.BitEqual(expect);
  }
  const double velocity = (state.w_curr - state.w_prev).L2Norm();
  Report(6, "momentum recurrence", exact && velocity > 0.0,
         std::string(exact ? "bit-exact" : "NOT exact") +
             Fmt(" for 10 zero-delta rounds at beta 0.8, final |w_t - w_t-1| "
                 "= %.3e",
                 velocity),
         Seconds(start));
}

// Pretrained checkpoints keyed by seed; both presets share the source side.
std::map<std::uint64_t, ParameterSet> pretrained;

const ParameterSet &PretrainedFor(const ExperimentConfig &c) {
  auto it = pretrained.find(c.seed);
  if (it == pretrained.end())
    it = pretrained.emplace(c.seed, Pretrain(c).params).first;
  return it->second;
}

bool SameSourceSide(const ExperimentConfig &a, const ExperimentConfig &b) {
  const DomainPair da = ExperimentDomains(a), db = ExperimentDomains(b);
  return da.source.prototypes == db.source.prototypes &&
         da.source.token_prior == db.source.token_prior &&
         da.source.noise_sigma == db.source.noise_sigma &&
         a.model == b.model && a.pretrain_steps == b.pretrain_steps &&
         a.pretrain_lr == b.pretrain_lr &&
         a.pretrain_batch == b.pretrain_batch &&
         a.pretrain_band_left == b.pretrain_band_left &&
         a.pretrain_band_right == b.pretrain_band_right;
}

void MaskConservation() {
  const auto start = Clock::now();
  ExperimentConfig c = ExperimentConfig::Preset("device");
  c.seed = 42;
  c.rounds = 10;
  c.trainer.mask = AdaptationMask::Preset("keyvalue");
  const ParameterSet &w0 = PretrainedFor(c);
  const AdaptResult r = Adapt(c, w0);
  int frozen_ok = 0, frozen = 0, moved = 0;
  for (const ParameterGroup &g : r.final_state.w_curr.Groups()) {
    const bool same = g.values == w0.Group(g.name).values;
    if (c.trainer.mask.Contains(g.name)) {
      moved += !same;
    } else {
      ++frozen;
      frozen_ok += same;
    }
  }
  Report(7, "mask conservation", frozen_ok == frozen && moved == 2,
         Fmt("%.0f/%.0f frozen groups bit-identical to w0 after 10 keyvalue "
             "rounds; %.0f/2 keyvalue groups moved",
             frozen_ok, frozen, moved),
         Seconds(start));
}

double FinalTargetTer(const AdaptResult &r) { return r.rows.back().target_ter; }

void EndToEnd() {
  const auto start = Clock::now();
  int reduced = 0, supervised_better = 0;
  std::string detail;
  for (std::uint64_t seed : {41, 42, 43}) {
    ExperimentConfig c = ExperimentConfig::Preset("device");
    c.seed = seed;
    const ParameterSet &w0 = PretrainedFor(c);
    const AdaptResult semi = Adapt(c, w0);
    const AdaptResult sup = AdaptCentralized(c, w0);
    const double before = semi.rows.front().target_ter;
    const double after = FinalTargetTer(semi);
    const double supervised = FinalTargetTer(sup);
    const double rel = before > 0 ? (before - after) / before : 0.0;
    reduced += rel >= 0.10;
    supervised_better += supervised <= after;
    detail += Fmt("seed %.0f: TER %.4f -> %.4f (%.1f%%)", double(seed), before,
                  after, -100.0 * rel) +
              Fmt(", supervised %.4f; ", supervised);
  }
  const double secs = Seconds(start);
  Report(8, "end-to-end direction",
         reduced >= 2 && supervised_better >= 2 && secs < 600.0,
         detail + Fmt("reduced >=10%% in %.0f/3, supervised <= semi in %.0f/3",
                      reduced, supervised_better),
         secs);
}

void FilteringAblation() {
  const auto start = Clock::now();
  int better = 0, keep_in_range = 0;
  std::string detail;
  for (std::uint64_t seed : {41, 42, 43}) {
    ExperimentConfig on = ExperimentConfig::Preset("video");
    on.seed = seed;
    ExperimentConfig device = ExperimentConfig::Preset("device");
    device.seed = seed;
    const ParameterSet w0 = SameSourceSide(on, device)
                                ? PretrainedFor(device)
                                : Pretrain(on).params;
    ExperimentConfig off = on;
    off.trainer.filter_threshold = -INFINITY;
    const AdaptResult r_on = Adapt(on, w0), r_off = Adapt(off, w0);
    double keep = 0.0;
    for (std::size_t i = 1; i < r_on.rows.size(); ++i) keep += r_on.rows[i].keep_rate;
    keep /= double(r_on.rows.size() - 1);
    better += FinalTargetTer(r_on) <= FinalTargetTer(r_off);
    keep_in_range += keep > 0.5 && keep < 0.95;
    detail += Fmt("seed %.0f: on %.4f vs off %.4f, keep %.3f; ", double(seed),
                  FinalTargetTer(r_on), FinalTargetTer(r_off), keep);
  }
  Report(9, "filtering ablation", better >= 2 && keep_in_range == 3,
         detail + Fmt("filter-on <= off in %.0f/3, keep-rate in (0.5, 0.95) "
                      "in %.0f/3",
                      better, keep_in_range),
         Seconds(start));
}

void Determinism() {
  const auto start = Clock::now();
  ExperimentConfig c = ExperimentConfig::Preset("video");
  c.seed = 42;
  c.rounds = 6;
  // Exercise every random path: filtering, augmentation, several devices.
  c.trainer.augment.enabled = true;
  c.trainer.augment.noise_sigma = 0.05;
  c.trainer.augment.time_mask_max = 2;
  c.trainer.augment.feat_mask_max = 1;
  ExperimentConfig device = ExperimentConfig::Preset("device");
  device.seed = 42;
  const ParameterSet w0 =
      SameSourceSide(c, device) ? PretrainedFor(device) : Pretrain(c).params;
  std::ostringstream one, eight;
  c.workers = 1;
  WriteMetricsCsv(one, Adapt(c, w0).rows);
  c.workers = 8;
  WriteMetricsCsv(eight, Adapt(c, w0).rows);
  const bool same = one.str() == eight.str();
  Report(10, "determinism", same,
         Fmt("1-worker and 8-worker metrics CSVs (%.0f bytes) ",
             double(one.str().size())) +
             (same ? "byte-identical" : "DIFFER"),
         Seconds(start));
}

}  // namespace
}  // namespace ftsim

int main() {
  const auto start = ftsim::Clock::now();
  const std::vector<std::function<void()>> criteria = {
      ftsim::LossOracle,         ftsim::GradientChecks,
      ftsim::BandSaturation,     ftsim::ViterbiOptimality,
      ftsim::FlEqualsSgd,        ftsim::MomentumRecurrence,
      ftsim::MaskConservation,   ftsim::EndToEnd,
      ftsim::FilteringAblation,  ftsim::Determinism};
  for (const auto &run : criteria) {
    try {
      run();
    } catch (const std::exception &e) {
      std::printf("[FAIL] criterion aborted: %s\n", e.what());
      ++ftsim::failures;
    }
  }
  std::printf("%d of %zu criteria failed, total %.1f s\n", ftsim::failures,
              criteria.size(), ftsim::Seconds(start));
  return ftsim::failures == 0 ? 0 : 1;
}
