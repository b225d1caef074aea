// src/device_trainer.cc

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

#include "ftsim/device_trainer.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace ftsim {

namespace {

[[noreturn]] void Fail(const std::string &what) {
  throw std::invalid_argument("trainer config: " + what);
}

// Emission frames of `path` divided by rate, floored and clamped.
std::vector<int> ScaledFrames(const AlignmentPath &path, double rate,
                              int frames) {
  std::vector<int> out = EmissionFrames(path);
  for (int &a : out)
    a = std::min(frames - 1, static_cast<int>(std::floor(a / rate)));
  return out;
}

std::vector<int> EmittedLabels(const AlignmentPath &path) {
  std::vector<int> labels;
  for (std::size_t i = 0; i + 1 < path.steps.size(); ++i)
    if (path.steps[i + 1].u == path.steps[i].u + 1)
      labels.push_back(path.steps[i].label);
  return labels;
}

const AlignmentPath &ReferenceAlignment(const PseudoExample &ex) {
  if (ex.true_alignment && ex.true_tokens == ex.Targets())
    return *ex.true_alignment;
  return ex.cached_alignment;
}

}  // namespace

std::string_view DomainName(Domain d) {
  return d == Domain::kSource ? "source" : "target";
}

std::string_view LossKindName(LossKind k) {
  switch (k) {
    case LossKind::kFull: return "full";
    case LossKind::kAr: return "ar";
    case LossKind::kSr: return "sr";
  }
  return "?";
}

LossKind ParseLossKind(std::string_view s) {
  if (s == "full") return LossKind::kFull;
  if (s == "ar") return LossKind::kAr;
  if (s == "sr") return LossKind::kSr;
  throw std::invalid_argument("unknown loss kind '" + std::string(s) + "'");
}

std::string_view AlignmentSourceName(AlignmentSource s) {
  return s == AlignmentSource::kViterbiOnline ? "viterbi_online" : "beam_cached";
}

AlignmentSource ParseAlignmentSource(std::string_view s) {
  if (s == "viterbi_online") return AlignmentSource::kViterbiOnline;
  if (s == "beam_cached") return AlignmentSource::kBeamCached;
  throw std::invalid_argument("unknown alignment source '" + std::string(s) +
                              "'");
}

std::string_view OptimizerName(OptimizerKind k) {
  return k == OptimizerKind::kSgd ? "sgd" : "adam";
}

OptimizerKind ParseOptimizer(std::string_view s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "adam") return OptimizerKind::kAdam;
  throw std::invalid_argument("unknown optimizer '" + std::string(s) + "'");
}

void TrainerConfig::Validate() const {
  if (local_updates < 1) Fail("local_updates must be >= 1");
  if (batch_size < 1) Fail("batch_size must be >= 1");
  if (band_left < 0 || band_right < 0) Fail("band widths must be >= 0");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    Fail("learning_rate must be finite and >= 0");
  if (std::isnan(filter_threshold)) Fail("filter_threshold is NaN");
  if (beam_size < 1) Fail("beam_size must be >= 1");
  if (max_emits_per_frame < 1) Fail("max_emits_per_frame must be >= 1");
  if (augment.speed_rates.empty()) Fail("speed_rates is empty");
  for (double r : augment.speed_rates)
    if (!(r > 0.0) || !std::isfinite(r)) Fail("speed rates must be positive");
  if (!(augment.noise_sigma >= 0.0)) Fail("noise_sigma must be >= 0");
  if (augment.time_mask_max < 0 || augment.feat_mask_max < 0)
    Fail("mask widths must be >= 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
      !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.epsilon > 0.0))
    Fail("bad adam constants");
}

PseudoExample LabelExample(const ModelConfig &model, const ParameterSet &w0,
                           const Features &features, int beam_size,
                           int max_emits_per_frame) {
  std::vector<Hypothesis> hyps =
      BeamDecode(model, w0, features, beam_size, max_emits_per_frame);
  PseudoExample ex;
  ex.features = features;
  ex.hypothesis = std::move(hyps.front());
  ex.cached_alignment = ex.hypothesis.alignment;
  return ex;
}

PseudoExample LabelExample(const ModelConfig &model, const ParameterSet &w0,
                           const Utterance &utt, int beam_size,
                           int max_emits_per_frame) {
  PseudoExample ex =
      LabelExample(model, w0, utt.features, beam_size, max_emits_per_frame);
  ex.true_alignment = utt.true_alignment;
  ex.true_tokens = utt.tokens;
  return ex;
}

PseudoExample TrueLabelExample(const Utterance &utt) {
  PseudoExample ex;
  ex.features = utt.features;
  ex.hypothesis.tokens = utt.tokens;
  ex.hypothesis.alignment = utt.true_alignment;
  ex.hypothesis.frames = utt.features.frames;
  ex.cached_alignment = utt.true_alignment;
  ex.true_alignment = utt.true_alignment;
  ex.true_tokens = utt.tokens;
  return ex;
}

ExampleQueue::ExampleQueue(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("queue capacity must be > 0");
}

bool ExampleQueue::Push(PseudoExample ex) {
  if (Full()) return false;
  items_.push_back(std::move(ex));
  return true;
}

std::optional<PseudoExample> ExampleQueue::Pop() {
  std::optional<PseudoExample> ex;
  if (items_.empty()) return ex;
  ex.emplace(std::move(items_.front()));
  items_.pop_front();
  return ex;
}

std::vector<PseudoExample> ExampleQueue::PopBatch(std::size_t n) {
  std::vector<PseudoExample> out;
  while (out.size() < n && !items_.empty()) {
    out.push_back(std::move(items_.front()));
    items_.pop_front();
  }
  return out;
}

std::vector<PseudoExample> FilterBatch(std::span<const PseudoExample> batch,
                                       double threshold) {
  std::vector<PseudoExample> kept;
  for (const PseudoExample &ex : batch)
    if (Confidence(ex.hypothesis) >= threshold) kept.push_back(ex);
  return kept;
}

Features Augment(const Features &in, Rng &rng, const AugmentConfig &config,
                 double *chosen_rate) {
  const auto &rates = config.speed_rates;
  const double r = rates.size() == 1
                       ? rates[0]
                       : rates[rng.UniformInt(0, int(rates.size()) - 1)];
  if (chosen_rate) *chosen_rate = r;

  const int T = in.frames, F = in.dim;
  const int out_frames =
      std::max(1, static_cast<int>(std::llround(double(T) / r)));
  Features out(out_frames, F);
  for (int i = 0; i < out_frames; ++i) {
    const int src = std::min(T - 1, static_cast<int>(std::floor(i * r)));
    std::copy_n(in.Row(src).begin(), F, out.Row(i).begin());
  }

  if (config.noise_sigma > 0.0)
    for (double &v : out.values) v += config.noise_sigma * rng.Normal();

  if (config.time_mask_max > 0) {
    const int w = int(rng.UniformInt(0, std::min(config.time_mask_max, out_frames)));
    const int start = int(rng.UniformInt(0, out_frames - w));
    for (int t = start; t < start + w; ++t)
      std::fill_n(out.Row(t).begin(), F, 0.0);
  }
  if (config.feat_mask_max > 0) {
    const int w = int(rng.UniformInt(0, std::min(config.feat_mask_max, F)));
    const int start = int(rng.UniformInt(0, F - w));
    for (int t = 0; t < out_frames; ++t)
      for (int f = start; f < start + w; ++f) out.At(t, f) = 0.0;
  }
  return out;
}

AlignmentPath RescaleAlignment(const AlignmentPath &path, double rate,
                               int frames) {
  if (path.steps.empty()) return path;
  const std::vector<int> labels = EmittedLabels(path);
  const int blank = path.steps.back().label;
  return PathFromEmissionFrames(ScaledFrames(path, rate, frames), labels,
                                frames, blank);
}

PseudoExample AugmentExample(const PseudoExample &ex, Rng &rng,
                             const AugmentConfig &config) {
  PseudoExample out;
  double rate = 1.0;
  out.features = Augment(ex.features, rng, config, &rate);
  const int T = out.features.frames;
  out.hypothesis = ex.hypothesis;
  out.hypothesis.frames = T;
  out.hypothesis.alignment = RescaleAlignment(ex.hypothesis.alignment, rate, T);
  out.cached_alignment = RescaleAlignment(ex.cached_alignment, rate, T);
  if (ex.true_alignment)
    out.true_alignment = RescaleAlignment(*ex.true_alignment, rate, T);
  out.true_tokens = ex.true_tokens;
  return out;
}

BatchGradient ComputeBatchGradient(const ModelConfig &model,
                                   const ParameterSet &params,
                                   std::span<const PseudoExample> batch,
                                   const TrainerConfig &config) {
  BatchGradient out;
  out.grad = params.ZerosLike();
  double loss_sum = 0.0;
  for (const PseudoExample &ex : batch) {
    ForwardResult fwd = ModelForward(model, params, ex.features, ex.Targets());
    const int T = fwd.lattice.Frames(), U = fwd.lattice.TargetLen();
    std::optional<BandMask> band;
    if (config.loss == LossKind::kAr) {
      band = MakeBandMask(ReferenceAlignment(ex), config.band_left,
                          config.band_right, T, U);
    } else if (config.loss == LossKind::kSr) {
      const AlignmentPath ref =
          config.alignment_source == AlignmentSource::kViterbiOnline
              ? ViterbiAlign(fwd.lattice)
              : ex.cached_alignment;
      band = MakeBandMask(ref, config.band_left, config.band_right, T, U);
    }
    LossAndGrad lg = RnntLossAndGrad(fwd.lattice, band ? &*band : nullptr);
    if (!std::isfinite(lg.loss))
      throw std::runtime_error("non-finite training loss");
    loss_sum += lg.loss;
    out.cells_touched += lg.cells_touched;
    out.grad += ModelBackward(model, params, fwd.cache, lg.grad);
    ++out.examples;
  }
  if (out.examples > 0) {
    const double inv = 1.0 / double(out.examples);
    out.grad *= inv;
    out.mean_loss = loss_sum * inv;
  }
  return out;
}

void SgdStep(ParameterSet &params, const ParameterSet &grad, double lr,
             const AdaptationMask *mask) {
  if (!params.SameStructure(grad))
    throw std::invalid_argument("sgd step: gradient structure mismatch");
  auto &pg = params.Groups();
  const auto &gg = grad.Groups();
  for (std::size_t i = 0; i < pg.size(); ++i) {
    if (mask && !mask->Contains(pg[i].name)) continue;
    for (std::size_t j = 0; j < pg[i].values.size(); ++j)
      pg[i].values[j] -= lr * gg[i].values[j];
  }
}

void AdamStep(ParameterSet &params, const ParameterSet &grad, AdamState &state,
              double lr, const AdamConfig &config, const AdaptationMask *mask) {
  if (!params.SameStructure(grad))
    throw std::invalid_argument("adam step: gradient structure mismatch");
  if (state.step == 0 || !state.m.SameStructure(params)) {
    state.m = params.ZerosLike();
    state.v = params.ZerosLike();
    state.step = 0;
  }
  ++state.step;
  const double b1 = config.beta1, b2 = config.beta2;
  const double bc1 = 1.0 - std::pow(b1, double(state.step));
  const double bc2 = 1.0 - std::pow(b2, double(state.step));
  auto &pg = params.Groups();
  auto &mg = state.m.Groups();
  auto &vg = state.v.Groups();
  const auto &gg = grad.Groups();
  for (std::size_t i = 0; i < pg.size(); ++i) {
    if (mask && !mask->Contains(pg[i].name)) continue;
    auto &w = pg[i].values;
    auto &m = mg[i].values;
    auto &v = vg[i].values;
    const auto &g = gg[i].values;
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      w[j] -= lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

void Optimizer::Step(ParameterSet &params, const ParameterSet &grad) {
  if (config_.optimizer == OptimizerKind::kSgd)
    SgdStep(params, grad, config_.learning_rate, &config_.mask);
  else
    AdamStep(params, grad, adam_, config_.learning_rate, config_.adam,
             &config_.mask);
}

StepStats TrainStep(const ModelConfig &model, ParameterSet &params,
                    std::span<const PseudoExample> batch,
                    const TrainerConfig &config, Optimizer &optimizer,
                    Rng &rng) {
  StepStats stats;
  stats.popped = batch.size();
  std::vector<PseudoExample> kept = FilterBatch(batch, config.filter_threshold);
  stats.kept = kept.size();
  if (kept.empty()) return stats;
  if (config.augment.enabled)
    for (PseudoExample &ex : kept) ex = AugmentExample(ex, rng, config.augment);

  BatchGradient bg = ComputeBatchGradient(model, params, kept, config);
  optimizer.Step(params, bg.grad);
  stats.mean_loss = bg.mean_loss;
  stats.cells_touched = bg.cells_touched;
  stats.updated = true;
  return stats;
}

Device::Device(int id, ModelConfig model,
               std::shared_ptr<const ParameterSet> w0, UtteranceSource source,
               std::size_t queue_capacity)
    : id_(id),
      model_(std::move(model)),
      w0_(std::move(w0)),
      source_(std::move(source)),
      queue_(queue_capacity) {
  if (!w0_) throw std::invalid_argument("device: null frozen parameters");
  if (!source_) throw std::invalid_argument("device: empty data source");
}

std::optional<std::vector<PseudoExample>> Device::NextBatch(
    const TrainerConfig &config) {
  const std::size_t need = std::size_t(config.batch_size);
  if (need > queue_.Capacity())
    throw std::invalid_argument("device: batch_size exceeds queue capacity");
  while (queue_.Size() < need) {
    std::optional<Utterance> utt = source_();
    if (!utt) return std::nullopt;
    queue_.Push(config.use_true_labels
                    ? TrueLabelExample(*utt)
                    : LabelExample(model_, *w0_, *utt, config.beam_size,
                                   config.max_emits_per_frame));
  }
  return queue_.PopBatch(need);
}

DeviceUpdate Device::LocalRound(const ParameterSet &w_in, int round,
                                const TrainerConfig &config,
                                std::uint64_t seed) {
  config.Validate();
  config.mask.Validate(w_in);
  Rng rng(seed);
  Optimizer optimizer(config);
  ParameterSet w = w_in;

  DeviceUpdate update;
  update.device_id = id_;
  update.round = round;
  double loss_sum = 0.0;
  for (int k = 0; k < config.local_updates; ++k) {
    std::optional<std::vector<PseudoExample>> batch = NextBatch(config);
    if (!batch)
      throw RoundAborted("device " + std::to_string(id_) +
                         ": data source exhausted in round " +
                         std::to_string(round));
    StepStats s = TrainStep(model_, w, *batch, config, optimizer, rng);
    update.examples_seen += s.popped;
    update.examples_kept += s.kept;
    if (s.updated) {
      loss_sum += s.mean_loss;
      ++update.steps_taken;
    }
  }
  if (update.steps_taken > 0) update.mean_loss = loss_sum / update.steps_taken;
  update.delta = ApplyMask(w - w_in, config.mask);
  return update;
}

}  // namespace ftsim
