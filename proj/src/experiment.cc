// src/experiment.cc

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

#include "ftsim/experiment.h"

#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <ostream>
#include <stdexcept>

namespace ftsim {

namespace {

std::uint64_t Stream(const ExperimentConfig &c, std::string_view name) {
  return MixSeed(c.seed, HashName(name));
}

UtteranceSource SourceFromStream(DomainConfig domain, std::uint64_t seed) {
  auto stream = std::make_shared<UtteranceStream>(std::move(domain), seed);
  return [stream]() -> std::optional<Utterance> { return stream->Next(); };
}

MetricsRow EvalRow(const ExperimentConfig &c, const ParameterSet &params,
                   const EvalSets &sets, int round) {
  MetricsRow row;
  row.round = round;
  row.target_ter = Evaluate(c.model, params, sets.target, false).token_error_rate;
  row.source_ter = Evaluate(c.model, params, sets.source, false).token_error_rate;
  return row;
}

int ToInt(std::int64_t v, std::string_view key) {
  if (v < INT32_MIN || v > INT32_MAX)
    throw std::invalid_argument("config key '" + std::string(key) +
                                "' out of range");
  return int(v);
}

}  // namespace

ExperimentConfig ExperimentConfig::Preset(std::string_view name) {
  ExperimentConfig c;
  c.preset = std::string(name);
  if (name == "device") {
    c.domains.target_noise = 0.15;
    c.trainer.augment.enabled = true;
    c.trainer.augment.noise_sigma = 0.05;
    c.trainer.augment.time_mask_max = 2;
    c.trainer.augment.feat_mask_max = 1;
  } else if (name == "video") {
    c.domains.target_noise = 0.35;
    c.trainer.filter_threshold = -0.2;
  } else {
    throw std::invalid_argument("unknown preset '" + std::string(name) + "'");
  }
  return c;
}

const std::vector<std::string> &ExperimentConfig::PresetNames() {
  static const std::vector<std::string> names = {"device", "video"};
  return names;
}

void ExperimentConfig::Validate() const {
  model.Validate();
  if (domains.vocab != model.vocab || domains.feat_dim != model.feat_dim)
    throw std::invalid_argument(
        "experiment: domain vocab/feat_dim must match the model");
  if (pretrain_steps < 0 || pretrain_batch < 1 || !(pretrain_lr >= 0.0))
    throw std::invalid_argument("experiment: bad pretraining settings");
  if (pretrain_band_left < 0 || pretrain_band_right < 0)
    throw std::invalid_argument("experiment: pretraining band must be >= 0");
  if (rounds < 0 || devices < 1)
    throw std::invalid_argument("experiment: rounds >= 0 and devices >= 1");
  if (!(block_momentum >= 0.0 && block_momentum < 1.0))
    throw std::invalid_argument("experiment: block momentum must be in [0, 1)");
  if (eval_size < 1) throw std::invalid_argument("experiment: eval_size >= 1");
  if (workers < 1) throw std::invalid_argument("experiment: workers >= 1");
  trainer.Validate();
}

ExperimentConfig ExperimentConfigFromFile(const KeyValueConfig &kv) {
  ExperimentConfig c =
      ExperimentConfig::Preset(kv.GetString("preset").value_or("device"));
  auto i = [&](const char *key, int &out) {
    if (auto v = kv.GetInt(key)) out = ToInt(*v, key);
  };
  auto d = [&](const char *key, double &out) {
    if (auto v = kv.GetDouble(key)) out = *v;
  };
  if (auto v = kv.GetInt("seed")) c.seed = std::uint64_t(*v);
  i("vocab", c.model.vocab);
  i("feat_dim", c.model.feat_dim);
  i("hidden_dim", c.model.hidden_dim);
  i("joint_dim", c.model.joint_dim);
  c.domains.vocab = c.model.vocab;
  c.domains.feat_dim = c.model.feat_dim;
  i("min_tokens", c.domains.min_tokens);
  i("max_tokens", c.domains.max_tokens);
  i("d_min", c.domains.d_min);
  i("d_max", c.domains.d_max);
  d("prototype_scale", c.domains.prototype_scale);
  d("source_noise", c.domains.source_noise);
  d("target_noise", c.domains.target_noise);
  d("target_shift", c.domains.target_shift);
  d("prior_skew", c.domains.prior_skew);

  i("pretrain_steps", c.pretrain_steps);
  i("pretrain_batch", c.pretrain_batch);
  d("pretrain_lr", c.pretrain_lr);
  i("pretrain_band_left", c.pretrain_band_left);
  i("pretrain_band_right", c.pretrain_band_right);

  i("rounds", c.rounds);
  i("devices", c.devices);
  d("block_momentum", c.block_momentum);
  TrainerConfig &t = c.trainer;
  i("local_updates", t.local_updates);
  i("batch_size", t.batch_size);
  if (auto v = kv.GetString("loss")) t.loss = ParseLossKind(*v);
  i("band_left", t.band_left);
  i("band_right", t.band_right);
  if (auto v = kv.GetString("alignment_source"))
    t.alignment_source = ParseAlignmentSource(*v);
  d("filter_threshold", t.filter_threshold);
  if (auto v = kv.GetString("optimizer")) t.optimizer = ParseOptimizer(*v);
  d("learning_rate", t.learning_rate);
  if (auto v = kv.GetString("mask")) t.mask = AdaptationMask::Preset(*v);
  i("beam_size", t.beam_size);
  i("max_emits_per_frame", t.max_emits_per_frame);
  if (auto v = kv.GetString("labels")) {
    if (*v != "true" && *v != "pseudo")
      throw std::invalid_argument("config key 'labels' must be true or pseudo");
    t.use_true_labels = *v == "true";
  }
  if (auto v = kv.GetBool("augment")) t.augment.enabled = *v;
  if (auto v = kv.GetDoubleList("speed_rates")) t.augment.speed_rates = *v;
  d("aug_noise_sigma", t.augment.noise_sigma);
  i("time_mask_max", t.augment.time_mask_max);
  i("feat_mask_max", t.augment.feat_mask_max);

  i("eval_size", c.eval_size);
  i("workers", c.workers);

  const auto unused = kv.UnusedKeys();
  if (!unused.empty())
    throw std::invalid_argument("unknown config key '" + unused.front() + "'");
  c.Validate();
  return c;
}

DomainPair ExperimentDomains(const ExperimentConfig &c) {
  return MakeDomains(c.domains, Stream(c, "domains"));
}

EvalSets MakeEvalSets(const ExperimentConfig &c) {
  const DomainPair dp = ExperimentDomains(c);
  return {GenDataset(dp.source, c.eval_size, Stream(c, "source_eval")),
          GenDataset(dp.target, c.eval_size, Stream(c, "target_eval"))};
}

PretrainResult Pretrain(const ExperimentConfig &c) {
  c.Validate();
  ModelConfig model = c.model;
  model.seed = Stream(c, "model");
  PretrainResult out;
  out.params = InitParams(model);

  TrainerConfig tc;
  tc.loss = LossKind::kAr;
  tc.band_left = c.pretrain_band_left;
  tc.band_right = c.pretrain_band_right;
  tc.optimizer = OptimizerKind::kAdam;
  tc.learning_rate = c.pretrain_lr;
  tc.batch_size = c.pretrain_batch;
  tc.use_true_labels = true;

  UtteranceStream stream(ExperimentDomains(c).source, Stream(c, "pretrain"));
  Optimizer optimizer(tc);
  Rng rng(Stream(c, "pretrain_augment"));
  for (int step = 0; step < c.pretrain_steps; ++step) {
    std::vector<PseudoExample> batch;
    for (int b = 0; b < c.pretrain_batch; ++b)
      batch.push_back(TrueLabelExample(stream.Next()));
    StepStats s;
    try {
      s = TrainStep(model, out.params, batch, tc, optimizer, rng);
    } catch (const std::runtime_error &e) {
      throw std::runtime_error("pretraining diverged at step " +
                               std::to_string(step) + ": " + e.what());
    }
    out.loss_curve.push_back(s.mean_loss);
  }
  return out;
}

std::string MetricsCsvHeader() {
  return "round,target_TER,source_TER,mean_local_loss,keep_rate,delta_norm";
}

std::string MetricsCsvLine(const MetricsRow &r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.6f,%.6e", r.round,
                r.target_ter, r.source_ter, r.mean_local_loss, r.keep_rate,
                r.delta_norm);
  return buf;
}

void WriteMetricsCsv(std::ostream &os, std::span<const MetricsRow> rows) {
  os << MetricsCsvHeader() << '\n';
  for (const MetricsRow &r : rows) os << MetricsCsvLine(r) << '\n';
}

AdaptResult Adapt(const ExperimentConfig &c, const ParameterSet &w0,
                  const RowCallback &on_row) {
  c.Validate();
  const DomainPair dp = ExperimentDomains(c);
  const EvalSets sets = MakeEvalSets(c);
  auto frozen = std::make_shared<const ParameterSet>(w0);

  std::vector<Device> devices;
  devices.reserve(c.devices);
  for (int i = 0; i < c.devices; ++i)
    devices.emplace_back(
        i, c.model, frozen,
        SourceFromStream(dp.target,
                         MixSeed(c.seed, HashName("device"), std::uint64_t(i))),
        std::max<std::size_t>(64, std::size_t(c.trainer.batch_size)));

  AdaptResult out;
  out.final_state = ServerState::Initial(w0, c.block_momentum, c.trainer.mask);
  auto emit = [&](const MetricsRow &row) {
    out.rows.push_back(row);
    if (on_row) on_row(row);
  };
  emit(EvalRow(c, w0, sets, 0));

  const RoundOptions opts{Stream(c, "rounds"), c.workers};
  for (int r = 1; r <= c.rounds; ++r) {
    const RoundMetrics m = RunRound(out.final_state, devices, c.trainer, opts);
    MetricsRow row = EvalRow(c, out.final_state.w_curr, sets, r);
    row.mean_local_loss = m.MeanLocalLoss();
    row.keep_rate = m.KeepRate();
    row.delta_norm = m.delta_norm;
    emit(row);
  }
  return out;
}

AdaptResult AdaptCentralized(const ExperimentConfig &c, const ParameterSet &w0,
                             const RowCallback &on_row) {
  c.Validate();
  const DomainPair dp = ExperimentDomains(c);
  const EvalSets sets = MakeEvalSets(c);
  TrainerConfig tc = c.trainer;
  tc.use_true_labels = true;
  tc.filter_threshold = -std::numeric_limits<double>::infinity();
  tc.batch_size = c.devices * c.trainer.batch_size;

  Device learner(0, c.model, std::make_shared<const ParameterSet>(w0),
                 SourceFromStream(dp.target, Stream(c, "central")),
                 std::size_t(tc.batch_size));
  Optimizer optimizer(tc);
  Rng rng(Stream(c, "central_augment"));

  AdaptResult out;
  out.final_state = ServerState::Initial(w0, 0.0, tc.mask);
  auto emit = [&](const MetricsRow &row) {
    out.rows.push_back(row);
    if (on_row) on_row(row);
  };
  emit(EvalRow(c, w0, sets, 0));

  ParameterSet &w = out.final_state.w_curr;
  for (int r = 1; r <= c.rounds; ++r) {
    const ParameterSet before = w;
    double loss = 0.0;
    std::size_t seen = 0, kept = 0;
    for (int k = 0; k < tc.local_updates; ++k) {
      const StepStats s = TrainStep(c.model, w, *learner.NextBatch(tc), tc,
                                    optimizer, rng);
      loss += s.mean_loss;
      seen += s.popped;
      kept += s.kept;
    }
    out.final_state.w_prev = before;
    out.final_state.round = r;
    MetricsRow row = EvalRow(c, w, sets, r);
    row.mean_local_loss = loss / tc.local_updates;
    row.keep_rate = seen ? double(kept) / double(seen) : 0.0;
    row.delta_norm = (w - before).L2Norm();
    emit(row);
  }
  return out;
}

}  // namespace ftsim
