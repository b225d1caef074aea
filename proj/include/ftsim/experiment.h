// include/ftsim/experiment.h

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

#ifndef FTSIM_EXPERIMENT_H_
#define FTSIM_EXPERIMENT_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ftsim/config_file.h"
#include "ftsim/device_trainer.h"
#include "ftsim/evaluation.h"
#include "ftsim/fl_server.h"
#include "ftsim/synthetic_data.h"
#include "ftsim/transducer_model.h"

namespace ftsim {

// Everything that determines a run. Every random stream is derived from
// `seed`, so two runs with equal configs produce identical output.
struct ExperimentConfig {
  std::string preset = "device";
  std::uint64_t seed = 42;
  ModelConfig model;
  DomainSpec domains;

  int pretrain_steps = 10000;
  int pretrain_batch = 8;
  double pretrain_lr = 1e-3;
  int pretrain_band_left = 2;
  int pretrain_band_right = 5;

  int rounds = 30;
  int devices = 8;
  double block_momentum = 0.8;
  TrainerConfig trainer;

  int eval_size = 200;
  int workers = 1;

  // "device": clean target, augmentation on, no filtering.
  // "video": noisy target, confidence filtering on.
  static ExperimentConfig Preset(std::string_view name);
  static const std::vector<std::string> &PresetNames();
  // Throws std::invalid_argument.
  void Validate() const;
};

/// Preset named by the "preset" key (default "device") with every other key
/// applied on top. Unknown keys are an error.
ExperimentConfig ExperimentConfigFromFile(const KeyValueConfig &kv);

struct EvalSets {
  std::vector<Utterance> source;
  std::vector<Utterance> target;
};

DomainPair ExperimentDomains(const ExperimentConfig &config);
EvalSets MakeEvalSets(const ExperimentConfig &config);

struct PretrainResult {
  ParameterSet params;
  std::vector<double> loss_curve;  // mean batch loss per step
};

/// Centralized training on the source domain with the band around the true
/// alignment. Throws std::runtime_error on a non-finite loss.
PretrainResult Pretrain(const ExperimentConfig &config);

struct MetricsRow {
  int round = 0;
  double target_ter = 0.0;
  double source_ter = 0.0;
  double mean_local_loss = 0.0;
  double keep_rate = 0.0;
  double delta_norm = 0.0;
};

std::string MetricsCsvHeader();
std::string MetricsCsvLine(const MetricsRow &row);
void WriteMetricsCsv(std::ostream &os, std::span<const MetricsRow> rows);

struct AdaptResult {
  std::vector<MetricsRow> rows;  // row 0 evaluates w0
  ServerState final_state;
};

using RowCallback = std::function<void(const MetricsRow &)>;

/// Federated adaptation on the target domain from w0.
AdaptResult Adapt(const ExperimentConfig &config, const ParameterSet &w0,
                  const RowCallback &on_row = {});

/// Supervised centralized baseline: one learner on ground-truth target
/// labels, `local_updates` steps per round with batches as large as one FL
/// round's (devices * batch_size). No filtering.
AdaptResult AdaptCentralized(const ExperimentConfig &config,
                             const ParameterSet &w0,
                             const RowCallback &on_row = {});

}  // namespace ftsim

#endif  // FTSIM_EXPERIMENT_H_
