// include/ftsim/device_trainer.h

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

#ifndef FTSIM_DEVICE_TRAINER_H_
#define FTSIM_DEVICE_TRAINER_H_

#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ftsim/decoder.h"
#include "ftsim/parameter_set.h"
#include "ftsim/rng.h"
#include "ftsim/rnnt_lattice.h"
#include "ftsim/transducer_model.h"
#include "ftsim/utterance.h"

namespace ftsim {

enum class LossKind { kFull, kAr, kSr };
enum class AlignmentSource { kViterbiOnline, kBeamCached };
enum class OptimizerKind { kSgd, kAdam };

// Name <-> enum. Parse functions throw std::invalid_argument.
std::string_view LossKindName(LossKind k);
LossKind ParseLossKind(std::string_view s);
std::string_view AlignmentSourceName(AlignmentSource s);
AlignmentSource ParseAlignmentSource(std::string_view s);
std::string_view OptimizerName(OptimizerKind k);
OptimizerKind ParseOptimizer(std::string_view s);

struct AugmentConfig {
  bool enabled = false;
  std::vector<double> speed_rates{0.9, 1.0, 1.1};
  double noise_sigma = 0.0;
  int time_mask_max = 0;
  int feat_mask_max = 0;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainerConfig {
  int local_updates = 20;  // K
  int batch_size = 8;
  LossKind loss = LossKind::kSr;
  int band_left = 2;
  int band_right = 2;
  AlignmentSource alignment_source = AlignmentSource::kViterbiOnline;
  // Examples with Confidence() below this are dropped.
  double filter_threshold = -std::numeric_limits<double>::infinity();
  AugmentConfig augment;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double learning_rate = 1e-4;
  AdamConfig adam;
  AdaptationMask mask = AdaptationMask::Preset("all");
  int beam_size = 4;
  int max_emits_per_frame = 4;
  // Train on ground truth instead of pseudo labels.
  bool use_true_labels = false;

  // Throws std::invalid_argument.
  void Validate() const;
};

// A training example as it sits in a device queue.
struct PseudoExample {
  Features features;
  // Decoded by the frozen model (or the ground truth, see TrueLabelExample).
  Hypothesis hypothesis;
  // Best alignment of hypothesis.tokens seen while decoding.
  AlignmentPath cached_alignment;
  // Generation-time alignment of the ground truth, when known.
  std::optional<AlignmentPath> true_alignment;
  std::vector<int> true_tokens;

  const std::vector<int> &Targets() const { return hypothesis.tokens; }
};

/// Beam-decodes `features` with the frozen parameters.
PseudoExample LabelExample(const ModelConfig &model, const ParameterSet &w0,
                           const Features &features, int beam_size,
                           int max_emits_per_frame = 4);
/// Pseudo-labels an utterance, keeping its ground truth alongside.
PseudoExample LabelExample(const ModelConfig &model, const ParameterSet &w0,
                           const Utterance &utt, int beam_size,
                           int max_emits_per_frame = 4);
/// Wraps ground truth as an example. Its confidence is 0, so it passes any
/// threshold <= 0.
PseudoExample TrueLabelExample(const Utterance &utt);

// Bounded FIFO.
class ExampleQueue {
 public:
  explicit ExampleQueue(std::size_t capacity);

  std::size_t Capacity() const { return capacity_; }
  std::size_t Size() const { return items_.size(); }
  bool Empty() const { return items_.empty(); }
  bool Full() const { return items_.size() >= capacity_; }

  // False (and nothing stored) when full.
  bool Push(PseudoExample ex);
  // nullopt when empty.
  std::optional<PseudoExample> Pop();
  // Up to n examples in push order.
  std::vector<PseudoExample> PopBatch(std::size_t n);

 private:
  std::size_t capacity_;
  std::deque<PseudoExample> items_;
};

/// Examples with Confidence(hypothesis) >= threshold, order preserved.
std::vector<PseudoExample> FilterBatch(std::span<const PseudoExample> batch,
                                       double threshold);

/// Speed perturbation, additive noise, one time mask and one feature mask, in
/// that order. Rate r maps output frame i to input frame min(T-1, floor(i*r))
/// and gives round(T/r) frames. Labels are untouched.
Features Augment(const Features &in, Rng &rng, const AugmentConfig &config,
                 double *chosen_rate = nullptr);

/// Moves every emission frame a to min(frames-1, floor(a / rate)), for paths
/// that must follow a speed-perturbed utterance.
AlignmentPath RescaleAlignment(const AlignmentPath &path, double rate,
                               int frames);

/// Augment() applied to an example, with its alignments rescaled to match.
PseudoExample AugmentExample(const PseudoExample &ex, Rng &rng,
                             const AugmentConfig &config);

struct BatchGradient {
  double mean_loss = 0.0;
  std::size_t examples = 0;
  std::size_t cells_touched = 0;
  ParameterSet grad;  // mean over examples; zero when examples == 0
};

/// Loss for the configured LossKind: full sum, band around the reference
/// alignment (ar: ground-truth alignment if present, else the cached decoder
/// alignment), or band around the model's own alignment (sr: Viterbi under
/// `params`, or the cached decoder alignment).
BatchGradient ComputeBatchGradient(const ModelConfig &model,
                                   const ParameterSet &params,
                                   std::span<const PseudoExample> batch,
                                   const TrainerConfig &config);

// Adam moments; empty until the first step.
struct AdamState {
  ParameterSet m;
  ParameterSet v;
  std::int64_t step = 0;
};

/// params -= lr * grad on the groups selected by `mask` (all when null).
void SgdStep(ParameterSet &params, const ParameterSet &grad, double lr,
             const AdaptationMask *mask = nullptr);
/// Bias-corrected Adam on the selected groups.
void AdamStep(ParameterSet &params, const ParameterSet &grad, AdamState &state,
              double lr, const AdamConfig &config,
              const AdaptationMask *mask = nullptr);

class Optimizer {
 public:
  explicit Optimizer(const TrainerConfig &config) : config_(config) {}
  void Step(ParameterSet &params, const ParameterSet &grad);
  void Reset() { adam_ = AdamState(); }

 private:
  TrainerConfig config_;
  AdamState adam_;
};

struct StepStats {
  std::size_t popped = 0;
  std::size_t kept = 0;
  double mean_loss = 0.0;  // over kept examples; 0 when none
  std::size_t cells_touched = 0;
  bool updated = false;
};

/// One update: filter, augment, masked gradient, optimizer step. A batch that
/// is filtered away entirely leaves params unchanged. Shared by device rounds
/// and centralized training.
StepStats TrainStep(const ModelConfig &model, ParameterSet &params,
                    std::span<const PseudoExample> batch,
                    const TrainerConfig &config, Optimizer &optimizer,
                    Rng &rng);

// Raised when a device cannot fill a batch.
class RoundAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DeviceUpdate {
  ParameterSet delta;  // zero outside the mask
  int device_id = 0;
  int round = 0;
  double mean_loss = 0.0;  // over steps that trained
  std::size_t examples_seen = 0;
  std::size_t examples_kept = 0;
  int steps_taken = 0;

  double KeepRate() const {
    return examples_seen ? double(examples_kept) / double(examples_seen) : 0.0;
  }
};

// Produces the next raw utterance for a device; nullopt once exhausted.
using UtteranceSource = std::function<std::optional<Utterance>()>;

// One client: a private data stream, the queue it feeds after labeling with
// the frozen model, and the local trainer.
class Device {
 public:
  Device(int id, ModelConfig model, std::shared_ptr<const ParameterSet> w0,
         UtteranceSource source, std::size_t queue_capacity = 64);

  int Id() const { return id_; }
  const ParameterSet &FrozenParams() const { return *w0_; }

  /// Tops the queue up from the source and pops one batch; nullopt when the
  /// source cannot supply batch_size examples. Labels are made as examples
  /// enter the queue, so `config` should not change labeling settings
  /// between calls.
  std::optional<std::vector<PseudoExample>> NextBatch(
      const TrainerConfig &config);

  /// K local steps from w_in with fresh optimizer state. Throws RoundAborted.
  DeviceUpdate LocalRound(const ParameterSet &w_in, int round,
                          const TrainerConfig &config, std::uint64_t seed);

 private:
  int id_;
  ModelConfig model_;
  std::shared_ptr<const ParameterSet> w0_;
  UtteranceSource source_;
  ExampleQueue queue_;
};

}  // namespace ftsim

#endif  // FTSIM_DEVICE_TRAINER_H_
