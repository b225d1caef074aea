// include/ftsim/fl_server.h

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

#ifndef FTSIM_FL_SERVER_H_
#define FTSIM_FL_SERVER_H_

#include <cstdint>
#include <span>
#include <vector>

#include "ftsim/device_trainer.h"
#include "ftsim/parameter_set.h"

namespace ftsim {

struct ServerState {
  ParameterSet w_curr;  // w_{t-1}
  ParameterSet w_prev;  // w_{t-2}
  int round = 0;        // rounds completed
  double block_momentum = 0.8;
  AdaptationMask mask = AdaptationMask::Preset("all");

  // Round 0: w_prev = w_curr = w0, so the first momentum term vanishes.
  static ServerState Initial(const ParameterSet &w0, double block_momentum,
                             AdaptationMask mask);
};

/// Element-wise mean of the deltas, summed in ascending device-id order.
/// Throws std::invalid_argument on an empty list, mixed rounds, or
/// mismatched structure.
ParameterSet Aggregate(std::span<const DeviceUpdate> updates);

/// w_new = w_curr + beta * (w_curr - w_prev) + delta_mean, then shifts the
/// history and advances the round. Throws std::invalid_argument on shape
/// mismatch.
void FedAvgMUpdate(ServerState &state, const ParameterSet &delta_mean);

struct RoundMetrics {
  int round = 0;
  // Indexed like the device list.
  std::vector<int> device_ids;
  std::vector<double> device_loss;
  std::vector<double> device_keep_rate;
  std::vector<double> device_delta_norm;
  std::vector<int> device_steps;  // steps that survived filtering
  std::size_t examples_seen = 0;
  std::size_t examples_kept = 0;
  double delta_norm = 0.0;  // of the aggregated mean delta

  // Mean over devices that took at least one step; 0 if none did.
  double MeanLocalLoss() const;
  double KeepRate() const;
};

struct RoundOptions {
  std::uint64_t seed = 0;
  int workers = 1;
};

/// One synchronous round: every device trains from w_curr (in parallel on up
/// to options.workers threads), then the server aggregates and applies the
/// momentum update. Device i draws its randomness from
/// MixSeed(seed, id_i, round). A device failure aborts the round and leaves
/// `state` unchanged; the first failure in device order is rethrown.
RoundMetrics RunRound(ServerState &state, std::span<Device> devices,
                      const TrainerConfig &config, const RoundOptions &options);

}  // namespace ftsim

#endif  // FTSIM_FL_SERVER_H_
