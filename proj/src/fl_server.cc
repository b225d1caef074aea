// src/fl_server.cc

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

#include "ftsim/fl_server.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "ftsim/rng.h"

namespace ftsim {

ServerState ServerState::Initial(const ParameterSet &w0,
                                 double block_momentum, AdaptationMask mask) {
  if (!(block_momentum >= 0.0 && block_momentum < 1.0))
    throw std::invalid_argument("server: block momentum must be in [0, 1)");
  mask.Validate(w0);
  ServerState s;
  s.w_curr = w0;
  s.w_prev = w0;
  s.block_momentum = block_momentum;
  s.mask = std::move(mask);
  return s;
}

ParameterSet Aggregate(std::span<const DeviceUpdate> updates) {
  if (updates.empty()) throw std::invalid_argument("aggregate: no updates");
  std::vector<std::size_t> order(updates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return updates[a].device_id < updates[b].device_id;
  });
  const int round = updates[0].round;
  ParameterSet sum = updates[0].delta.ZerosLike();
  for (std::size_t i : order) {
    if (updates[i].round != round)
      throw std::invalid_argument("aggregate: updates from mixed rounds");
    if (!sum.SameStructure(updates[i].delta))
      throw std::invalid_argument("aggregate: delta structure mismatch at '" +
                                  sum.FirstMismatch(updates[i].delta) + "'");
    sum += updates[i].delta;
  }
  const double n = double(updates.size());
  for (auto &g : sum.Groups())
    for (double &v : g.values) v /= n;
  return sum;
}

void FedAvgMUpdate(ServerState &state, const ParameterSet &delta_mean) {
  if (!state.w_curr.SameStructure(delta_mean))
    throw std::invalid_argument("fedavgm: delta shape mismatch at '" +
                                state.w_curr.FirstMismatch(delta_mean) + "'");
  const double beta = state.block_momentum;
  ParameterSet next = state.w_curr;
  auto &ng = next.Groups();
  const auto &cg = state.w_curr.Groups();
  const auto &pg = state.w_prev.Groups();
  const auto &dg = delta_mean.Groups();
  for (std::size_t i = 0; i < ng.size(); ++i)
    for (std::size_t j = 0; j < ng[i].values.size(); ++j)
      ng[i].values[j] = cg[i].values[j] +
                        beta * (cg[i].values[j] - pg[i].values[j]) +
                        dg[i].values[j];
  state.w_prev = std::move(state.w_curr);
  state.w_curr = std::move(next);
  ++state.round;
}

double RoundMetrics::MeanLocalLoss() const {
  double s = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < device_loss.size(); ++i) {
    if (device_steps[i] == 0) continue;
    s += device_loss[i];
    ++n;
  }
  return n ? s / n : 0.0;
}

double RoundMetrics::KeepRate() const {
  return examples_seen ? double(examples_kept) / double(examples_seen) : 0.0;
}

RoundMetrics RunRound(ServerState &state, std::span<Device> devices,
                      const TrainerConfig &config, const RoundOptions &options) {
  if (devices.empty()) throw std::invalid_argument("run round: no devices");
  if (!(config.mask == state.mask))
    throw std::invalid_argument("run round: trainer mask differs from server");
  config.Validate();
  const int round = state.round + 1;
  const std::size_t n = devices.size();
  std::vector<DeviceUpdate> updates(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        const std::uint64_t seed =
            MixSeed(options.seed, std::uint64_t(devices[i].Id()),
                    std::uint64_t(round));
        updates[i] = devices[i].LocalRound(state.w_curr, round, config, seed);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(options.workers, 1, int(n));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(work);
    for (auto &t : pool) t.join();
  }
  for (const auto &e : errors)
    if (e) std::rethrow_exception(e);

  const ParameterSet mean = Aggregate(updates);
  RoundMetrics m;
  m.round = round;
  for (const DeviceUpdate &u : updates) {
    m.device_ids.push_back(u.device_id);
    m.device_loss.push_back(u.mean_loss);
    m.device_keep_rate.push_back(u.KeepRate());
    m.device_delta_norm.push_back(u.delta.L2Norm());
    m.device_steps.push_back(u.steps_taken);
    m.examples_seen += u.examples_seen;
    m.examples_kept += u.examples_kept;
  }
  m.delta_norm = mean.L2Norm();
  FedAvgMUpdate(state, mean);
  return m;
}

}  // namespace ftsim
