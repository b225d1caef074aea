// src/parameter_set.cc

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

#include "ftsim/parameter_set.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <stdexcept>

namespace ftsim {

namespace {

const std::vector<std::string> kAllGroups = {
    "enc_in", "attn_q",   "attn_k",   "attn_v", "attn_o",
    "enc_out", "pred_emb", "pred_rnn", "joiner", "bias_all"};

}  // namespace

void ParameterSet::AddGroup(std::string name, std::vector<std::size_t> shape) {
  if (HasGroup(name))
    throw std::invalid_argument("duplicate parameter group: " + name);
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  groups_.push_back({std::move(name), std::move(shape), std::vector<double>(n, 0.0)});
}

bool ParameterSet::HasGroup(std::string_view name) const {
  return std::any_of(groups_.begin(), groups_.end(),
                     [&](const ParameterGroup &g) { return g.name == name; });
}

ParameterGroup &ParameterSet::Group(std::string_view name) {
  for (auto &g : groups_)
    if (g.name == name) return g;
  throw std::invalid_argument("unknown parameter group: " + std::string(name));
}

const ParameterGroup &ParameterSet::Group(std::string_view name) const {
  for (const auto &g : groups_)
    if (g.name == name) return g;
  throw std::invalid_argument("unknown parameter group: " + std::string(name));
}

std::size_t ParameterSet::TotalSize() const {
  std::size_t n = 0;
  for (const auto &g : groups_) n += g.Size();
  return n;
}

std::string ParameterSet::FirstMismatch(const ParameterSet &other) const {
  const std::size_t n = std::max(groups_.size(), other.groups_.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (i >= groups_.size()) return other.groups_[i].name;
    if (i >= other.groups_.size()) return groups_[i].name;
    if (groups_[i].name != other.groups_[i].name ||
        groups_[i].shape != other.groups_[i].shape)
      return groups_[i].name;
  }
  return "";
}

bool ParameterSet::SameStructure(const ParameterSet &other) const {
  return groups_.size() == other.groups_.size() && FirstMismatch(other).empty();
}

void ParameterSet::RequireSameStructure(const ParameterSet &other) const {
  if (!SameStructure(other))
    throw std::invalid_argument("parameter set structure mismatch at group '" +
                                FirstMismatch(other) + "'");
}

ParameterSet ParameterSet::ZerosLike() const {
  ParameterSet out = *this;
  out.SetZero();
  return out;
}

void ParameterSet::SetZero() {
  for (auto &g : groups_) std::fill(g.values.begin(), g.values.end(), 0.0);
}

ParameterSet &ParameterSet::operator+=(const ParameterSet &other) {
  RequireSameStructure(other);
  for (std::size_t i = 0; i < groups_.size(); ++i) {
    auto &dst = groups_[i].values;
    const auto &src = other.groups_[i].values;
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
  return *this;
}

ParameterSet &ParameterSet::operator-=(const ParameterSet &other) {
  RequireSameStructure(other);
  for (std::size_t i = 0; i < groups_.size(); ++i) {
    auto &dst = groups_[i].values;
    const auto &src = other.groups_[i].values;
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] -= src[j];
  }
  return *this;
}

ParameterSet &ParameterSet::operator*=(double scale) {
  for (auto &g : groups_)
    for (double &v : g.values) v *= scale;
  return *this;
}

void ParameterSet::Axpy(double scale, const ParameterSet &other) {
  RequireSameStructure(other);
  for (std::size_t i = 0; i < groups_.size(); ++i) {
    auto &dst = groups_[i].values;
    const auto &src = other.groups_[i].values;
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += scale * src[j];
  }
}

double ParameterSet::L2Norm() const {
  double sum = 0.0;
  for (const auto &g : groups_)
    for (double v : g.values) sum += v * v;
  return std::sqrt(sum);
}

bool ParameterSet::BitEqual(const ParameterSet &other) const {
  if (!SameStructure(other)) return false;
  for (std::size_t i = 0; i < groups_.size(); ++i) {
    const auto &a = groups_[i].values;
    const auto &b = other.groups_[i].values;
    if (std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

ParameterSet operator+(ParameterSet a, const ParameterSet &b) { return a += b; }
ParameterSet operator-(ParameterSet a, const ParameterSet &b) { return a -= b; }
ParameterSet operator*(double scale, ParameterSet a) { return a *= scale; }

AdaptationMask AdaptationMask::Preset(std::string_view name) {
  if (name == "all")
    return AdaptationMask({kAllGroups.begin(), kAllGroups.end()});
  if (name == "encoder")
    return AdaptationMask(
        {"enc_in", "attn_q", "attn_k", "attn_v", "attn_o", "enc_out"});
  if (name == "attention")
    return AdaptationMask({"attn_q", "attn_k", "attn_v", "attn_o"});
  if (name == "keyvalue") return AdaptationMask({"attn_k", "attn_v"});
  if (name == "predictor") return AdaptationMask({"pred_emb", "pred_rnn"});
  if (name == "joiner") return AdaptationMask({"joiner"});
  if (name == "bias") return AdaptationMask({"bias_all"});
  if (name == "none") return AdaptationMask();
  throw std::invalid_argument("unknown adaptation mask preset: " +
                              std::string(name));
}

const std::vector<std::string> &AdaptationMask::PresetNames() {
  static const std::vector<std::string> names = {
      "all", "encoder", "attention", "keyvalue", "predictor", "joiner", "bias", "none"};
  return names;
}

void AdaptationMask::Validate(const ParameterSet &params) const {
  for (const auto &name : selected_)
    if (!params.HasGroup(name))
      throw std::invalid_argument("adaptation mask names unknown group: " + name);
}

ParameterSet ApplyMask(const ParameterSet &values, const AdaptationMask &mask) {
  mask.Validate(values);
  ParameterSet out = values;
  for (auto &g : out.Groups())
    if (!mask.Contains(g.name)) std::fill(g.values.begin(), g.values.end(), 0.0);
  return out;
}

std::size_t ParamCount(const ParameterSet &params, const AdaptationMask *mask) {
  if (mask == nullptr) return params.TotalSize();
  mask->Validate(params);
  std::size_t n = 0;
  for (const auto &g : params.Groups())
    if (mask->Contains(g.name)) n += g.Size();
  return n;
}

}  // namespace ftsim
