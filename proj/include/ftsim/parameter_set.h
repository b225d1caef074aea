// include/ftsim/parameter_set.h

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

#ifndef FTSIM_PARAMETER_SET_H_
#define FTSIM_PARAMETER_SET_H_

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ftsim {

struct ParameterGroup {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;

  std::size_t Size() const { return values.size(); }
};

// Ordered collection of named, flat parameter groups. Arithmetic operators
// require identical structure (same names, same shapes, same order) and throw
// std::invalid_argument otherwise.
class ParameterSet {
 public:
  ParameterSet() = default;

  void AddGroup(std::string name, std::vector<std::size_t> shape);

  bool HasGroup(std::string_view name) const;
  ParameterGroup &Group(std::string_view name);
  const ParameterGroup &Group(std::string_view name) const;

  std::vector<ParameterGroup> &Groups() { return groups_; }
  const std::vector<ParameterGroup> &Groups() const { return groups_; }

  std::size_t TotalSize() const;
  bool SameStructure(const ParameterSet &other) const;
  // Name of the first group whose name or shape differs, or "" if none.
  std::string FirstMismatch(const ParameterSet &other) const;

  ParameterSet ZerosLike() const;
  void SetZero();

  ParameterSet &operator+=(const ParameterSet &other);
  ParameterSet &operator-=(const ParameterSet &other);
  ParameterSet &operator*=(double scale);
  // this += scale * other
  void Axpy(double scale, const ParameterSet &other);

  double L2Norm() const;
  bool BitEqual(const ParameterSet &other) const;

 private:
  void RequireSameStructure(const ParameterSet &other) const;

  std::vector<ParameterGroup> groups_;
};

ParameterSet operator+(ParameterSet a, const ParameterSet &b);
ParameterSet operator-(ParameterSet a, const ParameterSet &b);
ParameterSet operator*(double scale, ParameterSet a);

// Which parameter groups are allowed to change during adaptation.
class AdaptationMask {
 public:
  AdaptationMask() = default;
  explicit AdaptationMask(std::set<std::string> selected)
      : selected_(std::move(selected)) {}

  // Presets: all, encoder, attention, keyvalue, predictor, joiner, bias, none.
  static AdaptationMask Preset(std::string_view name);
  static const std::vector<std::string> &PresetNames();

  bool Contains(std::string_view group) const {
    return selected_.count(std::string(group)) > 0;
  }
  const std::set<std::string> &Selected() const { return selected_; }

  // Throws std::invalid_argument naming the first selected group absent from
  // `params`.
  void Validate(const ParameterSet &params) const;

  bool operator==(const AdaptationMask &) const = default;

 private:
  std::set<std::string> selected_;
};

/// Copies the groups selected by `mask` and zeroes the rest.
ParameterSet ApplyMask(const ParameterSet &values, const AdaptationMask &mask);

/// Element count of the selected groups (all groups when mask is null).
std::size_t ParamCount(const ParameterSet &params,
                       const AdaptationMask *mask = nullptr);

}  // namespace ftsim

#endif  // FTSIM_PARAMETER_SET_H_
