// include/ftsim/config_file.h

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

#ifndef FTSIM_CONFIG_FILE_H_
#define FTSIM_CONFIG_FILE_H_

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ftsim {

// Plain-text "key = value" settings. Blank lines and lines starting with '#'
// are ignored; keys and values are trimmed. A repeated key is an error.
// Typed getters throw std::invalid_argument naming the key when the value
// does not parse; every successful lookup marks the key as used.
class KeyValueConfig {
 public:
  static KeyValueConfig Parse(std::string_view text,
                              std::string_view origin = "<string>");
  static KeyValueConfig Load(const std::string &path);

  bool Has(std::string_view key) const;
  std::optional<std::string> GetString(std::string_view key) const;
  std::optional<double> GetDouble(std::string_view key) const;
  std::optional<std::int64_t> GetInt(std::string_view key) const;
  std::optional<bool> GetBool(std::string_view key) const;
  // Comma-separated numbers.
  std::optional<std::vector<double>> GetDoubleList(std::string_view key) const;

  void Set(std::string key, std::string value);
  const std::map<std::string, std::string> &Entries() const { return entries_; }
  // Keys never looked up, in sorted order.
  std::vector<std::string> UnusedKeys() const;

 private:
  std::map<std::string, std::string> entries_;
  std::string origin_ = "config";
  mutable std::set<std::string> used_;
};

}  // namespace ftsim

#endif  // FTSIM_CONFIG_FILE_H_
