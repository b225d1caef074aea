// src/config_file.cc

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

#include "ftsim/config_file.h"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ftsim {

namespace {

std::string_view Trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

template <typename T>
std::optional<T> ParseNumber(std::string_view s) {
  T v{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

KeyValueConfig KeyValueConfig::Parse(std::string_view text,
                                     std::string_view origin) {
  KeyValueConfig cfg;
  cfg.origin_ = std::string(origin);
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = Trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    const std::string where = cfg.origin_ + ":" + std::to_string(line_no);
    if (eq == std::string_view::npos)
      throw std::invalid_argument(where + ": expected 'key = value'");
    const std::string key(Trim(line.substr(0, eq)));
    const std::string value(Trim(line.substr(eq + 1)));
    if (key.empty()) throw std::invalid_argument(where + ": empty key");
    if (!cfg.entries_.emplace(key, value).second)
      throw std::invalid_argument(where + ": duplicate key '" + key + "'");
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::Load(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument(path + ": cannot open config");
  std::ostringstream ss;
  ss << is.rdbuf();
  return Parse(ss.str(), path);
}

bool KeyValueConfig::Has(std::string_view key) const {
  return entries_.count(std::string(key)) > 0;
}

std::optional<std::string> KeyValueConfig::GetString(std::string_view key) const {
  auto it = entries_.find(std::string(key));
  if (it == entries_.end()) return std::nullopt;
  used_.insert(it->first);
  return it->second;
}

std::optional<double> KeyValueConfig::GetDouble(std::string_view key) const {
  auto s = GetString(key);
  if (!s) return std::nullopt;
  auto v = ParseNumber<double>(*s);
  if (!v)
    throw std::invalid_argument(origin_ + ": key '" + std::string(key) +
                                "' is not a number: '" + *s + "'");
  return v;
}

std::optional<std::int64_t> KeyValueConfig::GetInt(std::string_view key) const {
  auto s = GetString(key);
  if (!s) return std::nullopt;
  auto v = ParseNumber<std::int64_t>(*s);
  if (!v)
    throw std::invalid_argument(origin_ + ": key '" + std::string(key) +
                                "' is not an integer: '" + *s + "'");
  return v;
}

std::optional<bool> KeyValueConfig::GetBool(std::string_view key) const {
  auto s = GetString(key);
  if (!s) return std::nullopt;
  if (*s == "true" || *s == "1" || *s == "on") return true;
  if (*s == "false" || *s == "0" || *s == "off") return false;
  throw std::invalid_argument(origin_ + ": key '" + std::string(key) +
                              "' is not a boolean: '" + *s + "'");
}

std::optional<std::vector<double>> KeyValueConfig::GetDoubleList(
    std::string_view key) const {
  auto s = GetString(key);
  if (!s) return std::nullopt;
  std::vector<double> out;
  std::string_view rest = *s;
  while (!rest.empty()) {
    const std::size_t comma = std::min(rest.find(','), rest.size());
    auto v = ParseNumber<double>(Trim(rest.substr(0, comma)));
    if (!v)
      throw std::invalid_argument(origin_ + ": key '" + std::string(key) +
                                  "' is not a number list: '" + *s + "'");
    out.push_back(*v);
    rest = comma < rest.size() ? rest.substr(comma + 1) : std::string_view();
  }
  return out;
}

void KeyValueConfig::Set(std::string key, std::string value) {
  entries_[std::move(key)] = std::move(value);
}

std::vector<std::string> KeyValueConfig::UnusedKeys() const {
  std::vector<std::string> out;
  for (const auto &kv : entries_)
    if (!used_.count(kv.first)) out.push_back(kv.first);
  return out;
}

}  // namespace ftsim
