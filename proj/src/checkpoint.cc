// src/checkpoint.cc

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

#include "ftsim/checkpoint.h"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace ftsim {

namespace {

using Kind = CheckpointError::Kind;

constexpr char kMagic[] = "FTSIM1";

std::string ShortestDouble(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void WriteManifest(std::ostream &os, const char *tag, const ParameterSet &p,
                   std::uint64_t &offset) {
  for (const ParameterGroup &g : p.Groups()) {
    os << tag << ' ' << g.name << ' ' << g.shape.size();
    for (std::size_t d : g.shape) os << ' ' << d;
    os << ' ' << offset << ' ' << g.values.size() << '\n';
    offset += g.values.size() * sizeof(double);
  }
}

void PutDouble(std::string &out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(char((bits >> (8 * i)) & 0xff));
}

double GetDouble(const unsigned char *p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
  return std::bit_cast<double>(bits);
}

struct GroupEntry {
  std::string name;
  std::vector<std::size_t> shape;
  std::uint64_t offset = 0;
  std::uint64_t count = 0;
};

[[noreturn]] void Malformed(const std::string &path, const std::string &what) {
  throw CheckpointError(Kind::kMalformed, path + ": malformed manifest: " + what);
}

// Reads one manifest line; missing line means the file was cut short.
std::istringstream NextLine(std::istream &is, const std::string &path) {
  std::string line;
  // Every manifest line is newline-terminated; hitting EOF means a cut file.
  if (!std::getline(is, line) || is.eof())
    throw CheckpointError(Kind::kTruncated, path + ": truncated manifest");
  return std::istringstream(line);
}

GroupEntry ParseGroup(std::istream &is, const char *tag,
                      const std::string &path) {
  std::istringstream ls = NextLine(is, path);
  std::string got;
  GroupEntry e;
  std::size_t rank = 0;
  if (!(ls >> got) || got != tag || !(ls >> e.name >> rank) || rank > 8)
    Malformed(path, std::string("expected '") + tag + "' entry");
  std::uint64_t product = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    std::size_t d;
    if (!(ls >> d)) Malformed(path, "bad shape for " + e.name);
    e.shape.push_back(d);
    product *= d;
  }
  if (!(ls >> e.offset >> e.count) || e.count != product)
    Malformed(path, "bad offset or count for " + e.name);
  return e;
}

}  // namespace

void SaveCheckpoint(const std::string &path, const Checkpoint &ckpt) {
  std::ostringstream head;
  head << kMagic << '\n' << "groups " << ckpt.params.Groups().size() << '\n';
  std::uint64_t offset = 0;
  WriteManifest(head, "param", ckpt.params, offset);
  if (ckpt.server) {
    if (!ckpt.server->w_prev.SameStructure(ckpt.params))
      throw std::invalid_argument("save checkpoint: w_prev structure differs");
    head << "server " << ckpt.server->round << ' '
         << ShortestDouble(ckpt.server->block_momentum) << '\n';
    WriteManifest(head, "prev", ckpt.server->w_prev, offset);
  }
  head << "data " << offset << '\n';

  std::string data;
  data.reserve(offset);
  for (const ParameterGroup &g : ckpt.params.Groups())
    for (double v : g.values) PutDouble(data, v);
  if (ckpt.server)
    for (const ParameterGroup &g : ckpt.server->w_prev.Groups())
      for (double v : g.values) PutDouble(data, v);

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError(Kind::kIo, path + ": cannot open for writing");
  const std::string h = head.str();
  os.write(h.data(), std::streamsize(h.size()));
  os.write(data.data(), std::streamsize(data.size()));
  if (!os) throw CheckpointError(Kind::kIo, path + ": write failed");
}

Checkpoint LoadCheckpoint(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError(Kind::kIo, path + ": cannot open");

  char magic[sizeof(kMagic)] = {};
  is.read(magic, sizeof(kMagic));
  if (is.gcount() < std::streamsize(sizeof(kMagic)) ||
      std::memcmp(magic, kMagic, sizeof(kMagic) - 1) != 0 ||
      magic[sizeof(kMagic) - 1] != '\n')
    throw CheckpointError(Kind::kBadMagic, path + ": bad magic");

  std::size_t n = 0;
  {
    std::istringstream ls = NextLine(is, path);
    std::string tag;
    if (!(ls >> tag >> n) || tag != "groups") Malformed(path, "expected groups");
  }
  std::vector<GroupEntry> params, prev;
  for (std::size_t i = 0; i < n; ++i)
    params.push_back(ParseGroup(is, "param", path));

  Checkpoint ckpt;
  std::uint64_t data_bytes = 0;
  for (;;) {
    std::istringstream ls = NextLine(is, path);
    std::string tag;
    ls >> tag;
    if (tag == "server" && !ckpt.server) {
      CheckpointServerState s;
      std::string beta;
      if (!(ls >> s.round >> beta)) Malformed(path, "bad server line");
      auto res = std::from_chars(beta.data(), beta.data() + beta.size(),
                                 s.block_momentum);
      if (res.ec != std::errc()) Malformed(path, "bad block momentum");
      ckpt.server = std::move(s);
      for (std::size_t i = 0; i < n; ++i)
        prev.push_back(ParseGroup(is, "prev", path));
    } else if (tag == "data") {
      if (!(ls >> data_bytes)) Malformed(path, "bad data line");
      break;
    } else {
      Malformed(path, "unexpected '" + tag + "'");
    }
  }

  std::vector<unsigned char> data(data_bytes);
  is.read(reinterpret_cast<char *>(data.data()), std::streamsize(data_bytes));
  if (std::uint64_t(is.gcount()) != data_bytes)
    throw CheckpointError(Kind::kTruncated,
                          path + ": truncated data (" +
                              std::to_string(is.gcount()) + " of " +
                              std::to_string(data_bytes) + " bytes)");

  auto fill = [&](const std::vector<GroupEntry> &entries, ParameterSet &out) {
    for (const GroupEntry &e : entries) {
      if (e.offset % sizeof(double) != 0 ||
          e.offset + e.count * sizeof(double) > data_bytes)
        Malformed(path, "group " + e.name + " lies outside the data block");
      out.AddGroup(e.name, e.shape);
      auto &vals = out.Group(e.name).values;
      for (std::uint64_t i = 0; i < e.count; ++i)
        vals[i] = GetDouble(data.data() + e.offset + i * sizeof(double));
    }
  };
  fill(params, ckpt.params);
  if (ckpt.server) {
    fill(prev, ckpt.server->w_prev);
    if (!ckpt.server->w_prev.SameStructure(ckpt.params))
      Malformed(path, "server history does not match the parameters");
  }
  return ckpt;
}

Checkpoint LoadCheckpoint(const std::string &path, const ParameterSet &layout) {
  Checkpoint ckpt = LoadCheckpoint(path);
  const std::string bad = layout.FirstMismatch(ckpt.params);
  if (!bad.empty())
    throw CheckpointError(Kind::kShapeMismatch,
                          path + ": shape mismatch in group '" + bad + "'");
  return ckpt;
}

}  // namespace ftsim
