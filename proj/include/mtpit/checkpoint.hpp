// mtpit/checkpoint.hpp
//
// Checkpoint format: version byte, stage tag byte, slice table (name and
// element count per slice), then all slice payloads as little-endian
// float64 in table order. Writes go through a temporary file and a rename
// so a crash never leaves a half-written checkpoint behind. Round-trips are
// bit-exact.

// Copyright 2026  mtpit authors

// See ../../COPYING for clarification regarding multiple authors
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

#ifndef MTPIT_CHECKPOINT_HPP_
#define MTPIT_CHECKPOINT_HPP_

#include <filesystem>
#include <fstream>
#include <string>

#include "mtpit/binio.hpp"
#include "mtpit/model.hpp"

namespace mtpit {

constexpr uint8_t kCheckpointVersion = 1;

inline void save_checkpoint(const ModelGraph& g, const std::string& path) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw RuntimeFailure("cannot write checkpoint: " + path);
    io::write_u8(os, kCheckpointVersion);
    io::write_u8(os, static_cast<uint8_t>(g.stage));
    io::write_u32(os, static_cast<uint32_t>(g.params.slices().size()));
    for (const ParamStore::Slice& s : g.params.slices()) {
      io::write_string(os, s.name);
      io::write_u32(os, static_cast<uint32_t>(s.len()));
    }
    for (const ParamStore::Slice& s : g.params.slices())
      for (int i = 0; i < s.len(); ++i)
        io::write_f64(os, g.params.data()[s.offset + i]);
    if (!os) throw RuntimeFailure("short write on checkpoint: " + path);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw RuntimeFailure("cannot finalize checkpoint: " + path);
}

inline char checkpoint_stage(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw RuntimeFailure("cannot read checkpoint: " + path);
  uint8_t version = io::read_u8(is);
  if (version != kCheckpointVersion)
    throw RuntimeFailure("unsupported checkpoint version in " + path);
  return static_cast<char>(io::read_u8(is));
}

// Loads into a graph already built from the experiment configuration.
// Slices are matched by name; stage tag, slice set, and slice lengths must
// all agree with the graph, so loading into a mismatched architecture is an
// error rather than a silent truncation.
inline void load_checkpoint(ModelGraph& g, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw RuntimeFailure("cannot read checkpoint: " + path);
  uint8_t version = io::read_u8(is);
  if (version != kCheckpointVersion)
    throw RuntimeFailure("unsupported checkpoint version in " + path);
  char stage = static_cast<char>(io::read_u8(is));
  if (stage != g.stage)
    throw RuntimeFailure("checkpoint stage '" + std::string(1, stage) +
                         "' does not match graph stage '" +
                         std::string(1, g.stage) + "'");
  uint32_t count = io::read_u32(is);
  if (count != g.params.slices().size())
    throw RuntimeFailure("checkpoint slice count mismatch in " + path);
  std::vector<std::pair<std::string, uint32_t>> table;
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = io::read_string(is);
    uint32_t len = io::read_u32(is);
    if (!g.params.has(name))
      throw RuntimeFailure("checkpoint slice unknown to graph: " + name);
    if (g.params.slice(name).len() != static_cast<int>(len))
      throw RuntimeFailure("checkpoint slice length mismatch: " + name);
    table.emplace_back(std::move(name), len);
  }
  for (const auto& [name, len] : table) {
    const ParamStore::Slice& s = g.params.slice(name);
    for (uint32_t i = 0; i < len; ++i)
      g.params.data()[s.offset + static_cast<int>(i)] = io::read_f64(is);
  }
}

}  // namespace mtpit

#endif  // MTPIT_CHECKPOINT_HPP_
