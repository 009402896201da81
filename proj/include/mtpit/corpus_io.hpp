// mtpit/corpus_io.hpp
//
// Corpus directory format: a text manifest (one record per utterance: id, T,
// D, N, per-stream pad offsets and speaker) plus one binary record per
// utterance. Binary records lead with a format version byte and hold
// little-endian 64-bit floats in row-major order; alignments are 32-bit
// unsigned indices.

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

#ifndef MTPIT_CORPUS_IO_HPP_
#define MTPIT_CORPUS_IO_HPP_

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mtpit/binio.hpp"
#include "mtpit/synth.hpp"

namespace mtpit {

constexpr uint8_t kCorpusRecordVersion = 1;

inline void save_utterance_record(const MixedUtterance& utt, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw RuntimeFailure("cannot write corpus record: " + path);
  io::write_u8(os, kCorpusRecordVersion);
  io::write_matrix(os, utt.mixed_features);
  for (const CleanUtterance& s : utt.streams) {
    io::write_matrix(os, s.linear);
    for (int a : s.alignment) io::write_u32(os, static_cast<uint32_t>(a));
  }
  if (!os) throw RuntimeFailure("short write on corpus record: " + path);
}

inline MixedUtterance load_utterance_record(const std::string& path,
                                            const std::string& id, int frames,
                                            int feat_dim, int streams,
                                            const std::vector<std::pair<int, int>>& pads,
                                            const std::vector<std::string>& speakers) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw RuntimeFailure("cannot read corpus record: " + path);
  uint8_t version = io::read_u8(is);
  if (version != kCorpusRecordVersion)
    throw RuntimeFailure("unsupported corpus record version in " + path);
  MixedUtterance utt;
  utt.id = id;
  utt.mixed_features = io::read_matrix(is, frames, feat_dim);
  utt.pad_offsets = pads;
  for (int n = 0; n < streams; ++n) {
    CleanUtterance s;
    s.speaker_id = speakers[n];
    s.linear = io::read_matrix(is, frames, feat_dim);
    s.features = log_compress(s.linear);
    s.alignment.resize(frames);
    for (int t = 0; t < frames; ++t)
      s.alignment[t] = static_cast<int>(io::read_u32(is));
    s.transcript = collapse_labels(s.alignment);
    utt.padded_alignments.push_back(s.alignment);
    utt.streams.push_back(std::move(s));
  }
  return utt;
}

inline void save_corpus(const Corpus& corpus, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw RuntimeFailure("cannot create corpus directory: " + dir);
  std::ofstream manifest(dir + "/manifest.txt", std::ios::trunc);
  if (!manifest) throw RuntimeFailure("cannot write manifest in " + dir);
  manifest << "mtpit-corpus 1 " << corpus.feat_dim << ' ' << corpus.senones
           << ' ' << corpus.utterances.size() << '\n';
  for (const MixedUtterance& utt : corpus.utterances) {
    manifest << utt.id << ' ' << utt.frames() << ' ' << utt.feat_dim() << ' '
             << utt.num_streams();
    for (int n = 0; n < utt.num_streams(); ++n) {
      manifest << ' ' << utt.pad_offsets[n].first << ' '
               << utt.pad_offsets[n].second << ' ' << utt.streams[n].speaker_id;
    }
    manifest << '\n';
    save_utterance_record(utt, dir + "/" + utt.id + ".bin");
  }
  if (!manifest) throw RuntimeFailure("short write on manifest in " + dir);
}

inline Corpus load_corpus(const std::string& dir) {
  std::ifstream manifest(dir + "/manifest.txt");
  if (!manifest) throw RuntimeFailure("cannot read manifest in " + dir);
  std::string magic;
  int version = 0;
  size_t count = 0;
  Corpus corpus;
  manifest >> magic >> version >> corpus.feat_dim >> corpus.senones >> count;
  if (magic != "mtpit-corpus" || version != 1)
    throw RuntimeFailure("bad corpus manifest in " + dir);
  for (size_t i = 0; i < count; ++i) {
    std::string id;
    int frames = 0, feat_dim = 0, streams = 0;
    manifest >> id >> frames >> feat_dim >> streams;
    if (!manifest) throw RuntimeFailure("truncated manifest in " + dir);
    std::vector<std::pair<int, int>> pads(streams);
    std::vector<std::string> speakers(streams);
    for (int n = 0; n < streams; ++n)
      manifest >> pads[n].first >> pads[n].second >> speakers[n];
    corpus.utterances.push_back(load_utterance_record(
        dir + "/" + id + ".bin", id, frames, feat_dim, streams, pads, speakers));
  }
  return corpus;
}

}  // namespace mtpit

#endif  // MTPIT_CORPUS_IO_HPP_
