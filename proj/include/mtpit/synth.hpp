// mtpit/synth.hpp
//
// Synthetic two-talker corpus generation: per-speaker senone state machines
// with non-negative linear-domain emissions, log(1+x) feature compression,
// and exact additive mixing of equal-length (zero-padded) segment pairs.

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

#ifndef MTPIT_SYNTH_HPP_
#define MTPIT_SYNTH_HPP_

#include <algorithm>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mtpit/common.hpp"

namespace mtpit {

constexpr int kSilence = 0;  // silence senone index, by convention

struct SpeakerModel {
  std::string id;
  Mat transition;      // S x S, row-stochastic; row = current senone
  Mat emission_means;  // S x D, linear-domain energies, >= 0
  Vec emission_scale;  // S, positive noise spread in the linear domain
  uint64_t seed = 0;

  int senones() const { return static_cast<int>(transition.rows()); }
  int feat_dim() const { return static_cast<int>(emission_means.cols()); }
};

struct CleanUtterance {
  std::string speaker_id;
  Mat features;                 // T x D, log(1 + linear)
  Mat linear;                   // T x D, >= 0
  std::vector<int> alignment;   // length T senone indices
  std::vector<int> transcript;  // alignment collapsed, silence removed

  int frames() const { return static_cast<int>(features.rows()); }
  int feat_dim() const { return static_cast<int>(features.cols()); }
};

struct MixedUtterance {
  std::string id;
  Mat mixed_features;                            // T x D, log(1 + sum of linears)
  std::vector<CleanUtterance> streams;           // zero-padded to length T
  std::vector<std::vector<int>> padded_alignments;
  std::vector<std::pair<int, int>> pad_offsets;  // per stream (front, back)

  int frames() const { return static_cast<int>(mixed_features.rows()); }
  int feat_dim() const { return static_cast<int>(mixed_features.cols()); }
  int num_streams() const { return static_cast<int>(streams.size()); }
};

struct Corpus {
  int feat_dim = 0;
  int senones = 0;
  std::vector<MixedUtterance> utterances;
};

struct SpeakerConfig {
  int feat_dim = 16;
  int senones = 21;  // silence plus speech senones
  uint64_t seed = 0;
  std::string id = "spk";
};

struct CorpusConfig {
  int utterances = 100;  // mixed utterances; 2x this many segments are drawn
  int len_min = 30;
  int len_max = 60;
  uint64_t seed = 0;
  std::string id_prefix = "mix";
};

// Fixed spectral template for a senone: two energy bumps whose positions are a
// deterministic function of the senone index, so inventories of any size get
// distinct, speaker-independent shapes. Silence is near-zero energy.
inline Vec senone_template(int senone, int feat_dim) {
  Vec tpl = Vec::Zero(feat_dim);
  if (senone == kSilence) {
    tpl.setConstant(0.05);
    return tpl;
  }
  int p1 = static_cast<int>((7919ull * senone) % feat_dim);
  int p2 = static_cast<int>((104729ull * senone + 3) % feat_dim);
  for (int d = 0; d < feat_dim; ++d) {
    double d1 = d - p1, d2 = d - p2;
    tpl[d] = 2.6 * std::exp(-d1 * d1 / (2.0 * 1.5 * 1.5)) +
             1.9 * std::exp(-d2 * d2 / (2.0 * 2.0 * 2.0)) + 0.15;
  }
  return tpl;
}

inline SpeakerModel gen_speaker(const SpeakerConfig& config) {
  check(config.senones >= 2, "gen_speaker: need silence plus at least one speech senone");
  check(config.feat_dim >= 1, "gen_speaker: feature dimension must be positive");
  const int S = config.senones, D = config.feat_dim;
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SpeakerModel m;
  m.id = config.id;
  m.seed = config.seed;

  // Speaker identity: smooth per-dimension gain plus per-(senone,dim) jitter.
  Vec gain(D);
  for (int d = 0; d < D; ++d) gain[d] = 0.7 + 0.6 * unit(rng);
  m.emission_means = Mat(S, D);
  for (int s = 0; s < S; ++s) {
    Vec tpl = senone_template(s, D);
    for (int d = 0; d < D; ++d) {
      double jitter = s == kSilence ? 0.0 : 0.3 * (unit(rng) - 0.5);
      m.emission_means(s, d) = std::max(0.0, tpl[d] * gain[d] + jitter);
    }
  }
  m.emission_scale = Vec(S);
  for (int s = 0; s < S; ++s)
    m.emission_scale[s] = s == kSilence ? 0.05 : 0.15 + 0.15 * unit(rng);

  // Sticky first-order senone chain; every senone can reach silence.
  m.transition = Mat(S, S);
  for (int s = 0; s < S; ++s) {
    Vec row = Vec::Zero(S);
    double self = s == kSilence ? 0.65 : 0.70;
    double to_sil = s == kSilence ? 0.0 : 0.05;
    double speech_mass = 1.0 - self - to_sil;
    Vec w = Vec::Zero(S);
    double wsum = 0.0;
    for (int t = 1; t < S; ++t) {
      if (t == s) continue;
      w[t] = 0.05 + unit(rng);
      wsum += w[t];
    }
    if (wsum == 0.0) {  // two-senone inventory: nowhere to go but silence
      to_sil += speech_mass;
      speech_mass = 0.0;
      wsum = 1.0;
    }
    for (int t = 1; t < S; ++t)
      if (t != s) row[t] = speech_mass * w[t] / wsum;
    row[kSilence] = s == kSilence ? 0.0 : to_sil;
    row[s] += self;
    m.transition.row(s) = row.transpose() / row.sum();
  }
  return m;
}

inline CleanUtterance gen_clean(const SpeakerModel& model, int length, uint64_t seed) {
  check(length >= 1, "gen_clean: length must be positive");
  const int S = model.senones(), D = model.feat_dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  CleanUtterance utt;
  utt.speaker_id = model.id;
  utt.alignment.resize(length);
  int state = kSilence;
  for (int t = 0; t < length; ++t) {
    utt.alignment[t] = state;
    double u = unit(rng), acc = 0.0;
    int next = S - 1;
    for (int s = 0; s < S; ++s) {
      acc += model.transition(state, s);
      if (u < acc) { next = s; break; }
    }
    state = next;
  }

  utt.linear = Mat(length, D);
  for (int t = 0; t < length; ++t) {
    int s = utt.alignment[t];
    for (int d = 0; d < D; ++d) {
      double e = model.emission_means(s, d) + model.emission_scale[s] * gauss(rng);
      utt.linear(t, d) = std::max(0.0, e);
    }
  }
  utt.features = log_compress(utt.linear);
  utt.transcript = collapse_labels(utt.alignment);
  return utt;
}

// Zero-pads a clean stream to total length frames: floor(pad/2) in front, the
// remainder in back. Padded frames carry zero energy and the silence label.
inline CleanUtterance pad_stream(const CleanUtterance& utt, int frames) {
  const int t0 = utt.frames();
  check(frames >= t0, "pad_stream: target length shorter than stream");
  const int pad = frames - t0;
  const int front = pad / 2;
  CleanUtterance out;
  out.speaker_id = utt.speaker_id;
  out.linear = Mat::Zero(frames, utt.feat_dim());
  out.linear.middleRows(front, t0) = utt.linear;
  out.features = log_compress(out.linear);
  out.alignment.assign(frames, kSilence);
  std::copy(utt.alignment.begin(), utt.alignment.end(), out.alignment.begin() + front);
  out.transcript = collapse_labels(out.alignment);
  return out;
}

inline MixedUtterance mix_pair(const CleanUtterance& a, const CleanUtterance& b) {
  check(a.feat_dim() == b.feat_dim(), "mix_pair: feature dimension mismatch");
  const int frames = std::max(a.frames(), b.frames());
  MixedUtterance mix;
  mix.streams.push_back(pad_stream(a, frames));
  mix.streams.push_back(pad_stream(b, frames));
  for (const CleanUtterance& s : mix.streams) {
    mix.padded_alignments.push_back(s.alignment);
  }
  mix.pad_offsets.push_back({(frames - a.frames()) / 2,
                             frames - a.frames() - (frames - a.frames()) / 2});
  mix.pad_offsets.push_back({(frames - b.frames()) / 2,
                             frames - b.frames() - (frames - b.frames()) / 2});
  Mat sum = mix.streams[0].linear + mix.streams[1].linear;
  mix.mixed_features = log_compress(sum);
  return mix;
}

// Sort-then-pair mixing rule: segments are sorted by length descending and
// consecutive pairs are mixed, so no segment is reused. When neighbours
// share a speaker, the nearest later segment from a different speaker is
// swapped in; failing that is an error.
inline std::vector<MixedUtterance> pair_and_mix(
    std::vector<CleanUtterance> segments, const std::string& id_prefix = "mix") {
  check(!segments.empty() && segments.size() % 2 == 0,
        "pair_and_mix: segment count must be even and nonzero");
  std::stable_sort(segments.begin(), segments.end(),
                   [](const CleanUtterance& x, const CleanUtterance& y) {
                     return x.frames() > y.frames();
                   });
  for (size_t i = 0; i + 1 < segments.size(); i += 2) {
    if (segments[i].speaker_id != segments[i + 1].speaker_id) continue;
    size_t j = i + 2;
    while (j < segments.size() &&
           segments[j].speaker_id == segments[i].speaker_id)
      ++j;
    if (j < segments.size()) {
      std::swap(segments[i + 1], segments[j]);
      continue;
    }
    // Every later segment shares this speaker. Repair against an earlier
    // pair whose members both differ from it; such a pair exists whenever a
    // valid pairing exists at all.
    size_t p = 0;
    for (; p + 1 < i; p += 2) {
      if (segments[p].speaker_id != segments[i].speaker_id &&
          segments[p + 1].speaker_id != segments[i].speaker_id)
        break;
    }
    check(p + 1 < i, "pair_and_mix: cannot pair distinct speakers");
    std::swap(segments[p + 1], segments[i + 1]);
  }
  std::vector<MixedUtterance> mixed;
  mixed.reserve(segments.size() / 2);
  for (size_t p = 0; 2 * p + 1 < segments.size(); ++p) {
    MixedUtterance mix = mix_pair(segments[2 * p], segments[2 * p + 1]);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%05zu", id_prefix.c_str(), p);
    mix.id = buf;
    mixed.push_back(std::move(mix));
  }
  return mixed;
}

// Draws 2*config.utterances segments round-robin across speakers with
// per-segment derived seeds, then applies the sort-then-pair rule.
inline Corpus build_corpus(const std::vector<SpeakerModel>& models,
                           const CorpusConfig& config) {
  check(models.size() >= 2, "build_corpus: need at least two speakers");
  check(config.utterances >= 1, "build_corpus: need at least one utterance");
  check(config.len_min >= 1 && config.len_max >= config.len_min,
        "build_corpus: bad length range");
  for (size_t i = 1; i < models.size(); ++i) {
    check(models[i].senones() == models[0].senones() &&
              models[i].feat_dim() == models[0].feat_dim(),
          "build_corpus: speaker models disagree on dimensions");
  }
  const int segments = 2 * config.utterances;
  std::vector<CleanUtterance> segs;
  segs.reserve(segments);
  for (int i = 0; i < segments; ++i) {
    uint64_t seed = mix_seed(config.seed, static_cast<uint64_t>(i));
    std::mt19937_64 rng(mix_seed(seed, 1));
    int len = config.len_min +
              static_cast<int>(rng() % static_cast<uint64_t>(config.len_max - config.len_min + 1));
    segs.push_back(gen_clean(models[i % models.size()], len, seed));
  }
  Corpus corpus;
  corpus.feat_dim = models[0].feat_dim();
  corpus.senones = models[0].senones();
  corpus.utterances = pair_and_mix(std::move(segs), config.id_prefix);
  return corpus;
}

}  // namespace mtpit

#endif  // MTPIT_SYNTH_HPP_
