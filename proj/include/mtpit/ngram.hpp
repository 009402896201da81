// include/mtpit/ngram.hpp

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

#ifndef MTPIT_NGRAM_HPP_
#define MTPIT_NGRAM_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mtpit/common.hpp"

namespace mtpit {

// Senone-level back-off n-gram. Conditionals use add-k discounting
// (k = 0.1): a history observed in training keeps (c + k) / (C + k|V|)
// for its seen successors, and routes the leftover k-mass to unseen
// successors in proportion to the next-shorter history's conditional.
// Every conditional therefore sums to one exactly.
struct NGramModel {
  static constexpr double kAddK = 0.1;

  int order = 3;
  std::vector<int> vocabulary;                  // sorted distinct senone ids
  std::map<std::vector<int>, double> logprob;   // observed n-gram -> log P
  std::map<std::vector<int>, double> backoff;   // observed history -> log a
};

// log P(s | history). The history may be any length; only the last
// order-1 symbols condition the distribution. Unobserved histories fall
// through to shorter ones without a back-off penalty.
inline double cond_logprob(const NGramModel& m, std::vector<int> history,
                           int senone) {
  check(std::binary_search(m.vocabulary.begin(), m.vocabulary.end(), senone),
        "cond_logprob: senone outside vocabulary");
  if (static_cast<int>(history.size()) > m.order - 1)
    history.erase(history.begin(),
                  history.end() - static_cast<size_t>(m.order - 1));
  double penalty = 0.0;
  while (!history.empty()) {
    auto bo = m.backoff.find(history);
    if (bo != m.backoff.end()) {
      std::vector<int> key = history;
      key.push_back(senone);
      auto it = m.logprob.find(key);
      if (it != m.logprob.end()) return penalty + it->second;
      penalty += bo->second;
    }
    history.erase(history.begin());
  }
  return penalty + m.logprob.at({senone});
}

// Chain-rule score of a whole senone sequence, truncated histories at
// the start and no end-of-sequence event.
inline double sequence_logprob(const NGramModel& m,
                               const std::vector<int>& seq) {
  double total = 0.0;
  std::vector<int> history;
  for (int s : seq) {
    total += cond_logprob(m, history, s);
    history.push_back(s);
    if (static_cast<int>(history.size()) > m.order - 1)
      history.erase(history.begin());
  }
  return total;
}

inline NGramModel train_ngram(const std::vector<std::vector<int>>& transcripts,
                              int order) {
  check(order >= 1, "train_ngram: order must be at least 1");
  size_t frames = 0;
  for (const std::vector<int>& t : transcripts) frames += t.size();
  check(frames > 0, "train_ngram: empty corpus");

  NGramModel m;
  m.order = order;
  std::set<int> vocab;
  for (const std::vector<int>& t : transcripts)
    for (int s : t) {
      check(s >= 0, "train_ngram: negative senone id");
      vocab.insert(s);
    }
  m.vocabulary.assign(vocab.begin(), vocab.end());
  const double kv = NGramModel::kAddK * static_cast<double>(vocab.size());

  // counts[n-1] maps each observed n-gram to its count.
  std::vector<std::map<std::vector<int>, int64_t>> counts(order);
  for (const std::vector<int>& t : transcripts)
    for (size_t i = 0; i < t.size(); ++i)
      for (int n = 1; n <= order && n <= static_cast<int>(i) + 1; ++n)
        ++counts[n - 1][std::vector<int>(t.begin() + (i + 1 - n),
                                         t.begin() + (i + 1))];

  double total = 0.0;
  for (const auto& [key, c] : counts[0]) total += static_cast<double>(c);
  for (const auto& [key, c] : counts[0])
    m.logprob[key] =
        std::log((static_cast<double>(c) + NGramModel::kAddK) / (total + kv));

  for (int n = 2; n <= order; ++n) {
    // History counts derive from the n-gram counts so trailing windows
    // that were never extended do not count as contexts.
    std::map<std::vector<int>, double> hist_count;
    std::map<std::vector<int>, int> hist_seen;
    for (const auto& [key, c] : counts[n - 1]) {
      std::vector<int> h(key.begin(), key.end() - 1);
      hist_count[h] += static_cast<double>(c);
      ++hist_seen[h];
    }
    // The level below is fully normalized at this point, so the mass the
    // seen successors take from it can be totaled history by history.
    std::map<std::vector<int>, double> seen_lower;
    for (const auto& [key, c] : counts[n - 1]) {
      std::vector<int> h(key.begin(), key.end() - 1);
      m.logprob[key] = std::log((static_cast<double>(c) + NGramModel::kAddK) /
                                (hist_count[h] + kv));
      std::vector<int> shorter(h.begin() + 1, h.end());
      seen_lower[h] += std::exp(cond_logprob(m, shorter, key.back()));
    }
    for (const auto& [h, ch] : hist_count) {
      int unseen = static_cast<int>(vocab.size()) - hist_seen[h];
      if (unseen == 0) {
        m.backoff[h] = kLogZero;
      } else {
        double leftover = NGramModel::kAddK * unseen / (ch + kv);
        m.backoff[h] = std::log(leftover) - std::log1p(-seen_lower[h]);
      }
    }
  }
  return m;
}

// One frame-aligned transcript pair from a two-talker mixture.
struct TranscriptPair {
  std::vector<int> a;
  std::vector<int> b;
};

// Artificial swap augmentation. Each of the gamma extra copies of a pair
// exchanges the two streams at individual frames: an eligible frame swaps
// with probability alpha, and a swap locks out the following beta frames.
// Output order per pair: both originals, then both streams of each copy.
inline std::vector<std::vector<int>> augment_swapped(
    const std::vector<TranscriptPair>& pairs, double alpha, int beta,
    int gamma, uint64_t seed) {
  check(alpha >= 0.0 && alpha <= 1.0, "augment_swapped: alpha outside [0,1]");
  check(beta >= 0, "augment_swapped: negative beta");
  check(gamma >= 0, "augment_swapped: negative gamma");
  std::vector<std::vector<int>> out;
  out.reserve(pairs.size() * (2 + 2 * static_cast<size_t>(gamma)));
  for (size_t i = 0; i < pairs.size(); ++i) {
    const TranscriptPair& p = pairs[i];
    check(p.a.size() == p.b.size(), "augment_swapped: unequal pair lengths");
    out.push_back(p.a);
    out.push_back(p.b);
    for (int c = 0; c < gamma; ++c) {
      std::mt19937_64 rng(
          mix_seed(seed, i * static_cast<uint64_t>(gamma) + c));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::vector<int> a = p.a;
      std::vector<int> b = p.b;
      size_t lockout_until = 0;  // first eligible frame
      for (size_t t = 0; t < a.size(); ++t) {
        if (t < lockout_until) continue;
        if (unit(rng) < alpha) {
          std::swap(a[t], b[t]);
          lockout_until = t + 1 + static_cast<size_t>(beta);
        }
      }
      out.push_back(std::move(a));
      out.push_back(std::move(b));
    }
  }
  return out;
}

}  // namespace mtpit

#endif  // MTPIT_NGRAM_HPP_
