// include/mtpit/decode.hpp

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

#ifndef MTPIT_DECODE_HPP_
#define MTPIT_DECODE_HPP_

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "mtpit/common.hpp"
#include "mtpit/pit.hpp"
#include "mtpit/senone_graph.hpp"

namespace mtpit {

// Exact best length-T path under kappa * acoustics + graph weights.
// Arcs are relaxed in index order with strict improvement, so score ties
// resolve toward the smallest arc index at each step.
inline std::vector<int> viterbi(const SenoneGraph& g, const Mat& loglik,
                                double kappa) {
  const int T = static_cast<int>(loglik.rows());
  const int Q = g.num_states;
  check(T >= 1, "viterbi: empty sequence");
  check(kappa > 0.0, "viterbi: kappa must be positive");
  check(loglik.allFinite(), "viterbi: non-finite log-likelihood");
  check(g.label_bound <= loglik.cols(), "viterbi: senone axis too small");

  Mat delta = Mat::Constant(T + 1, Q, kLogZero);
  delta(0, g.start) = 0.0;
  std::vector<std::vector<int>> back(T, std::vector<int>(Q, -1));
  for (int t = 0; t < T; ++t)
    for (size_t a = 0; a < g.arcs.size(); ++a) {
      const Arc& arc = g.arcs[a];
      double s = delta(t, arc.src);
      if (s == kLogZero) continue;
      s += arc.logweight + kappa * loglik(t, arc.label);
      if (s > delta(t + 1, arc.dst)) {
        delta(t + 1, arc.dst) = s;
        back[t][arc.dst] = static_cast<int>(a);
      }
    }
  int best = -1;
  double best_score = kLogZero;
  for (int q = 0; q < Q; ++q) {
    if (delta(T, q) == kLogZero || g.final_logweight[q] == kLogZero) continue;
    double s = delta(T, q) + g.final_logweight[q];
    if (s > best_score) {
      best_score = s;
      best = q;
    }
  }
  check(best >= 0, "viterbi: no accepting path");
  std::vector<int> labels(T);
  for (int t = T - 1, q = best; t >= 0; --t) {
    const Arc& arc = g.arcs[back[t][q]];
    labels[t] = arc.label;
    q = arc.src;
  }
  return labels;
}

// Frame labels to scoring tokens: merge consecutive repeats, then drop
// silence, so silence-separated repeats survive.
inline std::vector<int> collapse(const std::vector<int>& frames,
                                 int silence = 0) {
  return collapse_labels(frames, silence);
}

struct EditCounts {
  int64_t substitutions = 0;
  int64_t deletions = 0;
  int64_t insertions = 0;
  int64_t correct = 0;

  int64_t errors() const { return substitutions + deletions + insertions; }
};

// Minimal unit-cost alignment; among minimal alignments the one with
// fewer insertions, then fewer deletions, wins. The (total, insertions,
// deletions) triple determines every count at a given cell, so the
// backtrace is deterministic.
inline EditCounts edit_distance(const std::vector<int>& ref,
                                const std::vector<int>& hyp) {
  const size_t R = ref.size();
  const size_t H = hyp.size();
  struct Cell {
    int64_t total;
    int64_t ins;
    int64_t del;
  };
  auto better = [](const Cell& a, const Cell& b) {
    if (a.total != b.total) return a.total < b.total;
    if (a.ins != b.ins) return a.ins < b.ins;
    return a.del < b.del;
  };
  std::vector<std::vector<Cell>> dp(R + 1, std::vector<Cell>(H + 1));
  for (size_t i = 0; i <= R; ++i)
    dp[i][0] = {static_cast<int64_t>(i), 0, static_cast<int64_t>(i)};
  for (size_t j = 1; j <= H; ++j)
    dp[0][j] = {static_cast<int64_t>(j), static_cast<int64_t>(j), 0};
  for (size_t i = 1; i <= R; ++i)
    for (size_t j = 1; j <= H; ++j) {
      int64_t miss = ref[i - 1] == hyp[j - 1] ? 0 : 1;
      Cell diag = {dp[i - 1][j - 1].total + miss, dp[i - 1][j - 1].ins,
                   dp[i - 1][j - 1].del};
      Cell del = {dp[i - 1][j].total + 1, dp[i - 1][j].ins,
                  dp[i - 1][j].del + 1};
      Cell ins = {dp[i][j - 1].total + 1, dp[i][j - 1].ins + 1,
                  dp[i][j - 1].del};
      Cell bestc = diag;
      if (better(del, bestc)) bestc = del;
      if (better(ins, bestc)) bestc = ins;
      dp[i][j] = bestc;
    }
  const Cell& end = dp[R][H];
  EditCounts out;
  out.insertions = end.ins;
  out.deletions = end.del;
  out.substitutions = end.total - end.ins - end.del;
  out.correct = static_cast<int64_t>(R) - out.substitutions - out.deletions;
  return out;
}

struct WerReport {
  int64_t substitutions = 0;
  int64_t deletions = 0;
  int64_t insertions = 0;
  int64_t correct = 0;
  int64_t reference_count = 0;
  double wer = 0.0;
  Permutation assignment;  // hypothesis index scored against reference n

  int64_t errors() const { return substitutions + deletions + insertions; }
};

inline double wer_ratio(int64_t errors, int64_t reference_count) {
  if (reference_count > 0)
    return static_cast<double>(errors) / static_cast<double>(reference_count);
  return errors == 0 ? 0.0 : std::numeric_limits<double>::infinity();
}

// Scores every bijection of hypothesis streams onto reference streams
// and keeps the one with the fewest total errors; ties go to the
// lexicographically smallest assignment, the identity first of all.
inline WerReport pairwise_wer(const std::vector<std::vector<int>>& references,
                              const std::vector<std::vector<int>>& hypotheses) {
  const int N = static_cast<int>(references.size());
  check(N >= 2, "pairwise_wer: needs at least 2 streams");
  check(N <= 6, "pairwise_wer: more than 6 streams");
  check(static_cast<int>(hypotheses.size()) == N,
        "pairwise_wer: stream count mismatch");

  std::vector<std::vector<EditCounts>> pair(N, std::vector<EditCounts>(N));
  for (int n = 0; n < N; ++n)
    for (int m = 0; m < N; ++m)
      pair[n][m] = edit_distance(references[n], hypotheses[m]);

  WerReport best;
  int64_t best_errors = -1;
  for (const Permutation& p : enumerate_permutations(N)) {
    int64_t errors = 0;
    for (int n = 0; n < N; ++n) errors += pair[n][p[n]].errors();
    if (best_errors < 0 || errors < best_errors) {
      best_errors = errors;
      best.assignment = p;
    }
  }
  for (int n = 0; n < N; ++n) {
    const EditCounts& c = pair[n][best.assignment[n]];
    best.substitutions += c.substitutions;
    best.deletions += c.deletions;
    best.insertions += c.insertions;
    best.correct += c.correct;
    best.reference_count += static_cast<int64_t>(references[n].size());
  }
  best.wer = wer_ratio(best.substitutions + best.deletions + best.insertions,
                       best.reference_count);
  return best;
}

struct UtteranceScore {
  std::string id;
  WerReport report;
};

// Corpus-level report: counts aggregate across utterances and streams
// before the single division.
inline WerReport aggregate_scores(const std::vector<UtteranceScore>& scores) {
  WerReport total;
  for (const UtteranceScore& u : scores) {
    total.substitutions += u.report.substitutions;
    total.deletions += u.report.deletions;
    total.insertions += u.report.insertions;
    total.correct += u.report.correct;
    total.reference_count += u.report.reference_count;
  }
  total.wer = wer_ratio(
      total.substitutions + total.deletions + total.insertions,
      total.reference_count);
  return total;
}

namespace detail {

inline std::string assignment_string(const Permutation& p) {
  std::string out;
  for (size_t n = 0; n < p.size(); ++n) {
    if (n > 0) out += '-';
    out += std::to_string(p[n]);
  }
  return out;
}

inline std::string wer_string(double wer) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", wer);
  return buf;
}

}  // namespace detail

inline void write_score_table(const std::vector<UtteranceScore>& scores,
                              const WerReport& summary, std::ostream& os) {
  os << "id assignment S D I C wer\n";
  for (const UtteranceScore& u : scores)
    os << u.id << ' ' << detail::assignment_string(u.report.assignment) << ' '
       << u.report.substitutions << ' ' << u.report.deletions << ' '
       << u.report.insertions << ' ' << u.report.correct << ' '
       << detail::wer_string(u.report.wer) << '\n';
  os << "TOTAL utts=" << scores.size() << " S=" << summary.substitutions
     << " D=" << summary.deletions << " I=" << summary.insertions
     << " C=" << summary.correct << " refs=" << summary.reference_count
     << " wer=" << detail::wer_string(summary.wer) << '\n';
}

inline void write_score_csv(const std::vector<UtteranceScore>& scores,
                            const WerReport& summary, std::ostream& os) {
  os << "id,assignment,substitutions,deletions,insertions,correct,"
        "reference_count,wer\n";
  for (const UtteranceScore& u : scores)
    os << u.id << ',' << detail::assignment_string(u.report.assignment) << ','
       << u.report.substitutions << ',' << u.report.deletions << ','
       << u.report.insertions << ',' << u.report.correct << ','
       << u.report.reference_count << ',' << detail::wer_string(u.report.wer)
       << '\n';
  os << "ALL,," << summary.substitutions << ',' << summary.deletions << ','
     << summary.insertions << ',' << summary.correct << ','
     << summary.reference_count << ',' << detail::wer_string(summary.wer)
     << '\n';
}

}  // namespace mtpit

#endif  // MTPIT_DECODE_HPP_
