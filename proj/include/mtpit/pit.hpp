// mtpit/pit.hpp
//
// Permutation-invariant training objectives: frame-wise and utterance-level
// MSE-PIT, CE-PIT, self-transfer KLD-PIT, and hard/soft interpolation.
// Assignments are found by exhaustive search over stream permutations
// (N <= 6); ties go to the lexicographically smallest permutation so
// training stays deterministic.

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

#ifndef MTPIT_PIT_HPP_
#define MTPIT_PIT_HPP_

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mtpit/common.hpp"

namespace mtpit {

// Maps inference-stream index to reference-stream index; a bijection.
using Permutation = std::vector<int>;

// pair_costs(n, m) is the unnormalized cost of pairing inference stream n
// with reference stream m, summed over frames; pair_grads[n][m] is its
// gradient w.r.t. outputs[n]. Both are filled by the utterance-level losses
// so interpolate() can re-minimize the combined objective jointly.
struct LossResult {
  double value = 0.0;
  std::vector<Mat> gradients;                 // d value / d outputs[n]
  Permutation winning_permutation;            // utterance-level assignment
  std::vector<Permutation> frame_permutations;  // frame-wise PIT only
  Mat pair_costs;
  std::vector<std::vector<Mat>> pair_grads;
};

inline std::vector<Permutation> enumerate_permutations(int n) {
  check(n >= 1 && n <= 6, "permutation enumeration requires 1 <= N <= 6");
  Permutation p(n);
  std::iota(p.begin(), p.end(), 0);
  std::vector<Permutation> all;
  do {
    all.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return all;
}

// Exhaustive assignment over N! permutations. Candidates are visited in
// lexicographic order and only a strict improvement replaces the incumbent,
// so ties resolve to the lexicographically smallest permutation.
inline Permutation best_permutation(const Mat& pair_costs) {
  const int n = static_cast<int>(pair_costs.rows());
  check(pair_costs.cols() == n, "best_permutation: cost matrix must be square");
  check(n <= 6, "best_permutation: N > 6 unsupported");
  Permutation best;
  double best_cost = 0.0;
  for (const Permutation& p : enumerate_permutations(n)) {
    double cost = 0.0;
    for (int i = 0; i < n; ++i) cost += pair_costs(i, p[i]);
    if (best.empty() || cost < best_cost) {
      best = p;
      best_cost = cost;
    }
  }
  return best;
}

namespace detail {

inline void check_stream_shapes(const std::vector<Mat>& outputs,
                                const std::vector<Mat>& refs) {
  check(!outputs.empty() && outputs.size() == refs.size(),
        "stream count mismatch");
  for (size_t n = 0; n < outputs.size(); ++n) {
    check(outputs[n].rows() == outputs[0].rows() &&
              outputs[n].cols() == outputs[0].cols(),
          "output stream shape mismatch");
    check(refs[n].rows() == outputs[0].rows() &&
              refs[n].cols() == outputs[0].cols(),
          "reference stream shape mismatch");
  }
}

inline void check_normalized(const Mat& log_post, const char* what) {
  for (int t = 0; t < log_post.rows(); ++t) {
    double lse = log_sum_exp_row(log_post.row(t));
    check(std::abs(lse) <= 1e-6, std::string(what) +
                                     " log-posterior row is unnormalized");
  }
}

}  // namespace detail

// Frame-wise MSE-PIT: the assignment is re-minimized at every frame and the
// per-frame minima are summed. Per-frame pair cost is the mean squared
// element-wise difference of the two frame vectors.
inline LossResult mse_pit_frame(const std::vector<Mat>& outputs,
                                const std::vector<Mat>& refs) {
  detail::check_stream_shapes(outputs, refs);
  const int N = static_cast<int>(outputs.size());
  const int T = static_cast<int>(outputs[0].rows());
  const int D = static_cast<int>(outputs[0].cols());
  LossResult res;
  res.gradients.assign(N, Mat::Zero(T, D));
  res.frame_permutations.resize(T);
  for (int t = 0; t < T; ++t) {
    Mat costs(N, N);
    for (int n = 0; n < N; ++n)
      for (int m = 0; m < N; ++m)
        costs(n, m) = (outputs[n].row(t) - refs[m].row(t)).squaredNorm() / D;
    Permutation p = best_permutation(costs);
    double frame_cost = 0.0;
    for (int n = 0; n < N; ++n) {
      frame_cost += costs(n, p[n]);
      res.gradients[n].row(t) =
          (2.0 / (N * D)) * (outputs[n].row(t) - refs[p[n]].row(t));
    }
    res.value += frame_cost / N;
    res.frame_permutations[t] = std::move(p);
  }
  return res;
}

// Utterance-level MSE-PIT: one assignment for the whole utterance.
inline LossResult mse_pit_utt(const std::vector<Mat>& outputs,
                              const std::vector<Mat>& refs) {
  detail::check_stream_shapes(outputs, refs);
  const int N = static_cast<int>(outputs.size());
  const int T = static_cast<int>(outputs[0].rows());
  const int D = static_cast<int>(outputs[0].cols());
  LossResult res;
  res.pair_costs = Mat(N, N);
  res.pair_grads.assign(N, std::vector<Mat>(N));
  for (int n = 0; n < N; ++n) {
    for (int m = 0; m < N; ++m) {
      res.pair_costs(n, m) = (outputs[n] - refs[m]).squaredNorm() / D;
      res.pair_grads[n][m] = (2.0 / D) * (outputs[n] - refs[m]);
    }
  }
  res.winning_permutation = best_permutation(res.pair_costs);
  res.gradients.assign(N, Mat::Zero(T, D));
  for (int n = 0; n < N; ++n) {
    res.value += res.pair_costs(n, res.winning_permutation[n]) / N;
    res.gradients[n] = res.pair_grads[n][res.winning_permutation[n]] / N;
  }
  return res;
}

// CE-PIT over senone labels. Pair cost (n, m) sums the negative
// log-posterior of reference stream m's label along inference stream n.
inline LossResult ce_pit(const std::vector<Mat>& log_posteriors,
                         const std::vector<std::vector<int>>& labels) {
  check(!log_posteriors.empty() && log_posteriors.size() == labels.size(),
        "stream count mismatch");
  const int N = static_cast<int>(log_posteriors.size());
  const int T = static_cast<int>(log_posteriors[0].rows());
  const int S = static_cast<int>(log_posteriors[0].cols());
  for (int n = 0; n < N; ++n) {
    check(log_posteriors[n].rows() == T && log_posteriors[n].cols() == S,
          "log-posterior shape mismatch");
    check(static_cast<int>(labels[n].size()) == T, "label length mismatch");
    for (int t = 0; t < T; ++t)
      check(labels[n][t] >= 0 && labels[n][t] < S, "label out of range");
  }
  LossResult res;
  res.pair_costs = Mat(N, N);
  res.pair_grads.assign(N, std::vector<Mat>(N));
  for (int n = 0; n < N; ++n) {
    for (int m = 0; m < N; ++m) {
      double cost = 0.0;
      Mat g = Mat::Zero(T, S);
      for (int t = 0; t < T; ++t) {
        cost -= log_posteriors[n](t, labels[m][t]);
        g(t, labels[m][t]) -= 1.0;
      }
      res.pair_costs(n, m) = cost;
      res.pair_grads[n][m] = std::move(g);
    }
  }
  res.winning_permutation = best_permutation(res.pair_costs);
  res.gradients.assign(N, Mat::Zero(T, S));
  for (int n = 0; n < N; ++n) {
    res.value += res.pair_costs(n, res.winning_permutation[n]) / N;
    res.gradients[n] = res.pair_grads[n][res.winning_permutation[n]] / N;
  }
  return res;
}

// Self-transfer KLD-PIT in its optimization form: the teacher-entropy term
// is dropped, leaving the cross term sum_i -y_i(teacher) * log y_i(student).
// The teacher is a constant; gradients flow to the student only. With a
// one-hot teacher this reduces exactly to ce_pit: the zero-probability
// teacher entries contribute exactly 0 and the surviving term is the
// negative student log-posterior at the teacher's label.
inline LossResult kld_pit(const std::vector<Mat>& student_log_post,
                          const std::vector<Mat>& teacher_log_post) {
  detail::check_stream_shapes(student_log_post, teacher_log_post);
  const int N = static_cast<int>(student_log_post.size());
  const int T = static_cast<int>(student_log_post[0].rows());
  const int S = static_cast<int>(student_log_post[0].cols());
  for (int n = 0; n < N; ++n) {
    detail::check_normalized(student_log_post[n], "student");
    detail::check_normalized(teacher_log_post[n], "teacher");
  }
  LossResult res;
  res.pair_costs = Mat(N, N);
  res.pair_grads.assign(N, std::vector<Mat>(N));
  for (int n = 0; n < N; ++n) {
    for (int m = 0; m < N; ++m) {
      double cost = 0.0;
      Mat g = Mat::Zero(T, S);
      for (int t = 0; t < T; ++t) {
        for (int i = 0; i < S; ++i) {
          double p = std::exp(teacher_log_post[m](t, i));
          if (p == 0.0) continue;
          cost -= p * student_log_post[n](t, i);
          g(t, i) -= p;
        }
      }
      res.pair_costs(n, m) = cost;
      res.pair_grads[n][m] = std::move(g);
    }
  }
  res.winning_permutation = best_permutation(res.pair_costs);
  res.gradients.assign(N, Mat::Zero(T, S));
  for (int n = 0; n < N; ++n) {
    res.value += res.pair_costs(n, res.winning_permutation[n]) / N;
    res.gradients[n] = res.pair_grads[n][res.winning_permutation[n]] / N;
  }
  return res;
}

// Hard/soft interpolation. The assignment is chosen by minimizing the
// interpolated objective itself rather than inheriting either term's own
// winner, and both terms are then re-read under that joint assignment. The
// endpoints w=1 and w=0 return the respective input unchanged so they match
// ce_pit / kld_pit bit for bit.
inline LossResult interpolate(const LossResult& hard, const LossResult& soft,
                              double w) {
  check(w >= 0.0 && w <= 1.0, "interpolation weight out of range");
  if (w == 1.0) return hard;
  if (w == 0.0) return soft;
  const int N = static_cast<int>(hard.pair_costs.rows());
  check(N >= 1 && soft.pair_costs.rows() == N,
        "interpolate: losses disagree on stream count");
  check(!hard.pair_grads.empty() && !soft.pair_grads.empty(),
        "interpolate: inputs must carry pairwise gradients");
  LossResult res;
  res.pair_costs = w * hard.pair_costs + (1.0 - w) * soft.pair_costs;
  res.winning_permutation = best_permutation(res.pair_costs);
  res.pair_grads.assign(N, std::vector<Mat>(N));
  res.gradients.resize(N);
  for (int n = 0; n < N; ++n) {
    const int m = res.winning_permutation[n];
    res.value += res.pair_costs(n, m) / N;
    for (int mm = 0; mm < N; ++mm)
      res.pair_grads[n][mm] =
          w * hard.pair_grads[n][mm] + (1.0 - w) * soft.pair_grads[n][mm];
    res.gradients[n] = res.pair_grads[n][m] / N;
  }
  return res;
}

}  // namespace mtpit

#endif  // MTPIT_PIT_HPP_
