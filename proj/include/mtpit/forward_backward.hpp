// include/mtpit/forward_backward.hpp

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

#ifndef MTPIT_FORWARD_BACKWARD_HPP_
#define MTPIT_FORWARD_BACKWARD_HPP_

#include <cmath>
#include <vector>

#include "mtpit/common.hpp"
#include "mtpit/senone_graph.hpp"

namespace mtpit {

// Arc posteriors per frame plus their per-senone marginals. Each frame's
// senone marginals sum to 1.
struct OccupancyGrid {
  Mat arc;     // T x num_arcs
  Mat senone;  // T x S
};

struct FBResult {
  double logZ = 0.0;           // forward recursion total
  double logZ_backward = 0.0;  // same total from the backward recursion
  OccupancyGrid occ;
};

// Log-space forward-backward over the acceptor; every arc consumes one
// frame and contributes its graph weight plus kappa times the acoustic
// log-likelihood of its label.
inline FBResult forward_backward(const SenoneGraph& g, const Mat& loglik,
                                 double kappa) {
  const int T = static_cast<int>(loglik.rows());
  const int S = static_cast<int>(loglik.cols());
  const int Q = g.num_states;
  const int A = static_cast<int>(g.arcs.size());
  check(T >= 1, "forward_backward: empty sequence");
  check(kappa > 0.0, "forward_backward: kappa must be positive");
  check(loglik.allFinite(), "forward_backward: non-finite log-likelihood");
  check(g.label_bound <= S, "forward_backward: senone axis too small");

  Mat alpha = Mat::Constant(T + 1, Q, kLogZero);
  alpha(0, g.start) = 0.0;
  for (int t = 0; t < T; ++t)
    for (const Arc& arc : g.arcs) {
      double branch = alpha(t, arc.src);
      if (branch == kLogZero) continue;
      branch += arc.logweight + kappa * loglik(t, arc.label);
      alpha(t + 1, arc.dst) = log_sum_exp(alpha(t + 1, arc.dst), branch);
    }
  LogAccum total;
  for (int q = 0; q < Q; ++q)
    if (alpha(T, q) > kLogZero) total.add(alpha(T, q) + g.final_logweight[q]);

  Mat beta = Mat::Constant(T + 1, Q, kLogZero);
  for (int q = 0; q < Q; ++q) beta(T, q) = g.final_logweight[q];
  for (int t = T - 1; t >= 0; --t)
    for (const Arc& arc : g.arcs) {
      double branch = beta(t + 1, arc.dst);
      if (branch == kLogZero) continue;
      branch += arc.logweight + kappa * loglik(t, arc.label);
      beta(t, arc.src) = log_sum_exp(beta(t, arc.src), branch);
    }

  FBResult r;
  r.logZ = total.value;
  r.logZ_backward = beta(0, g.start);
  check(r.logZ > kLogZero, "forward_backward: no accepting path");
  r.occ.arc = Mat::Zero(T, A);
  r.occ.senone = Mat::Zero(T, S);
  for (int t = 0; t < T; ++t)
    for (int a = 0; a < A; ++a) {
      const Arc& arc = g.arcs[a];
      double lp = alpha(t, arc.src);
      double bw = beta(t + 1, arc.dst);
      if (lp == kLogZero || bw == kLogZero) continue;
      lp += arc.logweight + kappa * loglik(t, arc.label) + bw - r.logZ;
      double p = std::exp(lp);
      r.occ.arc(t, a) = p;
      r.occ.senone(t, arc.label) += p;
    }
  return r;
}

// Forced pass over the single reference path: the total is the path
// score and the occupancies are one-hot at the traversed arc per frame.
inline FBResult numerator_fb(const SenoneGraph& g,
                             const std::vector<int>& reference,
                             const Mat& loglik, double kappa) {
  const int T = static_cast<int>(loglik.rows());
  const int S = static_cast<int>(loglik.cols());
  check(static_cast<int>(reference.size()) == T,
        "numerator_fb: reference length mismatch");
  check(T >= 1, "numerator_fb: empty sequence");
  check(kappa > 0.0, "numerator_fb: kappa must be positive");
  check(loglik.allFinite(), "numerator_fb: non-finite log-likelihood");

  FBResult r;
  r.occ.arc = Mat::Zero(T, static_cast<Eigen::Index>(g.arcs.size()));
  r.occ.senone = Mat::Zero(T, S);
  int q = g.start;
  double score = 0.0;
  for (int t = 0; t < T; ++t) {
    int s = reference[t];
    check(s >= 0 && s < S, "numerator_fb: reference senone out of range");
    int found = -1;
    for (int a = g.arc_offset[q]; a < g.arc_offset[q + 1]; ++a)
      if (g.arcs[a].label == s) {
        found = a;
        break;
      }
    check(found >= 0, "numerator_fb: reference symbol not accepted");
    score += g.arcs[found].logweight + kappa * loglik(t, s);
    r.occ.arc(t, found) = 1.0;
    r.occ.senone(t, s) = 1.0;
    q = g.arcs[found].dst;
  }
  score += g.final_logweight[q];
  r.logZ = score;
  r.logZ_backward = score;
  return r;
}

}  // namespace mtpit

#endif  // MTPIT_FORWARD_BACKWARD_HPP_
