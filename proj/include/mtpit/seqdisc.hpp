// include/mtpit/seqdisc.hpp

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

#ifndef MTPIT_SEQDISC_HPP_
#define MTPIT_SEQDISC_HPP_

#include <cmath>
#include <vector>

#include "mtpit/common.hpp"
#include "mtpit/forward_backward.hpp"
#include "mtpit/pit.hpp"
#include "mtpit/senone_graph.hpp"

namespace mtpit {

struct SeqLossConfig {
  double kappa = 0.1;        // acoustic scale
  double lambda_dc = 0.1;    // de-correlated denominator interpolation
  double boost_b = 0.1;      // own-reference boosting factor
  double boost_b_hat = 0.2;  // de-correlated boosting factor
};

inline void validate(const SeqLossConfig& cfg) {
  check(cfg.kappa > 0.0, "seqdisc: kappa must be positive");
  check(cfg.lambda_dc >= 0.0 && cfg.lambda_dc < 1.0,
        "seqdisc: lambda outside [0,1)");
  check(cfg.boost_b >= 0.0 && cfg.boost_b_hat >= 0.0,
        "seqdisc: negative boosting factor");
}

// Per-utterance sequence-training inputs: one acoustic log-likelihood
// matrix and one frame-aligned reference per stream, over a shared
// competing-hypothesis graph.
struct StreamBundle {
  std::vector<Mat> loglik;                    // per stream, T x S
  std::vector<std::vector<int>> references;   // per stream, length T
  const SenoneGraph* graph = nullptr;
};

// Mutual-information value for one stream and its gradient w.r.t. that
// stream's log-likelihoods.
struct SeqTermResult {
  double value = 0.0;
  Mat gradient;
};

enum class SeqCriterion { kMmi, kDcMmi, kBmmi, kDcBmmi };

namespace detail {

inline void check_bundle(const StreamBundle& bundle) {
  check(bundle.graph != nullptr, "seqdisc: bundle has no graph");
  check(!bundle.loglik.empty(), "seqdisc: bundle has no streams");
  check(bundle.references.size() == bundle.loglik.size(),
        "seqdisc: stream/reference count mismatch");
  const Eigen::Index T = bundle.loglik[0].rows();
  const Eigen::Index S = bundle.loglik[0].cols();
  for (size_t n = 0; n < bundle.loglik.size(); ++n) {
    check(bundle.loglik[n].rows() == T && bundle.loglik[n].cols() == S,
          "seqdisc: stream shapes differ");
    check(static_cast<Eigen::Index>(bundle.references[n].size()) == T,
          "seqdisc: reference length mismatch");
  }
}

// Shared engine behind the whole criterion family. Zero-valued lambda or
// boosts take the exact code path of the plainer criterion, so the
// reductions lf_dc_bmmi(0,0) = lf_bmmi(0) = lf_dc_mmi(0) = lf_mmi hold
// bit for bit.
inline SeqTermResult lf_engine(const SenoneGraph& g, const Mat& ll,
                               const std::vector<int>& own,
                               const std::vector<const std::vector<int>*>&
                                   others,
                               double kappa, double lambda, double b,
                               double bhat) {
  const int T = static_cast<int>(ll.rows());
  const int S = static_cast<int>(ll.cols());
  FBResult num = numerator_fb(g, own, ll, kappa);

  FBResult den;
  if (b != 0.0 || bhat != 0.0) {
    // Boosts fold into the acoustic scores as additive per-frame terms;
    // occupancies then come out as posteriors of the boosted sum while
    // d logZ / d loglik stays kappa times the senone marginal.
    Mat adjusted = ll;
    const double share = others.empty() ? 0.0 : bhat / others.size();
    for (int t = 0; t < T; ++t) {
      if (b != 0.0) adjusted(t, own[t]) -= b / kappa;
      if (bhat != 0.0) {
        check(!others.empty(), "seqdisc: boosting needs another stream");
        for (int s = 0; s < S; ++s) {
          double miss = 0.0;
          for (const std::vector<int>* o : others)
            if ((*o)[t] != s) miss += 1.0;
          adjusted(t, s) -= share * miss / kappa;
        }
      }
    }
    den = forward_backward(g, adjusted, kappa);
  } else {
    den = forward_backward(g, ll, kappa);
  }

  SeqTermResult r;
  if (lambda != 0.0) {
    check(!others.empty(), "seqdisc: de-correlation needs another stream");
    std::vector<FBResult> oth;
    oth.reserve(others.size());
    LogAccum agg;
    for (const std::vector<int>* o : others) {
      oth.push_back(numerator_fb(g, *o, ll, kappa));
      agg.add(oth.back().logZ);
    }
    double log_other = agg.value - std::log(static_cast<double>(oth.size()));
    Mat mix = Mat::Zero(T, S);
    for (const FBResult& o : oth)
      mix += std::exp(o.logZ - agg.value) * o.occ.senone;
    r.value = num.logZ - (1.0 - lambda) * den.logZ - lambda * log_other;
    r.gradient = kappa * num.occ.senone -
                 (1.0 - lambda) * kappa * den.occ.senone - lambda * kappa * mix;
  } else {
    r.value = num.logZ - den.logZ;
    r.gradient = kappa * (num.occ.senone - den.occ.senone);
  }
  return r;
}

inline std::vector<const std::vector<int>*> other_refs(
    const StreamBundle& bundle, int n) {
  std::vector<const std::vector<int>*> out;
  for (size_t m = 0; m < bundle.references.size(); ++m)
    if (static_cast<int>(m) != n) out.push_back(&bundle.references[m]);
  return out;
}

inline void check_stream_index(const StreamBundle& bundle, int n) {
  check(n >= 0 && n < static_cast<int>(bundle.loglik.size()),
        "seqdisc: stream index out of range");
}

inline SeqTermResult eval_engine(
    const SenoneGraph& g, const Mat& ll, const std::vector<int>& own,
    const std::vector<const std::vector<int>*>& others,
    SeqCriterion criterion, const SeqLossConfig& cfg) {
  switch (criterion) {
    case SeqCriterion::kMmi:
      return lf_engine(g, ll, own, others, cfg.kappa, 0.0, 0.0, 0.0);
    case SeqCriterion::kDcMmi:
      return lf_engine(g, ll, own, others, cfg.kappa, cfg.lambda_dc, 0.0,
                       0.0);
    case SeqCriterion::kBmmi:
      return lf_engine(g, ll, own, others, cfg.kappa, 0.0, cfg.boost_b, 0.0);
    case SeqCriterion::kDcBmmi:
      return lf_engine(g, ll, own, others, cfg.kappa, 0.0, cfg.boost_b,
                       cfg.boost_b_hat);
  }
  throw InvariantError("seqdisc: unknown criterion");
}

}  // namespace detail

inline SeqTermResult eval_criterion(const StreamBundle& bundle, int n,
                                    SeqCriterion criterion,
                                    const SeqLossConfig& cfg) {
  validate(cfg);
  detail::check_bundle(bundle);
  detail::check_stream_index(bundle, n);
  return detail::eval_engine(*bundle.graph, bundle.loglik[n],
                             bundle.references[n],
                             detail::other_refs(bundle, n), criterion, cfg);
}

inline SeqTermResult lf_mmi(const StreamBundle& bundle, int n,
                            const SeqLossConfig& cfg) {
  return eval_criterion(bundle, n, SeqCriterion::kMmi, cfg);
}

inline SeqTermResult lf_dc_mmi(const StreamBundle& bundle, int n,
                               const SeqLossConfig& cfg) {
  return eval_criterion(bundle, n, SeqCriterion::kDcMmi, cfg);
}

inline SeqTermResult lf_bmmi(const StreamBundle& bundle, int n,
                             const SeqLossConfig& cfg) {
  return eval_criterion(bundle, n, SeqCriterion::kBmmi, cfg);
}

inline SeqTermResult lf_dc_bmmi(const StreamBundle& bundle, int n,
                                const SeqLossConfig& cfg) {
  return eval_criterion(bundle, n, SeqCriterion::kDcBmmi, cfg);
}

// Permutation-invariant sequence training: assign references to streams
// by the permutation minimizing the average negated criterion, then keep
// only the winning assignment's gradients.
inline LossResult seq_pit(const StreamBundle& bundle, SeqCriterion criterion,
                          const SeqLossConfig& cfg) {
  validate(cfg);
  detail::check_bundle(bundle);
  const int N = static_cast<int>(bundle.loglik.size());
  check(N <= 6, "seq_pit: more than 6 streams");

  LossResult res;
  res.pair_costs = Mat(N, N);
  res.pair_grads.assign(N, std::vector<Mat>(N));
  for (int n = 0; n < N; ++n)
    for (int m = 0; m < N; ++m) {
      // Pairing stream n with reference m leaves the remaining
      // references as the interfering set regardless of how the other
      // streams are matched, so the costs decompose over pairs.
      std::vector<const std::vector<int>*> others;
      for (int o = 0; o < N; ++o)
        if (o != m) others.push_back(&bundle.references[o]);
      SeqTermResult term =
          detail::eval_engine(*bundle.graph, bundle.loglik[n],
                              bundle.references[m], others, criterion, cfg);
      res.pair_costs(n, m) = -term.value;
      res.pair_grads[n][m] = -term.gradient;
    }
  res.winning_permutation = best_permutation(res.pair_costs);
  double total = 0.0;
  for (int n = 0; n < N; ++n) total += res.pair_costs(n, res.winning_permutation[n]);
  res.value = total / N;
  res.gradients.resize(N);
  for (int n = 0; n < N; ++n)
    res.gradients[n] = res.pair_grads[n][res.winning_permutation[n]] / N;
  return res;
}

}  // namespace mtpit

#endif  // MTPIT_SEQDISC_HPP_
