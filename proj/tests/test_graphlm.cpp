// tests/test_graphlm.cpp

// Copyright 2026  mtpit authors

// See ../COPYING for clarification regarding multiple authors
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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "catch2/catch_amalgamated.hpp"
#include "mtpit/forward_backward.hpp"
#include "mtpit/ngram.hpp"
#include "mtpit/senone_graph.hpp"
#include "oracles.hpp"

using namespace mtpit;

namespace {

std::vector<std::vector<int>> random_corpus(std::mt19937_64& rng, int count,
                                            int length, int vocab) {
  std::uniform_int_distribution<int> pick(0, vocab - 1);
  std::vector<std::vector<int>> out(count);
  for (std::vector<int>& t : out) {
    t.resize(length);
    for (int& s : t) s = pick(rng);
    for (int v = 0; v < vocab && v < length; ++v) t[v] = v;  // full vocab
  }
  return out;
}

// Probability mass of all length-T strings, summed path by path.
double mass_of_length(const SenoneGraph& g, int q, int depth) {
  if (depth == 0) return std::exp(g.final_logweight[q]);
  double total = 0.0;
  for (int a = g.arc_offset[q]; a < g.arc_offset[q + 1]; ++a)
    total += std::exp(g.arcs[a].logweight) *
             mass_of_length(g, g.arcs[a].dst, depth - 1);
  return total;
}

struct PathOracle {
  double logZ = kLogZero;
  Mat arc;
  Mat senone;
};

void enum_paths(const SenoneGraph& g, const Mat& ll, double kappa, int q,
                int t, double score, std::vector<int>& taken,
                std::vector<std::pair<double, std::vector<int>>>& paths) {
  if (t == ll.rows()) {
    paths.emplace_back(score + g.final_logweight[q], taken);
    return;
  }
  for (int a = g.arc_offset[q]; a < g.arc_offset[q + 1]; ++a) {
    taken.push_back(a);
    enum_paths(g, ll, kappa, g.arcs[a].dst, t + 1,
               score + g.arcs[a].logweight + kappa * ll(t, g.arcs[a].label),
               taken, paths);
    taken.pop_back();
  }
}

PathOracle path_oracle(const SenoneGraph& g, const Mat& ll, double kappa) {
  std::vector<std::pair<double, std::vector<int>>> paths;
  std::vector<int> taken;
  enum_paths(g, ll, kappa, g.start, 0, 0.0, taken, paths);
  PathOracle o;
  double hi = paths.front().first;
  for (const auto& [s, p] : paths) hi = std::max(hi, s);
  double sum = 0.0;
  for (const auto& [s, p] : paths) sum += std::exp(s - hi);
  o.logZ = hi + std::log(sum);
  o.arc = Mat::Zero(ll.rows(), static_cast<Eigen::Index>(g.arcs.size()));
  o.senone = Mat::Zero(ll.rows(), ll.cols());
  for (const auto& [s, p] : paths) {
    double w = std::exp(s - o.logZ);
    for (int t = 0; t < ll.rows(); ++t) {
      o.arc(t, p[t]) += w;
      o.senone(t, g.arcs[p[t]].label) += w;
    }
  }
  return o;
}

double chain_score(const NGramModel& m, const std::vector<int>& seq) {
  double total = 0.0;
  std::vector<int> history;
  for (int s : seq) {
    total += cond_logprob(m, history, s);
    history.push_back(s);
  }
  return total;
}

SenoneGraph one_state_loop() {
  SenoneGraph g;
  g.num_states = 1;
  g.start = 0;
  g.label_bound = 1;
  g.arcs = {{0, 0, 0, 0.0}};
  g.arc_offset = {0, 1};
  g.final_logweight = {0.0};
  return g;
}

}  // namespace

TEST_CASE("train_ngram applies add-k smoothing to unigrams", "[ngram]") {
  NGramModel m = train_ngram({{1, 1, 2}}, 1);
  REQUIRE(m.vocabulary == std::vector<int>{1, 2});
  double p1 = std::exp(cond_logprob(m, {}, 1));
  double p2 = std::exp(cond_logprob(m, {}, 2));
  REQUIRE(std::abs(p1 - 2.1 / 3.2) <= 1e-14);
  REQUIRE(std::abs(p2 - 1.1 / 3.2) <= 1e-14);
  REQUIRE(std::abs(p1 + p2 - 1.0) <= 1e-12);
}

TEST_CASE("train_ngram gives equal mass to a symmetric corpus", "[ngram]") {
  NGramModel m = train_ngram({{1, 2}, {2, 1}}, 1);
  REQUIRE(cond_logprob(m, {}, 1) == cond_logprob(m, {}, 2));
  REQUIRE(std::abs(std::exp(cond_logprob(m, {}, 1)) - 0.5) <= 1e-12);
}

TEST_CASE("train_ngram rejects an empty corpus", "[ngram]") {
  REQUIRE_THROWS_AS(train_ngram({}, 3), InvariantError);
  REQUIRE_THROWS_AS(train_ngram({{}}, 3), InvariantError);
  REQUIRE_THROWS_AS(train_ngram({{1}}, 0), InvariantError);
}

TEST_CASE("conditionals stay normalized after backoff expansion", "[ngram]") {
  std::mt19937_64 rng(99);
  NGramModel m = train_ngram(random_corpus(rng, 5, 12, 4), 3);
  std::vector<std::vector<int>> histories = {{}};
  for (int a = 0; a < 4; ++a) {
    histories.push_back({a});
    for (int b = 0; b < 4; ++b) histories.push_back({a, b});
  }
  histories.push_back({7, 1});  // out-of-vocabulary context falls through
  for (const std::vector<int>& h : histories) {
    double sum = 0.0;
    for (int s : m.vocabulary) sum += std::exp(cond_logprob(m, h, s));
    REQUIRE(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("uniform unigram compiles to one state of half-weight loops",
          "[graph]") {
  NGramModel m = train_ngram({{1, 2}, {2, 1}}, 1);
  SenoneGraph g = compile(m);
  REQUIRE(g.num_states == 1);
  REQUIRE(g.arcs.size() == 2);
  for (const Arc& arc : g.arcs) {
    REQUIRE(arc.src == 0);
    REQUIRE(arc.dst == 0);
    REQUIRE(arc.logweight == std::log(0.5));
  }
  REQUIRE(g.arcs[0].label == 1);
  REQUIRE(g.arcs[1].label == 2);
}

TEST_CASE("start-state arcs carry the empty-history distribution", "[graph]") {
  std::mt19937_64 rng(17);
  NGramModel m = train_ngram(random_corpus(rng, 4, 10, 3), 3);
  SenoneGraph g = compile(m);
  for (int a = g.arc_offset[g.start]; a < g.arc_offset[g.start + 1]; ++a)
    REQUIRE(g.arcs[a].logweight == cond_logprob(m, {}, g.arcs[a].label));
}

TEST_CASE("compiled path weights equal chain-rule scores", "[graph]") {
  std::mt19937_64 rng(23);
  NGramModel m = train_ngram(random_corpus(rng, 4, 10, 3), 3);
  SenoneGraph g = compile(m);
  std::uniform_int_distribution<int> pick(0, 2);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<int> seq(6);
    for (int& s : seq) s = pick(rng);
    REQUIRE(std::abs(string_logweight(g, seq) - chain_score(m, seq)) <= 1e-9);
  }
}

TEST_CASE("compiled total mass over fixed-length strings is one", "[graph]") {
  std::mt19937_64 rng(29);
  NGramModel tri = train_ngram(random_corpus(rng, 4, 10, 3), 3);
  SenoneGraph g3 = compile(tri);
  NGramModel bi = train_ngram(random_corpus(rng, 4, 10, 2), 2);
  SenoneGraph g2 = compile(bi);
  for (int T = 1; T <= 4; ++T) {
    REQUIRE(std::abs(mass_of_length(g3, g3.start, T) - 1.0) <= 1e-8);
    REQUIRE(std::abs(mass_of_length(g2, g2.start, T) - 1.0) <= 1e-8);
  }
}

TEST_CASE("per-state outgoing arcs form a log-distribution", "[graph]") {
  std::mt19937_64 rng(31);
  NGramModel m = train_ngram(random_corpus(rng, 5, 14, 3), 3);
  SenoneGraph g = compile(m);
  for (int q = 0; q < g.num_states; ++q) {
    double hi = kLogZero;
    for (int a = g.arc_offset[q]; a < g.arc_offset[q + 1]; ++a)
      hi = std::max(hi, g.arcs[a].logweight);
    double sum = 0.0;
    for (int a = g.arc_offset[q]; a < g.arc_offset[q + 1]; ++a)
      sum += std::exp(g.arcs[a].logweight - hi);
    REQUIRE(std::abs(hi + std::log(sum)) <= 1e-9);
  }
}

TEST_CASE("graph dump and load round-trips exactly", "[graph][io]") {
  std::mt19937_64 rng(37);
  NGramModel m = train_ngram(random_corpus(rng, 4, 12, 3), 2);
  SenoneGraph g = compile(m);
  std::string path =
      (std::filesystem::temp_directory_path() / "mtpit_graph_rt.txt").string();
  dump_graph(g, path);
  SenoneGraph h = load_graph(path);
  REQUIRE(h.num_states == g.num_states);
  REQUIRE(h.start == g.start);
  REQUIRE(h.label_bound == g.label_bound);
  REQUIRE(h.arc_offset == g.arc_offset);
  REQUIRE(h.final_logweight == g.final_logweight);
  REQUIRE(h.arcs.size() == g.arcs.size());
  for (size_t a = 0; a < g.arcs.size(); ++a) {
    REQUIRE(h.arcs[a].src == g.arcs[a].src);
    REQUIRE(h.arcs[a].dst == g.arcs[a].dst);
    REQUIRE(h.arcs[a].label == g.arcs[a].label);
    REQUIRE(h.arcs[a].logweight == g.arcs[a].logweight);
  }
  std::filesystem::remove(path);

  std::ofstream bad(path);
  bad << "not-a-graph\n";
  bad.close();
  REQUIRE_THROWS_AS(load_graph(path), RuntimeFailure);
  std::filesystem::remove(path);
}

TEST_CASE("forward-backward on a one-state loop is exact", "[fb]") {
  SenoneGraph g = one_state_loop();
  Mat ll = Mat::Zero(3, 1);
  FBResult r = forward_backward(g, ll, 0.1);
  REQUIRE(r.logZ == 0.0);
  REQUIRE(r.logZ_backward == 0.0);
  for (int t = 0; t < 3; ++t) REQUIRE(r.occ.senone(t, 0) == 1.0);
}

TEST_CASE("forward and backward totals agree", "[fb]") {
  std::mt19937_64 rng(41);
  NGramModel m = train_ngram(random_corpus(rng, 4, 10, 3), 3);
  SenoneGraph g = compile(m);
  Mat ll = oracle::random_matrix(rng, 8, 3);
  for (double kappa : {0.1, 1.0}) {
    FBResult r = forward_backward(g, ll, kappa);
    REQUIRE(std::abs(r.logZ - r.logZ_backward) <= 1e-10);
  }
}

TEST_CASE("forward-backward matches path enumeration", "[fb]") {
  std::mt19937_64 rng(43);
  NGramModel m = train_ngram(random_corpus(rng, 4, 10, 2), 2);
  SenoneGraph g = compile(m);
  REQUIRE(g.num_states == 3);
  Mat ll = oracle::random_matrix(rng, 4, 2);
  FBResult r = forward_backward(g, ll, 0.1);
  PathOracle o = path_oracle(g, ll, 0.1);
  REQUIRE(std::abs(r.logZ - o.logZ) <= 1e-8);
  REQUIRE((r.occ.arc - o.arc).cwiseAbs().maxCoeff() <= 1e-9);
  REQUIRE((r.occ.senone - o.senone).cwiseAbs().maxCoeff() <= 1e-9);
  for (int t = 0; t < 4; ++t)
    REQUIRE(std::abs(r.occ.senone.row(t).sum() - 1.0) <= 1e-9);
}

TEST_CASE("denominator gradient is kappa times the senone marginal", "[fb]") {
  std::mt19937_64 rng(47);
  NGramModel m = train_ngram(random_corpus(rng, 4, 10, 2), 2);
  SenoneGraph g = compile(m);
  Mat ll = oracle::random_matrix(rng, 4, 2);
  const double kappa = 0.1;
  FBResult r = forward_backward(g, ll, kappa);
  const double h = 1e-6;
  for (int t = 0; t < ll.rows(); ++t)
    for (int s = 0; s < ll.cols(); ++s) {
      Mat up = ll, down = ll;
      up(t, s) += h;
      down(t, s) -= h;
      double fd = (forward_backward(g, up, kappa).logZ -
                   forward_backward(g, down, kappa).logZ) /
                  (2.0 * h);
      REQUIRE(std::abs(fd - kappa * r.occ.senone(t, s)) <= 1e-7);
    }
}

TEST_CASE("numerator follows the single reference path", "[fb]") {
  std::mt19937_64 rng(53);
  NGramModel m = train_ngram(random_corpus(rng, 4, 10, 2), 2);
  SenoneGraph g = compile(m);
  std::vector<int> ref = {0, 1, 1, 0, 1};
  Mat zeros = Mat::Zero(5, 2);
  FBResult num = numerator_fb(g, ref, zeros, 0.1);
  REQUIRE(std::abs(num.logZ - chain_score(m, ref)) <= 1e-12);
  for (int t = 0; t < 5; ++t) {
    REQUIRE(num.occ.senone(t, ref[t]) == 1.0);
    REQUIRE(num.occ.senone.row(t).sum() == 1.0);
    REQUIRE(num.occ.arc.row(t).sum() == 1.0);
  }

  Mat ll = oracle::random_matrix(rng, 5, 2);
  FBResult den = forward_backward(g, ll, 0.1);
  FBResult num2 = numerator_fb(g, ref, ll, 0.1);
  REQUIRE(num2.logZ <= den.logZ + 1e-10);
}

TEST_CASE("forward-backward rejects malformed inputs", "[fb]") {
  SenoneGraph g = one_state_loop();
  Mat ll = Mat::Zero(3, 1);
  REQUIRE_THROWS_AS(forward_backward(g, Mat::Zero(0, 1), 0.1), InvariantError);
  REQUIRE_THROWS_AS(forward_backward(g, ll, 0.0), InvariantError);
  REQUIRE_THROWS_AS(forward_backward(g, ll, -1.0), InvariantError);
  Mat bad = ll;
  bad(1, 0) = std::numeric_limits<double>::infinity();
  REQUIRE_THROWS_AS(forward_backward(g, bad, 0.1), InvariantError);
  REQUIRE_THROWS_AS(numerator_fb(g, {0, 0}, ll, 0.1), InvariantError);
  Mat wide = Mat::Zero(2, 3);
  std::mt19937_64 rng(59);
  NGramModel m = train_ngram(random_corpus(rng, 3, 8, 2), 2);
  SenoneGraph g2 = compile(m);
  REQUIRE_THROWS_AS(numerator_fb(g2, {0, 2}, wide, 0.1), InvariantError);
}

TEST_CASE("augment_swapped with alpha zero copies the originals",
          "[augment]") {
  std::mt19937_64 rng(61);
  std::uniform_int_distribution<int> pick(0, 4);
  TranscriptPair p;
  p.a.resize(30);
  p.b.resize(30);
  for (int t = 0; t < 30; ++t) {
    p.a[t] = pick(rng);
    p.b[t] = pick(rng);
  }
  std::vector<std::vector<int>> out = augment_swapped({p}, 0.0, 3, 2, 7);
  REQUIRE(out.size() == 6);
  REQUIRE(out[0] == p.a);
  REQUIRE(out[1] == p.b);
  REQUIRE(out[2] == p.a);
  REQUIRE(out[3] == p.b);
  REQUIRE(out[4] == p.a);
  REQUIRE(out[5] == p.b);
}

TEST_CASE("augment_swapped with alpha one and no lockout exchanges the pair",
          "[augment]") {
  TranscriptPair p;
  p.a = {1, 2, 3, 4};
  p.b = {5, 6, 7, 8};
  std::vector<std::vector<int>> out = augment_swapped({p}, 1.0, 0, 1, 7);
  REQUIRE(out.size() == 4);
  REQUIRE(out[2] == p.b);
  REQUIRE(out[3] == p.a);
}

TEST_CASE("augment_swapped validates its inputs", "[augment]") {
  TranscriptPair bad;
  bad.a = {1, 2};
  bad.b = {1};
  REQUIRE_THROWS_AS(augment_swapped({bad}, 0.5, 1, 1, 7), InvariantError);
  TranscriptPair ok;
  ok.a = {1};
  ok.b = {2};
  REQUIRE_THROWS_AS(augment_swapped({ok}, 1.5, 1, 1, 7), InvariantError);
  REQUIRE_THROWS_AS(augment_swapped({ok}, 0.5, -1, 1, 7), InvariantError);
  REQUIRE_THROWS_AS(augment_swapped({ok}, 0.5, 1, -1, 7), InvariantError);
}

TEST_CASE("augment_swapped matches the renewal-process swap rate",
          "[augment]") {
  const int T = 100000;
  const double alpha = 0.4;
  const int beta = 10;
  const int gamma = 2;
  TranscriptPair p;
  p.a.assign(T, 1);
  p.b.assign(T, 2);
  std::vector<std::vector<int>> out =
      augment_swapped({p}, alpha, beta, gamma, 4242);
  REQUIRE(out.size() == 2 + 2 * gamma);
  long events = 0;
  for (int c = 0; c < gamma; ++c) {
    const std::vector<int>& a = out[2 + 2 * c];
    const std::vector<int>& b = out[3 + 2 * c];
    REQUIRE(a.size() == static_cast<size_t>(T));
    REQUIRE(b.size() == static_cast<size_t>(T));
    long last = -beta - 1;
    for (int t = 0; t < T; ++t) {
      if (a[t] == 2) {
        REQUIRE(b[t] == 1);  // frames exchange jointly
        REQUIRE(t - last >= beta + 1);
        last = t;
        ++events;
      } else {
        REQUIRE(b[t] == 2);
      }
    }
  }
  // Renewal process: mean gap beta + 1/alpha, variance (1-alpha)/alpha^2.
  const double frames = static_cast<double>(gamma) * T;
  const double mean_gap = beta + 1.0 / alpha;
  const double expected = frames / mean_gap;
  const double sigma = std::sqrt(frames * (1.0 - alpha) /
                                 (alpha * alpha * std::pow(mean_gap, 3)));
  REQUIRE(std::abs(events - expected) <= 3.0 * sigma);
}

TEST_CASE("augment_swapped is deterministic in the seed", "[augment]") {
  TranscriptPair p;
  p.a.assign(200, 3);
  p.b.assign(200, 4);
  std::vector<std::vector<int>> one = augment_swapped({p}, 0.3, 2, 2, 11);
  std::vector<std::vector<int>> two = augment_swapped({p}, 0.3, 2, 2, 11);
  std::vector<std::vector<int>> other = augment_swapped({p}, 0.3, 2, 2, 12);
  REQUIRE(one == two);
  REQUIRE(one != other);
}
