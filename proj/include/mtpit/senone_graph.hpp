// include/mtpit/senone_graph.hpp

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

#ifndef MTPIT_SENONE_GRAPH_HPP_
#define MTPIT_SENONE_GRAPH_HPP_

#include <cinttypes>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "mtpit/common.hpp"
#include "mtpit/ngram.hpp"

namespace mtpit {

struct Arc {
  int src = 0;
  int dst = 0;
  int label = 0;  // senone id, no epsilons
  double logweight = 0.0;
};

// Deterministic frame-synchronous acceptor over senone ids. Arcs are
// sorted by (src, label) and indexed CSR-style by arc_offset, so the
// arcs leaving state q are arcs[arc_offset[q] .. arc_offset[q+1]).
struct SenoneGraph {
  int num_states = 0;
  int start = 0;
  int label_bound = 0;  // strict upper bound on arc labels
  std::vector<Arc> arcs;
  std::vector<int> arc_offset;
  std::vector<double> final_logweight;
};

// Structural invariants: CSR consistency, labeled arcs, determinism per
// state, stochastic outgoing weights, and connectivity both ways.
inline void validate(const SenoneGraph& g) {
  check(g.num_states >= 1, "graph: no states");
  check(g.start >= 0 && g.start < g.num_states, "graph: bad start state");
  check(static_cast<int>(g.final_logweight.size()) == g.num_states,
        "graph: final weight count");
  check(static_cast<int>(g.arc_offset.size()) == g.num_states + 1 &&
            g.arc_offset.front() == 0 &&
            g.arc_offset.back() == static_cast<int>(g.arcs.size()),
        "graph: arc offsets");
  for (int q = 0; q < g.num_states; ++q) {
    check(g.arc_offset[q] <= g.arc_offset[q + 1], "graph: arc offsets");
    LogAccum mass;
    int prev_label = -1;
    for (int a = g.arc_offset[q]; a < g.arc_offset[q + 1]; ++a) {
      const Arc& arc = g.arcs[a];
      check(arc.src == q, "graph: arc under wrong state");
      check(arc.dst >= 0 && arc.dst < g.num_states, "graph: arc destination");
      check(arc.label >= 0 && arc.label < g.label_bound, "graph: arc label");
      check(arc.label > prev_label, "graph: arcs not deterministic");
      prev_label = arc.label;
      mass.add(arc.logweight);
    }
    if (g.arc_offset[q] < g.arc_offset[q + 1])
      check(std::abs(mass.value) <= 1e-9, "graph: outgoing mass not 1");
  }
  std::vector<char> fwd(g.num_states, 0), bwd(g.num_states, 0);
  std::vector<int> stack = {g.start};
  fwd[g.start] = 1;
  while (!stack.empty()) {
    int q = stack.back();
    stack.pop_back();
    for (int a = g.arc_offset[q]; a < g.arc_offset[q + 1]; ++a)
      if (!fwd[g.arcs[a].dst]) {
        fwd[g.arcs[a].dst] = 1;
        stack.push_back(g.arcs[a].dst);
      }
  }
  for (int q = 0; q < g.num_states; ++q)
    if (g.final_logweight[q] > kLogZero) {
      bwd[q] = 1;
      stack.push_back(q);
    }
  // Reverse reachability by fixpoint; graphs here are small.
  bool grew = true;
  while (grew) {
    grew = false;
    for (const Arc& arc : g.arcs)
      if (bwd[arc.dst] && !bwd[arc.src]) {
        bwd[arc.src] = 1;
        grew = true;
      }
  }
  for (int q = 0; q < g.num_states; ++q)
    check(fwd[q] && bwd[q], "graph: state not connected");
}

// Expands the n-gram into a complete deterministic acceptor. States are
// the truncated histories, every state is final with weight 0, and each
// arc weight is the exact backoff-expanded conditional.
inline SenoneGraph compile(const NGramModel& m) {
  check(!m.vocabulary.empty(), "compile: empty vocabulary");
  SenoneGraph g;
  g.label_bound = m.vocabulary.back() + 1;
  std::map<std::vector<int>, int> id;
  std::vector<std::vector<int>> history;
  history.push_back({});
  id[{}] = 0;
  for (size_t q = 0; q < history.size(); ++q) {
    std::vector<int> h = history[q];
    for (int s : m.vocabulary) {
      std::vector<int> next = h;
      next.push_back(s);
      if (static_cast<int>(next.size()) > m.order - 1)
        next.erase(next.begin());
      auto [it, fresh] = id.emplace(next, static_cast<int>(history.size()));
      if (fresh) history.push_back(next);
      g.arcs.push_back(
          {static_cast<int>(q), it->second, s, cond_logprob(m, h, s)});
    }
  }
  g.num_states = static_cast<int>(history.size());
  g.final_logweight.assign(g.num_states, 0.0);
  g.arc_offset.assign(g.num_states + 1, 0);
  for (const Arc& arc : g.arcs) ++g.arc_offset[arc.src + 1];
  for (int q = 0; q < g.num_states; ++q)
    g.arc_offset[q + 1] += g.arc_offset[q];
  validate(g);
  return g;
}

// Path weight of a senone string, walking the deterministic arcs.
// Includes the final weight of the last state reached.
inline double string_logweight(const SenoneGraph& g,
                               const std::vector<int>& seq) {
  int q = g.start;
  double total = 0.0;
  for (int s : seq) {
    int found = -1;
    for (int a = g.arc_offset[q]; a < g.arc_offset[q + 1]; ++a)
      if (g.arcs[a].label == s) {
        found = a;
        break;
      }
    check(found >= 0, "string_logweight: symbol not accepted");
    total += g.arcs[found].logweight;
    q = g.arcs[found].dst;
  }
  return total + g.final_logweight[q];
}

// Textual dump: header lines, final weights, then one arc per line as
// "src dst label logweight". %.17g keeps doubles bit-exact across a
// dump/load cycle.
inline void dump_graph(const SenoneGraph& g, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw RuntimeFailure("dump_graph: cannot open " + path);
  std::fprintf(f, "mtpit-graph 1\n");
  std::fprintf(f, "states %d start %d labels %d arcs %zu\n", g.num_states,
               g.start, g.label_bound, g.arcs.size());
  std::fprintf(f, "finals");
  for (double w : g.final_logweight) std::fprintf(f, " %.17g", w);
  std::fprintf(f, "\n");
  for (const Arc& arc : g.arcs)
    std::fprintf(f, "%d %d %d %.17g\n", arc.src, arc.dst, arc.label,
                 arc.logweight);
  if (std::fclose(f) != 0) throw RuntimeFailure("dump_graph: write failed");
}

inline SenoneGraph load_graph(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "r");
  if (!f) throw RuntimeFailure("load_graph: cannot open " + path);
  SenoneGraph g;
  size_t num_arcs = 0;
  char magic[16] = {0};
  int version = 0;
  if (std::fscanf(f, "%15s %d", magic, &version) != 2 ||
      std::string(magic) != "mtpit-graph" || version != 1) {
    std::fclose(f);
    throw RuntimeFailure("load_graph: bad header in " + path);
  }
  if (std::fscanf(f, " states %d start %d labels %d arcs %zu", &g.num_states,
                  &g.start, &g.label_bound, &num_arcs) != 4 ||
      g.num_states < 1) {
    std::fclose(f);
    throw RuntimeFailure("load_graph: bad header in " + path);
  }
  char tag[16] = {0};
  bool ok = std::fscanf(f, "%15s", tag) == 1 && std::string(tag) == "finals";
  g.final_logweight.resize(g.num_states);
  for (int q = 0; ok && q < g.num_states; ++q)
    ok = std::fscanf(f, "%lg", &g.final_logweight[q]) == 1;
  g.arcs.resize(num_arcs);
  for (size_t a = 0; ok && a < num_arcs; ++a)
    ok = std::fscanf(f, "%d %d %d %lg", &g.arcs[a].src, &g.arcs[a].dst,
                     &g.arcs[a].label, &g.arcs[a].logweight) == 4;
  std::fclose(f);
  if (!ok) throw RuntimeFailure("load_graph: truncated file " + path);
  g.arc_offset.assign(g.num_states + 1, 0);
  for (const Arc& arc : g.arcs) {
    if (arc.src < 0 || arc.src >= g.num_states)
      throw RuntimeFailure("load_graph: arc source out of range");
    ++g.arc_offset[arc.src + 1];
  }
  for (int q = 0; q < g.num_states; ++q)
    g.arc_offset[q + 1] += g.arc_offset[q];
  validate(g);
  return g;
}

}  // namespace mtpit

#endif  // MTPIT_SENONE_GRAPH_HPP_
