// tests/oracles.hpp
//
// Independent reference implementations used only by the test suites. These
// deliberately avoid the library's own permutation enumeration, cost caching
// and log-space tricks: values are recomputed from first principles with
// plain loops so agreement is meaningful.

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

#ifndef MTPIT_TESTS_ORACLES_HPP_
#define MTPIT_TESTS_ORACLES_HPP_

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "mtpit/common.hpp"

namespace mtpit {
namespace oracle {

// Recursive backtracking enumeration, independent of std::next_permutation.
inline void permute_rec(int n, std::vector<int>& cur, std::vector<bool>& used,
                        std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == n) {
    out.push_back(cur);
    return;
  }
  for (int i = 0; i < n; ++i) {
    if (used[i]) continue;
    used[i] = true;
    cur.push_back(i);
    permute_rec(n, cur, used, out);
    cur.pop_back();
    used[i] = false;
  }
}

inline std::vector<std::vector<int>> permutations(int n) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  std::vector<bool> used(n, false);
  permute_rec(n, cur, used, out);
  return out;
}

inline double frame_mse(const Mat& a, const Mat& b, int t) {
  double s = 0.0;
  for (int d = 0; d < a.cols(); ++d) {
    double diff = a(t, d) - b(t, d);
    s += diff * diff;
  }
  return s / static_cast<double>(a.cols());
}

inline double mse_pit_frame_value(const std::vector<Mat>& outputs,
                                  const std::vector<Mat>& refs) {
  const int N = static_cast<int>(outputs.size());
  const int T = static_cast<int>(outputs[0].rows());
  double total = 0.0;
  for (int t = 0; t < T; ++t) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : permutations(N)) {
      double cost = 0.0;
      for (int n = 0; n < N; ++n) cost += frame_mse(outputs[n], refs[p[n]], t);
      if (cost < best) best = cost;
    }
    total += best / N;
  }
  return total;
}

inline double mse_pit_utt_value(const std::vector<Mat>& outputs,
                                const std::vector<Mat>& refs) {
  const int N = static_cast<int>(outputs.size());
  const int T = static_cast<int>(outputs[0].rows());
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : permutations(N)) {
    double cost = 0.0;
    for (int t = 0; t < T; ++t)
      for (int n = 0; n < N; ++n) cost += frame_mse(outputs[n], refs[p[n]], t);
    if (cost < best) best = cost;
  }
  return best / N;
}

inline double ce_pit_value(const std::vector<Mat>& log_post,
                           const std::vector<std::vector<int>>& labels) {
  const int N = static_cast<int>(log_post.size());
  const int T = static_cast<int>(log_post[0].rows());
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : permutations(N)) {
    double cost = 0.0;
    for (int n = 0; n < N; ++n)
      for (int t = 0; t < T; ++t) cost -= log_post[n](t, labels[p[n]][t]);
    if (cost < best) best = cost;
  }
  return best / N;
}

inline double kld_pit_value(const std::vector<Mat>& student,
                            const std::vector<Mat>& teacher) {
  const int N = static_cast<int>(student.size());
  const int T = static_cast<int>(student[0].rows());
  const int S = static_cast<int>(student[0].cols());
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : permutations(N)) {
    double cost = 0.0;
    for (int n = 0; n < N; ++n)
      for (int t = 0; t < T; ++t)
        for (int i = 0; i < S; ++i) {
          double prob = std::exp(teacher[p[n]](t, i));
          if (prob > 0.0) cost -= prob * student[n](t, i);
        }
    if (cost < best) best = cost;
  }
  return best / N;
}

inline double entropy_sum(const std::vector<Mat>& log_post) {
  double h = 0.0;
  for (const Mat& m : log_post)
    for (int t = 0; t < m.rows(); ++t)
      for (int i = 0; i < m.cols(); ++i) {
        double prob = std::exp(m(t, i));
        if (prob > 0.0) h -= prob * m(t, i);
      }
  return h;
}

// Normalized random log-posterior rows for loss tests.
inline Mat random_log_post(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat m(rows, cols);
  for (int t = 0; t < rows; ++t) {
    for (int i = 0; i < cols; ++i) m(t, i) = gauss(rng);
    double mx = m.row(t).maxCoeff();
    double z = 0.0;
    for (int i = 0; i < cols; ++i) z += std::exp(m(t, i) - mx);
    double lse = mx + std::log(z);
    for (int i = 0; i < cols; ++i) m(t, i) -= lse;
  }
  return m;
}

// Bitwise matrix equality (no tolerance); shapes must match too.
inline bool bitwise_equal(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < a.cols(); ++c)
      if (a(r, c) != b(r, c)) return false;
  return true;
}

inline Mat random_matrix(std::mt19937_64& rng, int rows, int cols,
                         double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = gauss(rng);
  return m;
}

}  // namespace oracle
}  // namespace mtpit

#endif  // MTPIT_TESTS_ORACLES_HPP_
