// mtpit/common.hpp

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

#ifndef MTPIT_COMMON_HPP_
#define MTPIT_COMMON_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtpit {

using Mat = Eigen::MatrixXd;  // rows are frames unless stated otherwise
using Vec = Eigen::VectorXd;

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

// Violated data invariant or precondition (CLI exit code 2).
class InvariantError : public std::runtime_error {
 public:
  explicit InvariantError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed configuration or option value (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// I/O or other environment failure (CLI exit code 3).
class RuntimeFailure : public std::runtime_error {
 public:
  explicit RuntimeFailure(const std::string& msg) : std::runtime_error(msg) {}
};

inline void check(bool ok, const std::string& msg) {
  if (!ok) throw InvariantError(msg);
}

inline double log_sum_exp(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  double hi = a > b ? a : b;
  double lo = a > b ? b : a;
  return hi + std::log1p(std::exp(lo - hi));
}

// Accumulates log(sum exp(x_i)) one term at a time.
struct LogAccum {
  double value = kLogZero;
  void add(double x) { value = log_sum_exp(value, x); }
};

inline double log_sum_exp_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  double hi = row.maxCoeff();
  if (hi == kLogZero) return kLogZero;
  return hi + std::log((row.array() - hi).exp().sum());
}

// FNV-1a over bytes; platform-stable string hashing for derived seeds.
inline uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// splitmix64 step; used to derive independent per-item seeds from a base seed.
inline uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Log compression of non-negative linear energies: log(1 + x) per element.
// Scalar std::log keeps results identical across SIMD widths.
inline Mat log_compress(const Mat& linear) {
  Mat out(linear.rows(), linear.cols());
  for (int r = 0; r < linear.rows(); ++r)
    for (int c = 0; c < linear.cols(); ++c)
      out(r, c) = std::log(1.0 + linear(r, c));
  return out;
}

inline std::vector<int> collapse_labels(const std::vector<int>& frames,
                                        int silence = 0) {
  std::vector<int> out;
  int prev = -1;
  for (int s : frames) {
    if (s != prev && s != silence) out.push_back(s);
    prev = s;
  }
  return out;
}

}  // namespace mtpit

#endif  // MTPIT_COMMON_HPP_
