// include/mtpit/config.hpp

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

#ifndef MTPIT_CONFIG_HPP_
#define MTPIT_CONFIG_HPP_

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mtpit/common.hpp"
#include "mtpit/model.hpp"
#include "mtpit/seqdisc.hpp"

namespace mtpit {

enum class StageName { kFrame, kTrace, kAsr, kJoint, kTransfer, kSeqdisc };

inline std::string stage_string(StageName s) {
  switch (s) {
    case StageName::kFrame: return "frame";
    case StageName::kTrace: return "trace";
    case StageName::kAsr: return "asr";
    case StageName::kJoint: return "joint";
    case StageName::kTransfer: return "transfer";
    case StageName::kSeqdisc: return "seqdisc";
  }
  throw InvariantError("stage_string: unknown stage");
}

inline StageName parse_stage(const std::string& s) {
  for (StageName n : {StageName::kFrame, StageName::kTrace, StageName::kAsr,
                      StageName::kJoint, StageName::kTransfer,
                      StageName::kSeqdisc})
    if (stage_string(n) == s) return n;
  throw ConfigError("unknown stage name: " + s);
}

inline SeqCriterion parse_criterion(const std::string& s) {
  if (s == "mmi") return SeqCriterion::kMmi;
  if (s == "dc-mmi") return SeqCriterion::kDcMmi;
  if (s == "bmmi") return SeqCriterion::kBmmi;
  if (s == "dc-bmmi") return SeqCriterion::kDcBmmi;
  throw ConfigError("unknown sequence criterion: " + s);
}

// Every experiment knob, one flat key per field. Defaults describe a small
// but trainable two-speaker setup.
struct ExperimentConfig {
  // corpus
  int speakers = 6;
  int utterances = 40;
  double valid_fraction = 0.1;
  int len_min = 30;
  int len_max = 60;
  int feat_dim = 16;
  int senones = 21;
  uint64_t corpus_seed = 1234;
  // model
  int streams = 2;
  int framewise_layers = 1;
  int framewise_width = 24;
  int context_radius = 1;
  int tracing_layers = 1;
  int tracing_width = 24;
  int recognition_layers = 1;
  int recognition_width = 24;
  // training
  uint64_t seed = 7;
  double momentum = 0.9;
  int batch = 1;
  std::vector<StageName> stages = {StageName::kFrame, StageName::kTrace,
                                   StageName::kAsr, StageName::kJoint};
  int frame_epochs = 2;
  double frame_lr = 0.02;
  int trace_epochs = 2;
  double trace_lr = 0.02;
  int asr_epochs = 3;
  double asr_lr = 0.004;
  int teacher_mmi_epochs = 0;
  double teacher_mmi_lr = 0.002;
  int joint_epochs = 3;
  double joint_lr = 0.03;
  int transfer_epochs = 2;
  double transfer_lr = 0.02;
  double transfer_weight = 0.5;
  int seqdisc_epochs = 1;
  double seqdisc_lr = 0.005;
  std::string seqdisc_criterion = "dc-bmmi";
  bool curve_wer = false;
  // sequence training and decoding
  double kappa = 1.0;
  double lambda_dc = 0.1;
  double boost_b = 0.1;
  double boost_b_hat = 0.2;
  int lm_order = 2;
  double aug_alpha = 0.4;
  int aug_beta = 10;
  int aug_gamma = 1;
  // output
  std::string out_dir = "out";
};

namespace detail {

inline int config_int(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    int v = std::stoi(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad integer for " + key + ": " + value);
  }
}

inline uint64_t config_u64(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad seed for " + key + ": " + value);
  }
}

inline double config_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad number for " + key + ": " + value);
  }
}

inline bool config_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("bad boolean for " + key + ": " + value);
}

inline std::vector<StageName> config_stages(const std::string& value) {
  std::vector<StageName> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_stage(item));
  return out;
}

inline std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

// key=value lines; '#' starts a comment; blank lines ignored. Duplicate
// keys are rejected so a typo cannot silently lose a setting.
inline std::map<std::string, std::string> parse_config_text(
    const std::string& text) {
  std::map<std::string, std::string> out;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    check(eq != std::string::npos,
          "config line " + std::to_string(lineno) + ": missing '='");
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    check(!key.empty(), "config line " + std::to_string(lineno) + ": no key");
    if (out.count(key))
      throw ConfigError("duplicate config key: " + key);
    out[key] = value;
  }
  return out;
}

inline std::map<std::string, std::string> read_config_file(
    const std::string& path) {
  std::ifstream is(path);
  if (!is) throw RuntimeFailure("cannot read config file: " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  try {
    return parse_config_text(buf.str());
  } catch (const InvariantError& e) {
    throw ConfigError(std::string(e.what()) + " in " + path);
  }
}

inline void apply_config_entry(ExperimentConfig& c, const std::string& key,
                               const std::string& value) {
  using detail::config_bool;
  using detail::config_double;
  using detail::config_int;
  using detail::config_u64;
  if (key == "speakers") c.speakers = config_int(key, value);
  else if (key == "utterances") c.utterances = config_int(key, value);
  else if (key == "valid_fraction") c.valid_fraction = config_double(key, value);
  else if (key == "len_min") c.len_min = config_int(key, value);
  else if (key == "len_max") c.len_max = config_int(key, value);
  else if (key == "feat_dim") c.feat_dim = config_int(key, value);
  else if (key == "senones") c.senones = config_int(key, value);
  else if (key == "corpus_seed") c.corpus_seed = config_u64(key, value);
  else if (key == "streams") c.streams = config_int(key, value);
  else if (key == "framewise_layers") c.framewise_layers = config_int(key, value);
  else if (key == "framewise_width") c.framewise_width = config_int(key, value);
  else if (key == "context_radius") c.context_radius = config_int(key, value);
  else if (key == "tracing_layers") c.tracing_layers = config_int(key, value);
  else if (key == "tracing_width") c.tracing_width = config_int(key, value);
  else if (key == "recognition_layers") c.recognition_layers = config_int(key, value);
  else if (key == "recognition_width") c.recognition_width = config_int(key, value);
  else if (key == "seed") c.seed = config_u64(key, value);
  else if (key == "momentum") c.momentum = config_double(key, value);
  else if (key == "batch") c.batch = config_int(key, value);
  else if (key == "stages") c.stages = detail::config_stages(value);
  else if (key == "frame_epochs") c.frame_epochs = config_int(key, value);
  else if (key == "frame_lr") c.frame_lr = config_double(key, value);
  else if (key == "trace_epochs") c.trace_epochs = config_int(key, value);
  else if (key == "trace_lr") c.trace_lr = config_double(key, value);
  else if (key == "asr_epochs") c.asr_epochs = config_int(key, value);
  else if (key == "asr_lr") c.asr_lr = config_double(key, value);
  else if (key == "teacher_mmi_epochs") c.teacher_mmi_epochs = config_int(key, value);
  else if (key == "teacher_mmi_lr") c.teacher_mmi_lr = config_double(key, value);
  else if (key == "joint_epochs") c.joint_epochs = config_int(key, value);
  else if (key == "joint_lr") c.joint_lr = config_double(key, value);
  else if (key == "transfer_epochs") c.transfer_epochs = config_int(key, value);
  else if (key == "transfer_lr") c.transfer_lr = config_double(key, value);
  else if (key == "transfer_weight") c.transfer_weight = config_double(key, value);
  else if (key == "seqdisc_epochs") c.seqdisc_epochs = config_int(key, value);
  else if (key == "seqdisc_lr") c.seqdisc_lr = config_double(key, value);
  else if (key == "seqdisc_criterion") c.seqdisc_criterion = value;
  else if (key == "curve_wer") c.curve_wer = config_bool(key, value);
  else if (key == "kappa") c.kappa = config_double(key, value);
  else if (key == "lambda_dc") c.lambda_dc = config_double(key, value);
  else if (key == "boost_b") c.boost_b = config_double(key, value);
  else if (key == "boost_b_hat") c.boost_b_hat = config_double(key, value);
  else if (key == "lm_order") c.lm_order = config_int(key, value);
  else if (key == "aug_alpha") c.aug_alpha = config_double(key, value);
  else if (key == "aug_beta") c.aug_beta = config_int(key, value);
  else if (key == "aug_gamma") c.aug_gamma = config_int(key, value);
  else if (key == "out_dir") c.out_dir = value;
  else throw ConfigError("unknown config key: " + key);
}

// Stage order mirrors the progressive regimen: frame precedes trace
// precedes the joint stage, the clean recognizer precedes joint assembly
// and any transfer, and sequence training follows the CE-trained joint
// model.
inline void validate_stage_order(const std::vector<StageName>& stages) {
  std::vector<char> seen(6, 0);
  auto done = [&](StageName s) { return seen[static_cast<int>(s)] != 0; };
  for (StageName s : stages) {
    check(!done(s), "stage listed twice: " + stage_string(s));
    switch (s) {
      case StageName::kFrame:
      case StageName::kAsr:
        break;
      case StageName::kTrace:
        check(done(StageName::kFrame), "trace stage requires frame first");
        break;
      case StageName::kJoint:
        check(done(StageName::kTrace) && done(StageName::kAsr),
              "joint stage requires trace and asr first");
        break;
      case StageName::kTransfer:
        check(done(StageName::kAsr), "transfer stage requires asr first");
        check(done(StageName::kJoint), "transfer stage requires joint first");
        break;
      case StageName::kSeqdisc:
        check(done(StageName::kJoint), "seqdisc stage requires joint first");
        break;
    }
    seen[static_cast<int>(s)] = 1;
  }
}

inline void validate_config(const ExperimentConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (c.speakers < 2) fail("speakers must be at least 2");
  if (c.utterances < 1) fail("utterances must be positive");
  if (!(c.valid_fraction > 0.0 && c.valid_fraction <= 0.5))
    fail("valid_fraction must be in (0, 0.5]");
  if (c.len_min < 1 || c.len_max < c.len_min) fail("bad length range");
  if (c.feat_dim < 1) fail("feat_dim must be positive");
  if (c.senones < 2) fail("senones must be at least 2");
  if (c.streams != 2) fail("streams must be 2 for two-speaker mixing");
  if (c.framewise_layers < 1 || c.tracing_layers < 1 ||
      c.recognition_layers < 1)
    fail("layer counts must be positive");
  if (c.framewise_width < 1 || c.tracing_width < 1 || c.recognition_width < 1)
    fail("widths must be positive");
  if (c.context_radius < 0) fail("context_radius must be non-negative");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0))
    fail("momentum must be in [0, 1)");
  if (c.batch < 1) fail("batch must be positive");
  for (int e : {c.frame_epochs, c.trace_epochs, c.asr_epochs,
                c.teacher_mmi_epochs, c.joint_epochs, c.transfer_epochs,
                c.seqdisc_epochs})
    if (e < 0) fail("epoch counts must be non-negative");
  for (double lr : {c.frame_lr, c.trace_lr, c.asr_lr, c.teacher_mmi_lr,
                    c.joint_lr, c.transfer_lr, c.seqdisc_lr})
    if (!(lr > 0.0)) fail("learning rates must be positive");
  if (!(c.transfer_weight >= 0.0 && c.transfer_weight <= 1.0))
    fail("transfer_weight must be in [0, 1]");
  parse_criterion(c.seqdisc_criterion);
  if (!(c.kappa > 0.0)) fail("kappa must be positive");
  if (!(c.lambda_dc >= 0.0 && c.lambda_dc < 1.0))
    fail("lambda_dc must be in [0, 1)");
  if (c.boost_b < 0.0 || c.boost_b_hat < 0.0)
    fail("boosts must be non-negative");
  if (c.lm_order < 1) fail("lm_order must be positive");
  if (!(c.aug_alpha >= 0.0 && c.aug_alpha <= 1.0))
    fail("aug_alpha must be in [0, 1]");
  if (c.aug_beta < 0 || c.aug_gamma < 0)
    fail("aug_beta and aug_gamma must be non-negative");
  if (c.out_dir.empty()) fail("out_dir must not be empty");
  try {
    validate_stage_order(c.stages);
  } catch (const InvariantError& e) {
    fail(e.what());
  }
}

// File settings first, command-line overrides second, then the only
// environment hook: MTPIT_OUT_DIR replaces the output directory.
inline ExperimentConfig make_config(
    const std::map<std::string, std::string>& entries,
    const std::map<std::string, std::string>& overrides = {}) {
  ExperimentConfig c;
  for (const auto& [key, value] : entries)
    if (!overrides.count(key)) apply_config_entry(c, key, value);
  for (const auto& [key, value] : overrides) apply_config_entry(c, key, value);
  if (const char* env = std::getenv("MTPIT_OUT_DIR"))
    if (env[0] != '\0') c.out_dir = env;
  validate_config(c);
  return c;
}

inline ExperimentConfig load_config(
    const std::string& path,
    const std::map<std::string, std::string>& overrides = {}) {
  return make_config(read_config_file(path), overrides);
}

inline ModelConfig to_model_config(const ExperimentConfig& c) {
  ModelConfig mc;
  mc.feat_dim = c.feat_dim;
  mc.senones = c.senones;
  mc.streams = c.streams;
  mc.framewise_layers = c.framewise_layers;
  mc.framewise_width = c.framewise_width;
  mc.context_radius = c.context_radius;
  mc.tracing_layers = c.tracing_layers;
  mc.tracing_width = c.tracing_width;
  mc.recognition_layers = c.recognition_layers;
  mc.recognition_width = c.recognition_width;
  mc.share_recognition = true;
  return mc;
}

inline SeqLossConfig to_seq_config(const ExperimentConfig& c) {
  SeqLossConfig sc;
  sc.kappa = c.kappa;
  sc.lambda_dc = c.lambda_dc;
  sc.boost_b = c.boost_b;
  sc.boost_b_hat = c.boost_b_hat;
  return sc;
}

}  // namespace mtpit

#endif  // MTPIT_CONFIG_HPP_
