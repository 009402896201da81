// tools/mtpit.cpp

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

// Command-line front end over the experiment harness. One subcommand per
// pipeline step; every subcommand takes a config file plus key=value
// overrides and is deterministic given both.
//
// Exit codes: 0 success, 1 usage, 2 invalid config or violated invariant,
// 3 runtime failure (I/O and the like).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "mtpit/config.hpp"
#include "mtpit/corpus_io.hpp"
#include "mtpit/decode.hpp"
#include "mtpit/harness.hpp"

namespace {

using mtpit::check;
using mtpit::ExperimentConfig;
using mtpit::ExperimentData;
using mtpit::Mat;
using mtpit::StageName;

// Path of the freshest joint-shaped checkpoint named in the stage list.
std::pair<StageName, std::string> final_model(const ExperimentConfig& cfg) {
  StageName last = StageName::kJoint;
  for (StageName s : cfg.stages)
    if (s == StageName::kJoint || s == StageName::kTransfer ||
        s == StageName::kSeqdisc)
      last = s;
  return {last, cfg.out_dir + "/" + std::string(mtpit::stage_string(last)) +
                    ".ckpt"};
}

std::string curve_path(const ExperimentConfig& cfg, StageName s) {
  return cfg.out_dir + "/curves_" + std::string(mtpit::stage_string(s)) +
         ".csv";
}

void print_curve(const mtpit::TrainingCurve& curve) {
  for (const mtpit::CurveRow& r : curve.rows) {
    if (r.has_wer)
      std::printf("%s epoch %d  train %.6f  valid %.6f  wer %.4f\n",
                  r.stage.c_str(), r.epoch, r.train_obj, r.valid_obj,
                  r.valid_wer);
    else
      std::printf("%s epoch %d  train %.6f  valid %.6f\n", r.stage.c_str(),
                  r.epoch, r.train_obj, r.valid_obj);
  }
}

int run_training(const ExperimentConfig& cfg, StageName stage) {
  ExperimentData data = mtpit::prepare_data(cfg);
  mtpit::StageResult result = mtpit::run_stage(cfg, stage, data);
  mtpit::emit_curves(result.curve, curve_path(cfg, stage));
  print_curve(result.curve);
  std::printf("wrote %s\n", result.checkpoint.c_str());
  return 0;
}

int run_synth(const ExperimentConfig& cfg) {
  ExperimentData data = mtpit::prepare_data(cfg);
  std::filesystem::create_directories(cfg.out_dir);
  mtpit::save_corpus(data.train, cfg.out_dir + "/train");
  mtpit::save_corpus(data.valid, cfg.out_dir + "/valid");
  mtpit::dump_graph(data.graph, cfg.out_dir + "/denominator.graph");
  std::ofstream prior(cfg.out_dir + "/prior.txt");
  check(static_cast<bool>(prior), "cannot write " + cfg.out_dir + "/prior.txt");
  char buf[64];
  for (int s = 0; s < data.log_prior.size(); ++s) {
    std::snprintf(buf, sizeof buf, "%.17g\n", data.log_prior[s]);
    prior << buf;
  }
  if (!prior.good()) throw mtpit::RuntimeFailure("short write: prior.txt");
  std::printf(
      "speakers %zu  train %zu utts  valid %zu utts  graph %d states %zu "
      "arcs\n",
      data.speakers.size(), data.train.utterances.size(),
      data.valid.utterances.size(), data.graph.num_states,
      data.graph.arcs.size());
  std::printf("wrote %s/{train,valid,denominator.graph,prior.txt}\n",
              cfg.out_dir.c_str());
  return 0;
}

int run_decode(const ExperimentConfig& cfg) {
  ExperimentData data = mtpit::prepare_data(cfg);
  auto [stage, ckpt] = final_model(cfg);
  mtpit::ModelGraph g =
      mtpit::ModelGraph::build('e', mtpit::to_model_config(cfg), 0);
  check(std::filesystem::exists(ckpt), "missing checkpoint: " + ckpt);
  mtpit::load_checkpoint(g, ckpt);
  std::string path = cfg.out_dir + "/hypotheses.txt";
  std::ofstream out(path);
  check(static_cast<bool>(out), "cannot write " + path);
  for (const mtpit::MixedUtterance& u : data.valid.utterances) {
    std::vector<Mat> posts = mtpit::forward_joint(g, u.mixed_features);
    for (int n = 0; n < u.num_streams(); ++n) {
      Mat loglik = posts[n];
      loglik.rowwise() -= data.log_prior.transpose();
      std::vector<int> hyp =
          mtpit::collapse(mtpit::viterbi(data.graph, loglik, cfg.kappa));
      out << u.id << ' ' << n;
      for (int tok : hyp) out << ' ' << tok;
      out << '\n';
    }
  }
  if (!out.good()) throw mtpit::RuntimeFailure("short write: " + path);
  std::printf("decoded %zu utterances with %s.ckpt -> %s\n",
              data.valid.utterances.size(), mtpit::stage_string(stage).c_str(),
              path.c_str());
  return 0;
}

int run_score(const ExperimentConfig& cfg) {
  ExperimentData data = mtpit::prepare_data(cfg);
  auto [stage, ckpt] = final_model(cfg);
  mtpit::ModelGraph g =
      mtpit::ModelGraph::build('e', mtpit::to_model_config(cfg), 0);
  check(std::filesystem::exists(ckpt), "missing checkpoint: " + ckpt);
  mtpit::load_checkpoint(g, ckpt);
  auto [scores, total] =
      mtpit::evaluate(g, data.valid, data.graph, data.log_prior, cfg.kappa);
  {
    std::ofstream table(cfg.out_dir + "/score.txt");
    check(static_cast<bool>(table), "cannot write " + cfg.out_dir +
                                        "/score.txt");
    mtpit::write_score_table(scores, total, table);
    std::ofstream csv(cfg.out_dir + "/score.csv");
    check(static_cast<bool>(csv), "cannot write " + cfg.out_dir +
                                      "/score.csv");
    mtpit::write_score_csv(scores, total, csv);
    if (!table.good() || !csv.good())
      throw mtpit::RuntimeFailure("short write: score files");
  }
  std::printf("%s.ckpt on %zu utterances: wer %.6f  (S %lld  D %lld  I %lld  "
              "C %lld  refs %lld)\n",
              mtpit::stage_string(stage).c_str(), scores.size(), total.wer,
              static_cast<long long>(total.substitutions),
              static_cast<long long>(total.deletions),
              static_cast<long long>(total.insertions),
              static_cast<long long>(total.correct),
              static_cast<long long>(total.reference_count));
  std::printf("wrote %s/{score.txt,score.csv}\n", cfg.out_dir.c_str());
  return 0;
}

int run_curves(const ExperimentConfig& cfg) {
  mtpit::TrainingCurve all;
  for (StageName s : cfg.stages) {
    std::string path = curve_path(cfg, s);
    if (std::filesystem::exists(path))
      all.append(mtpit::load_curves(path));
  }
  if (all.rows.empty())
    throw mtpit::RuntimeFailure("no curve files under " + cfg.out_dir);
  mtpit::validate_curve(all);
  mtpit::emit_curves(all, cfg.out_dir + "/curves.csv");
  std::printf("%s\n", mtpit::kCurveHeader);
  print_curve(all);
  std::printf("wrote %s/curves.csv\n", cfg.out_dir.c_str());
  return 0;
}

struct SubSpec {
  const char* name;
  const char* help;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale multi-talker training laboratory"};
  app.require_subcommand(1);

  const std::vector<SubSpec> subs = {
      {"synth", "Generate the corpora, the prior and the decoding graph"},
      {"pretrain-frame", "Train the framewise module (stage b)"},
      {"pretrain-trace", "Train the tracing module (stage c)"},
      {"pretrain-asr", "Train the clean recognition module (stage d), "
                       "cross entropy only"},
      {"train-teacher", "Train the clean teacher (stage d), cross entropy "
                        "plus any configured sequence fine-tune"},
      {"train-joint", "Assemble and train the joint model (stage e)"},
      {"train-transfer", "Fine-tune the joint model against the teacher"},
      {"train-seqdisc", "Fine-tune the joint model discriminatively"},
      {"decode", "Write validation hypotheses for the latest joint model"},
      {"score", "Score the latest joint model on the validation set"},
      {"curves", "Merge per-stage curve files and print them"},
  };
  std::string config_path;
  std::vector<std::string> overrides;
  for (const SubSpec& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("config", config_path, "key=value config file")
        ->required();
    sub->add_option("overrides", overrides, "key=value overrides");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const std::string cmd = app.get_subcommands().front()->get_name();
    std::map<std::string, std::string> kv;
    for (const std::string& o : overrides) {
      std::string::size_type eq = o.find('=');
      if (eq == std::string::npos || eq == 0) {
        std::fprintf(stderr, "override is not key=value: %s\n", o.c_str());
        return 1;
      }
      kv[o.substr(0, eq)] = o.substr(eq + 1);
    }
    // The plain pretrain is cross entropy only; the teacher command
    // honours the configured sequence fine-tune epochs.
    if (cmd == "pretrain-asr") kv["teacher_mmi_epochs"] = "0";
    ExperimentConfig cfg = mtpit::load_config(config_path, kv);
    if (cmd == "synth") return run_synth(cfg);
    if (cmd == "pretrain-frame") return run_training(cfg, StageName::kFrame);
    if (cmd == "pretrain-trace") return run_training(cfg, StageName::kTrace);
    if (cmd == "pretrain-asr") return run_training(cfg, StageName::kAsr);
    if (cmd == "train-teacher") return run_training(cfg, StageName::kAsr);
    if (cmd == "train-joint") return run_training(cfg, StageName::kJoint);
    if (cmd == "train-transfer")
      return run_training(cfg, StageName::kTransfer);
    if (cmd == "train-seqdisc")
      return run_training(cfg, StageName::kSeqdisc);
    if (cmd == "decode") return run_decode(cfg);
    if (cmd == "score") return run_score(cfg);
    if (cmd == "curves") return run_curves(cfg);
    std::fprintf(stderr, "unknown subcommand: %s\n", cmd.c_str());
    return 1;
  } catch (const mtpit::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const mtpit::InvariantError& e) {
    std::fprintf(stderr, "invariant violated: %s\n", e.what());
    return 2;
  } catch (const mtpit::RuntimeFailure& e) {
    std::fprintf(stderr, "runtime failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
