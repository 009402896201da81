// include/mtpit/harness.hpp

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

#ifndef MTPIT_HARNESS_HPP_
#define MTPIT_HARNESS_HPP_

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mtpit/checkpoint.hpp"
#include "mtpit/config.hpp"
#include "mtpit/decode.hpp"
#include "mtpit/forward_backward.hpp"
#include "mtpit/model.hpp"
#include "mtpit/ngram.hpp"
#include "mtpit/pit.hpp"
#include "mtpit/senone_graph.hpp"
#include "mtpit/seqdisc.hpp"
#include "mtpit/synth.hpp"

namespace mtpit {

struct CurveRow {
  std::string stage;
  int epoch = 0;
  double train_obj = 0.0;
  double valid_obj = 0.0;
  double valid_wer = 0.0;
  bool has_wer = false;
};

struct TrainingCurve {
  std::vector<CurveRow> rows;

  void append(const TrainingCurve& other) {
    rows.insert(rows.end(), other.rows.begin(), other.rows.end());
  }
};

inline void validate_curve(const TrainingCurve& curve) {
  std::map<std::string, int> last;
  for (const CurveRow& r : curve.rows) {
    auto it = last.find(r.stage);
    if (it != last.end())
      check(r.epoch > it->second,
            "curve: epochs not increasing within stage " + r.stage);
    last[r.stage] = r.epoch;
  }
}

inline const char* kCurveHeader = "stage,epoch,train_obj,valid_obj,valid_wer";

namespace detail {

inline std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace detail

// CSV curve emission. Appending to an existing non-empty file skips the
// header so concatenated stage runs stay parseable.
inline void emit_curves(const TrainingCurve& curve, const std::string& path,
                        bool append = false) {
  validate_curve(curve);
  bool write_header = true;
  if (append) {
    std::error_code ec;
    write_header = std::filesystem::file_size(path, ec) == 0 || ec;
  }
  std::ofstream os(path, append ? std::ios::app : std::ios::trunc);
  if (!os) throw RuntimeFailure("cannot write curves: " + path);
  if (write_header) os << kCurveHeader << '\n';
  for (const CurveRow& r : curve.rows) {
    os << r.stage << ',' << r.epoch << ',' << detail::fmt9(r.train_obj) << ','
       << detail::fmt9(r.valid_obj) << ',';
    if (r.has_wer) os << detail::fmt9(r.valid_wer);
    os << '\n';
  }
  if (!os) throw RuntimeFailure("short write on curves: " + path);
}

inline TrainingCurve load_curves(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw RuntimeFailure("cannot read curves: " + path);
  std::string line;
  if (!std::getline(is, line) || line != kCurveHeader)
    throw RuntimeFailure("bad curves header in " + path);
  TrainingCurve curve;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) fields.push_back(item);
    if (line.back() == ',') fields.push_back("");
    if (fields.size() != 5)
      throw RuntimeFailure("bad curves row in " + path + ": " + line);
    try {
      CurveRow r;
      r.stage = fields[0];
      r.epoch = std::stoi(fields[1]);
      r.train_obj = std::stod(fields[2]);
      r.valid_obj = std::stod(fields[3]);
      if (!fields[4].empty()) {
        r.valid_wer = std::stod(fields[4]);
        r.has_wer = true;
      }
      curve.rows.push_back(std::move(r));
    } catch (const std::exception&) {
      throw RuntimeFailure("bad curves row in " + path + ": " + line);
    }
  }
  validate_curve(curve);
  return curve;
}

// Everything a training run needs besides the model: the two corpora, the
// senone prior, and the denominator acceptor estimated from the training
// alignments.
struct ExperimentData {
  std::vector<SpeakerModel> speakers;
  Corpus train;
  Corpus valid;
  Vec log_prior;
  NGramModel lm;
  SenoneGraph graph;
};

// Add-one smoothed senone prior over the training alignments, so no
// senone gets probability zero even at desk scale.
inline Vec senone_log_prior(const Corpus& corpus, int senones) {
  check(senones >= 2, "senone_log_prior: bad senone count");
  Vec counts = Vec::Ones(senones);
  for (const MixedUtterance& u : corpus.utterances)
    for (const std::vector<int>& align : u.padded_alignments)
      for (int s : align) {
        check(s >= 0 && s < senones, "senone_log_prior: label out of range");
        counts[s] += 1.0;
      }
  return (counts / counts.sum()).array().log().matrix();
}

// Generation is pure in the config: speakers, both corpora, the prior and
// the graph all derive from corpus_seed. Validation uses held-out
// speakers whenever at least four are available.
inline ExperimentData prepare_data(const ExperimentConfig& cfg) {
  ExperimentData data;
  for (int i = 0; i < cfg.speakers; ++i) {
    SpeakerConfig sc;
    sc.feat_dim = cfg.feat_dim;
    sc.senones = cfg.senones;
    sc.seed = mix_seed(cfg.corpus_seed, 1000 + static_cast<uint64_t>(i));
    sc.id = "spk" + std::to_string(i);
    data.speakers.push_back(gen_speaker(sc));
  }
  std::vector<SpeakerModel> train_models = data.speakers;
  std::vector<SpeakerModel> valid_models = data.speakers;
  if (cfg.speakers >= 4) {
    train_models.assign(data.speakers.begin(), data.speakers.end() - 2);
    valid_models.assign(data.speakers.end() - 2, data.speakers.end());
  }
  int valid_utts = std::max(
      1, static_cast<int>(std::lround(cfg.valid_fraction * cfg.utterances)));
  CorpusConfig train_cc;
  train_cc.utterances = cfg.utterances;
  train_cc.len_min = cfg.len_min;
  train_cc.len_max = cfg.len_max;
  train_cc.seed = mix_seed(cfg.corpus_seed, 11);
  train_cc.id_prefix = "trn";
  data.train = build_corpus(train_models, train_cc);
  CorpusConfig valid_cc = train_cc;
  valid_cc.utterances = valid_utts;
  valid_cc.seed = mix_seed(cfg.corpus_seed, 22);
  valid_cc.id_prefix = "dev";
  data.valid = build_corpus(valid_models, valid_cc);
  data.log_prior = senone_log_prior(data.train, cfg.senones);
  std::vector<std::vector<int>> align_corpus;
  for (const MixedUtterance& u : data.train.utterances)
    for (const std::vector<int>& a : u.padded_alignments)
      align_corpus.push_back(a);
  data.lm = train_ngram(align_corpus, cfg.lm_order);
  data.graph = compile(data.lm);
  return data;
}

namespace detail {

struct Sgd {
  double lr = 0.01;
  double momentum = 0.9;
  Vec velocity;

  void step(Vec& params, const Vec& grad) {
    velocity = momentum * velocity + grad;
    params -= lr * velocity;
  }
};

// Shared epoch loop: fixed utterance order, per-batch mean gradients, one
// curve row per epoch. eval(is_valid, index, grad) returns the objective
// for one item and accumulates parameter gradients when grad is non-null.
template <class Eval>
TrainingCurve run_epochs(const ExperimentConfig& cfg, ModelGraph& g,
                         const std::string& label, int epochs, double lr,
                         int train_count, int valid_count, Eval eval,
                         const std::function<double()>& wer_fn = {}) {
  check(train_count >= 1 && valid_count >= 1, "run_epochs: empty corpus");
  Sgd opt;
  opt.lr = lr;
  opt.momentum = cfg.momentum;
  opt.velocity = Vec::Zero(g.params.size());
  Vec grad = Vec::Zero(g.params.size());
  TrainingCurve curve;
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    double train_sum = 0.0;
    int pending = 0;
    grad.setZero();
    for (int i = 0; i < train_count; ++i) {
      train_sum += eval(false, i, &grad);
      if (++pending == cfg.batch || i == train_count - 1) {
        grad /= pending;
        opt.step(g.params.data(), grad);
        grad.setZero();
        pending = 0;
      }
    }
    double valid_sum = 0.0;
    for (int i = 0; i < valid_count; ++i) valid_sum += eval(true, i, nullptr);
    CurveRow row;
    row.stage = label;
    row.epoch = epoch;
    row.train_obj = train_sum / train_count;
    row.valid_obj = valid_sum / valid_count;
    if (cfg.curve_wer && wer_fn) {
      row.valid_wer = wer_fn();
      row.has_wer = true;
    }
    curve.rows.push_back(std::move(row));
  }
  return curve;
}

inline std::vector<const CleanUtterance*> clean_items(const Corpus& c) {
  std::vector<const CleanUtterance*> out;
  for (const MixedUtterance& u : c.utterances)
    for (const CleanUtterance& s : u.streams) out.push_back(&s);
  return out;
}

inline Mat subtract_prior(const Mat& log_post, const Vec& log_prior) {
  Mat ll = log_post;
  ll.rowwise() -= log_prior.transpose();
  return ll;
}

}  // namespace detail

// Stage (b): framewise separation, frame-level assignment.
inline TrainingCurve train_framewise(const ExperimentConfig& cfg,
                                     ModelGraph& g,
                                     const ExperimentData& data) {
  check(g.stage == 'b', "train_framewise: wrong stage");
  auto eval = [&](bool is_valid, int i, Vec* grad) {
    const MixedUtterance& u =
        (is_valid ? data.valid : data.train).utterances[i];
    GradientTape tape;
    std::vector<Mat> out =
        forward_framewise(g, u.mixed_features, grad ? &tape : nullptr);
    std::vector<Mat> targets;
    for (const CleanUtterance& s : u.streams) targets.push_back(s.features);
    LossResult r = mse_pit_frame(out, targets);
    if (grad) *grad += backward(g, tape, r.gradients);
    return r.value;
  };
  return detail::run_epochs(cfg, g, "frame", cfg.frame_epochs, cfg.frame_lr,
                            static_cast<int>(data.train.utterances.size()),
                            static_cast<int>(data.valid.utterances.size()),
                            eval);
}

// Stage (c): utterance-level tracing, one assignment per utterance.
inline TrainingCurve train_tracing(const ExperimentConfig& cfg, ModelGraph& g,
                                   const ExperimentData& data) {
  check(g.stage == 'c', "train_tracing: wrong stage");
  auto eval = [&](bool is_valid, int i, Vec* grad) {
    const MixedUtterance& u =
        (is_valid ? data.valid : data.train).utterances[i];
    GradientTape tape;
    std::vector<Mat> out =
        forward_tracing(g, u.mixed_features, grad ? &tape : nullptr);
    std::vector<Mat> targets;
    for (const CleanUtterance& s : u.streams) targets.push_back(s.features);
    LossResult r = mse_pit_utt(out, targets);
    if (grad) *grad += backward(g, tape, r.gradients);
    return r.value;
  };
  return detail::run_epochs(cfg, g, "trace", cfg.trace_epochs, cfg.trace_lr,
                            static_cast<int>(data.train.utterances.size()),
                            static_cast<int>(data.valid.utterances.size()),
                            eval);
}

// Stage (d): clean-speech recognizer, framewise CE against the forced
// alignment of each clean stream.
inline TrainingCurve train_asr(const ExperimentConfig& cfg, ModelGraph& g,
                               const ExperimentData& data) {
  check(g.stage == 'd', "train_asr: wrong stage");
  std::vector<const CleanUtterance*> train_items =
      detail::clean_items(data.train);
  std::vector<const CleanUtterance*> valid_items =
      detail::clean_items(data.valid);
  auto eval = [&](bool is_valid, int i, Vec* grad) {
    const CleanUtterance& u = *(is_valid ? valid_items : train_items)[i];
    GradientTape tape;
    Mat lp = forward_recognition(g, u.features, grad ? &tape : nullptr);
    LossResult r = ce_pit({lp}, {u.alignment});
    if (grad) *grad += backward(g, tape, r.gradients[0]);
    return r.value;
  };
  return detail::run_epochs(cfg, g, "asr", cfg.asr_epochs, cfg.asr_lr,
                            static_cast<int>(train_items.size()),
                            static_cast<int>(valid_items.size()), eval);
}

// Optional lattice-free MMI fine-tune of the clean recognizer. Objective
// rows report the negated MMI value so lower stays better everywhere.
inline TrainingCurve finetune_asr_mmi(const ExperimentConfig& cfg,
                                      ModelGraph& g,
                                      const ExperimentData& data) {
  check(g.stage == 'd', "finetune_asr_mmi: wrong stage");
  SeqLossConfig sc;
  sc.kappa = cfg.kappa;
  sc.lambda_dc = 0.0;
  sc.boost_b = 0.0;
  sc.boost_b_hat = 0.0;
  std::vector<const CleanUtterance*> train_items =
      detail::clean_items(data.train);
  std::vector<const CleanUtterance*> valid_items =
      detail::clean_items(data.valid);
  auto eval = [&](bool is_valid, int i, Vec* grad) {
    const CleanUtterance& u = *(is_valid ? valid_items : train_items)[i];
    GradientTape tape;
    Mat lp = forward_recognition(g, u.features, grad ? &tape : nullptr);
    StreamBundle bundle;
    bundle.loglik = {detail::subtract_prior(lp, data.log_prior)};
    bundle.references = {u.alignment};
    bundle.graph = &data.graph;
    SeqTermResult term = lf_mmi(bundle, 0, sc);
    if (grad) *grad += backward(g, tape, Mat(-term.gradient));
    return -term.value;
  };
  return detail::run_epochs(cfg, g, "asr-mmi", cfg.teacher_mmi_epochs,
                            cfg.teacher_mmi_lr,
                            static_cast<int>(train_items.size()),
                            static_cast<int>(valid_items.size()), eval);
}

// Clean teacher: CE training, then the optional MMI fine-tune on top of
// the CE model.
inline ModelGraph train_teacher(const ExperimentConfig& cfg,
                                const ExperimentData& data,
                                TrainingCurve* curve = nullptr) {
  ModelGraph g = ModelGraph::build('d', to_model_config(cfg),
                                   mix_seed(cfg.seed, fnv1a("asr-init")));
  TrainingCurve c = train_asr(cfg, g, data);
  if (cfg.teacher_mmi_epochs > 0) c.append(finetune_asr_mmi(cfg, g, data));
  if (curve) curve->append(c);
  return g;
}

// Per-utterance decoding and pairwise scoring of a joint model.
inline std::pair<std::vector<UtteranceScore>, WerReport> evaluate(
    const ModelGraph& g, const Corpus& corpus, const SenoneGraph& graph,
    const Vec& log_prior, double kappa) {
  check(g.stage == 'e', "evaluate: checkpoint stage mismatch");
  std::vector<UtteranceScore> scores;
  for (const MixedUtterance& u : corpus.utterances) {
    std::vector<Mat> out = forward_joint(g, u.mixed_features);
    std::vector<std::vector<int>> refs, hyps;
    for (int n = 0; n < u.num_streams(); ++n) {
      refs.push_back(u.streams[n].transcript);
      hyps.push_back(collapse(
          viterbi(graph, detail::subtract_prior(out[n], log_prior), kappa)));
    }
    scores.push_back({u.id, pairwise_wer(refs, hyps)});
  }
  return {scores, aggregate_scores(scores)};
}

// Stage (e) with the CE-PIT objective.
inline TrainingCurve train_joint_ce(const ExperimentConfig& cfg, ModelGraph& g,
                                    const ExperimentData& data) {
  check(g.stage == 'e', "train_joint_ce: wrong stage");
  auto eval = [&](bool is_valid, int i, Vec* grad) {
    const MixedUtterance& u =
        (is_valid ? data.valid : data.train).utterances[i];
    GradientTape tape;
    std::vector<Mat> out =
        forward_joint(g, u.mixed_features, grad ? &tape : nullptr);
    LossResult r = ce_pit(out, u.padded_alignments);
    if (grad) *grad += backward(g, tape, r.gradients);
    return r.value;
  };
  auto wer_fn = [&]() {
    return evaluate(g, data.valid, data.graph, data.log_prior, cfg.kappa)
        .second.wer;
  };
  return detail::run_epochs(cfg, g, "joint", cfg.joint_epochs, cfg.joint_lr,
                            static_cast<int>(data.train.utterances.size()),
                            static_cast<int>(data.valid.utterances.size()),
                            eval, wer_fn);
}

// Self-transfer: interpolated hard CE and soft KLD against the clean
// teacher's posteriors on each parallel clean stream.
inline TrainingCurve train_transfer(const ExperimentConfig& cfg, ModelGraph& g,
                                    const ModelGraph& teacher,
                                    const ExperimentData& data) {
  check(g.stage == 'e', "train_transfer: wrong student stage");
  check(teacher.stage == 'd', "train_transfer: wrong teacher stage");
  auto teacher_posts = [&](const Corpus& corpus) {
    std::vector<std::vector<Mat>> posts;
    for (const MixedUtterance& u : corpus.utterances) {
      std::vector<Mat> per_stream;
      for (const CleanUtterance& s : u.streams)
        per_stream.push_back(forward_recognition(teacher, s.features));
      posts.push_back(std::move(per_stream));
    }
    return posts;
  };
  std::vector<std::vector<Mat>> train_posts = teacher_posts(data.train);
  std::vector<std::vector<Mat>> valid_posts = teacher_posts(data.valid);
  auto eval = [&](bool is_valid, int i, Vec* grad) {
    const MixedUtterance& u =
        (is_valid ? data.valid : data.train).utterances[i];
    const std::vector<Mat>& teach = (is_valid ? valid_posts : train_posts)[i];
    GradientTape tape;
    std::vector<Mat> out =
        forward_joint(g, u.mixed_features, grad ? &tape : nullptr);
    LossResult hard = ce_pit(out, u.padded_alignments);
    LossResult soft = kld_pit(out, teach);
    LossResult r = interpolate(hard, soft, cfg.transfer_weight);
    if (grad) *grad += backward(g, tape, r.gradients);
    return r.value;
  };
  auto wer_fn = [&]() {
    return evaluate(g, data.valid, data.graph, data.log_prior, cfg.kappa)
        .second.wer;
  };
  return detail::run_epochs(cfg, g, "transfer", cfg.transfer_epochs,
                            cfg.transfer_lr,
                            static_cast<int>(data.train.utterances.size()),
                            static_cast<int>(data.valid.utterances.size()),
                            eval, wer_fn);
}

// Ensemble transfer: the student learns from each teacher in turn; curve
// epochs continue across segments.
inline TrainingCurve transfer_ensemble(const ExperimentConfig& cfg,
                                       ModelGraph& g,
                                       const std::vector<const ModelGraph*>&
                                           teachers,
                                       const ExperimentData& data) {
  check(!teachers.empty(), "transfer_ensemble: no teachers");
  TrainingCurve all;
  int offset = 0;
  for (const ModelGraph* t : teachers) {
    check(t != nullptr, "transfer_ensemble: null teacher");
    TrainingCurve c = train_transfer(cfg, g, *t, data);
    for (CurveRow& r : c.rows) r.epoch += offset;
    offset += cfg.transfer_epochs;
    all.append(c);
  }
  return all;
}

// Sequence-discriminative fine-tune of the joint model under SEQ-PIT,
// with swapped-word augmented reference pairs mixed into the epoch.
inline TrainingCurve train_seqdisc(const ExperimentConfig& cfg, ModelGraph& g,
                                   const ExperimentData& data) {
  check(g.stage == 'e', "train_seqdisc: wrong stage");
  SeqCriterion criterion = parse_criterion(cfg.seqdisc_criterion);
  SeqLossConfig sc = to_seq_config(cfg);
  struct SeqItem {
    const MixedUtterance* utt;
    std::vector<std::vector<int>> refs;
  };
  std::vector<TranscriptPair> pairs;
  for (const MixedUtterance& u : data.train.utterances) {
    check(u.num_streams() == 2, "train_seqdisc: corpus is not two-stream");
    pairs.push_back({u.padded_alignments[0], u.padded_alignments[1]});
  }
  std::vector<std::vector<int>> aug =
      augment_swapped(pairs, cfg.aug_alpha, cfg.aug_beta, cfg.aug_gamma,
                      mix_seed(cfg.seed, fnv1a("augment")));
  const size_t stride = 2 + 2 * static_cast<size_t>(cfg.aug_gamma);
  std::vector<SeqItem> train_items;
  for (size_t i = 0; i < data.train.utterances.size(); ++i) {
    const MixedUtterance* u = &data.train.utterances[i];
    for (size_t c = 0; c < stride; c += 2)
      train_items.push_back(
          {u, {aug[i * stride + c], aug[i * stride + c + 1]}});
  }
  std::vector<SeqItem> valid_items;
  for (const MixedUtterance& u : data.valid.utterances)
    valid_items.push_back({&u, u.padded_alignments});
  auto eval = [&](bool is_valid, int i, Vec* grad) {
    const SeqItem& item = (is_valid ? valid_items : train_items)[i];
    GradientTape tape;
    std::vector<Mat> out =
        forward_joint(g, item.utt->mixed_features, grad ? &tape : nullptr);
    StreamBundle bundle;
    for (const Mat& lp : out)
      bundle.loglik.push_back(detail::subtract_prior(lp, data.log_prior));
    bundle.references = item.refs;
    bundle.graph = &data.graph;
    LossResult r = seq_pit(bundle, criterion, sc);
    if (grad) *grad += backward(g, tape, r.gradients);
    return r.value;
  };
  auto wer_fn = [&]() {
    return evaluate(g, data.valid, data.graph, data.log_prior, cfg.kappa)
        .second.wer;
  };
  return detail::run_epochs(cfg, g, "seqdisc", cfg.seqdisc_epochs,
                            cfg.seqdisc_lr,
                            static_cast<int>(train_items.size()),
                            static_cast<int>(valid_items.size()), eval,
                            wer_fn);
}

// Framewise senone accuracy of a clean recognizer, for teacher audits.
inline double frame_accuracy(const ModelGraph& g, const Corpus& corpus) {
  check(g.stage == 'd', "frame_accuracy: wrong stage");
  int64_t hit = 0, total = 0;
  for (const MixedUtterance& u : corpus.utterances)
    for (const CleanUtterance& s : u.streams) {
      Mat lp = forward_recognition(g, s.features);
      for (int t = 0; t < s.frames(); ++t) {
        int arg = 0;
        lp.row(t).maxCoeff(&arg);
        hit += arg == s.alignment[t];
        ++total;
      }
    }
  check(total > 0, "frame_accuracy: empty corpus");
  return static_cast<double>(hit) / static_cast<double>(total);
}

struct StageResult {
  std::string checkpoint;
  TrainingCurve curve;
};

namespace detail {

inline std::string stage_ckpt(const ExperimentConfig& cfg, StageName s) {
  return cfg.out_dir + "/" + stage_string(s) + ".ckpt";
}

inline ModelGraph load_stage(char stage, const ExperimentConfig& cfg,
                             const std::string& path) {
  check(std::filesystem::exists(path),
        "missing prerequisite checkpoint: " + path);
  ModelGraph g = ModelGraph::build(stage, to_model_config(cfg), 0);
  load_checkpoint(g, path);
  return g;
}

// The seqdisc stage fine-tunes the latest joint model named in the stage
// list, decided by the config rather than by directory contents.
inline StageName seqdisc_input(const ExperimentConfig& cfg) {
  StageName input = StageName::kJoint;
  for (StageName s : cfg.stages) {
    if (s == StageName::kSeqdisc) break;
    if (s == StageName::kTransfer) input = StageName::kTransfer;
  }
  return input;
}

}  // namespace detail

// One stage of the regimen: read the prerequisite checkpoints from the
// output directory, train, and atomically write this stage's checkpoint.
inline StageResult run_stage(const ExperimentConfig& cfg, StageName stage,
                             const ExperimentData& data) {
  std::filesystem::create_directories(cfg.out_dir);
  StageResult result;
  result.checkpoint = detail::stage_ckpt(cfg, stage);
  switch (stage) {
    case StageName::kFrame: {
      ModelGraph g = ModelGraph::build('b', to_model_config(cfg),
                                       mix_seed(cfg.seed, fnv1a("frame-init")));
      result.curve = train_framewise(cfg, g, data);
      save_checkpoint(g, result.checkpoint);
      break;
    }
    case StageName::kTrace: {
      ModelGraph gb = detail::load_stage(
          'b', cfg, detail::stage_ckpt(cfg, StageName::kFrame));
      ModelGraph g = assemble('c', to_model_config(cfg), {&gb},
                              mix_seed(cfg.seed, fnv1a("trace-init")));
      result.curve = train_tracing(cfg, g, data);
      save_checkpoint(g, result.checkpoint);
      break;
    }
    case StageName::kAsr: {
      ModelGraph g = train_teacher(cfg, data, &result.curve);
      save_checkpoint(g, result.checkpoint);
      break;
    }
    case StageName::kJoint: {
      ModelGraph gc = detail::load_stage(
          'c', cfg, detail::stage_ckpt(cfg, StageName::kTrace));
      ModelGraph gd = detail::load_stage(
          'd', cfg, detail::stage_ckpt(cfg, StageName::kAsr));
      ModelGraph g = assemble('e', to_model_config(cfg), {&gc, &gd},
                              mix_seed(cfg.seed, fnv1a("joint-init")));
      result.curve = train_joint_ce(cfg, g, data);
      save_checkpoint(g, result.checkpoint);
      break;
    }
    case StageName::kTransfer: {
      ModelGraph g = detail::load_stage(
          'e', cfg, detail::stage_ckpt(cfg, StageName::kJoint));
      ModelGraph teacher = detail::load_stage(
          'd', cfg, detail::stage_ckpt(cfg, StageName::kAsr));
      result.curve = train_transfer(cfg, g, teacher, data);
      save_checkpoint(g, result.checkpoint);
      break;
    }
    case StageName::kSeqdisc: {
      ModelGraph g = detail::load_stage(
          'e', cfg, detail::stage_ckpt(cfg, detail::seqdisc_input(cfg)));
      result.curve = train_seqdisc(cfg, g, data);
      save_checkpoint(g, result.checkpoint);
      break;
    }
  }
  return result;
}

// The whole configured regimen in order, one curves file at the end.
inline TrainingCurve run_pipeline(const ExperimentConfig& cfg,
                                  const ExperimentData& data) {
  TrainingCurve all;
  for (StageName s : cfg.stages) all.append(run_stage(cfg, s, data).curve);
  emit_curves(all, cfg.out_dir + "/curves.csv");
  return all;
}

inline TrainingCurve run_pipeline(const ExperimentConfig& cfg) {
  ExperimentData data = prepare_data(cfg);
  return run_pipeline(cfg, data);
}

}  // namespace mtpit

#endif  // MTPIT_HARNESS_HPP_
