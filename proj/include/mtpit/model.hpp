// mtpit/model.hpp
//
// The modular differentiable network: a frame-wise convolutional module, a
// speaker tracing module, and N speech recognition modules with shared
// parameters, assembled progressively through stages
//
//   b: framewise trunk + N linear output heads
//   c: framewise trunk (heads removed) + tracing BiGRU stack + N heads
//   d: recognition BiGRU stack + log-softmax output, single stream
//   e: trunk + tracing + N recognition instances over the traced streams
//
// Parameters live in one flat float64 vector with named slices; gradients
// are exact reverse-mode derivatives computed from a tape of cached
// activations. All initialization derives from per-slice seeds, so building
// the same graph twice yields bit-identical parameters.

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

#ifndef MTPIT_MODEL_HPP_
#define MTPIT_MODEL_HPP_

#include <map>
#include <random>
#include <string>
#include <vector>

#include "mtpit/common.hpp"

namespace mtpit {

enum class ModuleKind { framewise_conv, tracing_recurrent, recognition_recurrent };

struct ModuleSpec {
  ModuleKind kind;
  int layer_count = 1;
  int hidden_width = 32;
  int context_radius = 0;  // framewise only
  int output_arity = 0;    // number of stream heads owned by the module
};

struct ModelConfig {
  int feat_dim = 16;
  int senones = 21;
  int streams = 2;
  int framewise_layers = 1;
  int framewise_width = 32;
  int context_radius = 2;
  int tracing_layers = 2;
  int tracing_width = 32;
  int recognition_layers = 2;
  int recognition_width = 32;
  bool share_recognition = true;
};

// Flat parameter vector with named slices. Layout is fixed by insertion
// order at build time; matrices map onto the flat storage column-major.
class ParamStore {
 public:
  struct Slice {
    std::string name;
    int offset = 0;
    int rows = 0;
    int cols = 0;
    double init_limit = 0.0;  // uniform +-limit; 0 means zero-init
    int len() const { return rows * cols; }
  };

  void add(const std::string& name, int rows, int cols, double init_limit) {
    check(index_.find(name) == index_.end(), "duplicate slice: " + name);
    check(rows >= 1 && cols >= 1, "bad slice shape: " + name);
    index_[name] = static_cast<int>(slices_.size());
    slices_.push_back({name, total_, rows, cols, init_limit});
    total_ += rows * cols;
  }

  void finalize() { data_ = Vec::Zero(total_); }

  // Per-slice seeding keeps initialization independent of slice order.
  void init(uint64_t seed) {
    for (const Slice& s : slices_) {
      if (s.init_limit == 0.0) continue;
      std::mt19937_64 rng(mix_seed(seed, fnv1a(s.name)));
      std::uniform_real_distribution<double> u(-s.init_limit, s.init_limit);
      for (int i = 0; i < s.len(); ++i) data_[s.offset + i] = u(rng);
    }
  }

  bool has(const std::string& name) const {
    return index_.find(name) != index_.end();
  }
  const Slice& slice(const std::string& name) const {
    auto it = index_.find(name);
    check(it != index_.end(), "unknown slice: " + name);
    return slices_[it->second];
  }
  const std::vector<Slice>& slices() const { return slices_; }
  int size() const { return total_; }
  Vec& data() { return data_; }
  const Vec& data() const { return data_; }

  Eigen::Map<Mat> mat(const std::string& name) {
    const Slice& s = slice(name);
    return Eigen::Map<Mat>(data_.data() + s.offset, s.rows, s.cols);
  }
  Eigen::Map<const Mat> mat(const std::string& name) const {
    const Slice& s = slice(name);
    return Eigen::Map<const Mat>(data_.data() + s.offset, s.rows, s.cols);
  }
  // Same named layout over an external buffer (gradient accumulators).
  Eigen::Map<Mat> mat_in(Vec& buf, const std::string& name) const {
    const Slice& s = slice(name);
    check(buf.size() == total_, "gradient buffer size mismatch");
    return Eigen::Map<Mat>(buf.data() + s.offset, s.rows, s.cols);
  }

 private:
  std::vector<Slice> slices_;
  std::map<std::string, int> index_;
  Vec data_;
  int total_ = 0;
};

namespace detail {

inline Vec sigmoid(const Vec& v) {
  return (1.0 / (1.0 + (-v.array()).exp())).matrix();
}

// y(t) = b + sum_k W_k x(t+k-radius), zero outside [0, T). W stores the
// K = 2*radius+1 taps as horizontal blocks of width Din.
inline Mat conv_forward(const Mat& x, const Eigen::Map<const Mat>& w,
                        const Eigen::Map<const Mat>& b, int radius) {
  const int T = static_cast<int>(x.rows());
  const int din = static_cast<int>(x.cols());
  const int K = 2 * radius + 1;
  check(w.cols() == din * K, "conv weight width mismatch");
  Mat y(T, w.rows());
  for (int t = 0; t < T; ++t) {
    Vec acc = b.col(0);
    for (int k = 0; k < K; ++k) {
      int src = t + k - radius;
      if (src < 0 || src >= T) continue;
      acc.noalias() += w.middleCols(k * din, din) * x.row(src).transpose();
    }
    y.row(t) = acc.transpose();
  }
  return y;
}

inline Mat conv_backward(const Mat& x, const Eigen::Map<const Mat>& w,
                         Eigen::Map<Mat> gw, Eigen::Map<Mat> gb, int radius,
                         const Mat& dpre) {
  const int T = static_cast<int>(x.rows());
  const int din = static_cast<int>(x.cols());
  const int K = 2 * radius + 1;
  Mat dx = Mat::Zero(T, din);
  for (int t = 0; t < T; ++t) {
    gb.col(0) += dpre.row(t).transpose();
    for (int k = 0; k < K; ++k) {
      int src = t + k - radius;
      if (src < 0 || src >= T) continue;
      gw.middleCols(k * din, din).noalias() +=
          dpre.row(t).transpose() * x.row(src);
      dx.row(src).noalias() += dpre.row(t) * w.middleCols(k * din, din);
    }
  }
  return dx;
}

struct GruParams {
  Eigen::Map<const Mat> wx, wh, bx, bh;
};

struct GruGrads {
  Eigen::Map<Mat> wx, wh, bx, bh;
};

inline GruParams gru_params(const ParamStore& p, const std::string& prefix) {
  return {p.mat(prefix + ".wx"), p.mat(prefix + ".wh"), p.mat(prefix + ".bx"),
          p.mat(prefix + ".bh")};
}

inline GruGrads gru_grads(const ParamStore& p, Vec& buf,
                          const std::string& prefix) {
  return {p.mat_in(buf, prefix + ".wx"), p.mat_in(buf, prefix + ".wh"),
          p.mat_in(buf, prefix + ".bx"), p.mat_in(buf, prefix + ".bh")};
}

// One direction of a gated recurrent layer, gate order r, z, n:
//   r = sigmoid(Wr x + bir + Ur h + bhr)
//   z = sigmoid(Wz x + biz + Uz h + bhz)
//   n = tanh(Wn x + bin + r . (Un h + bhn))
//   h = (1 - z) . n + z . h_prev
struct GruCache {
  Mat x, h, r, z, n, uhn;
};

inline Mat gru_dir_forward(const Mat& x, const GruParams& p, GruCache* cache) {
  const int T = static_cast<int>(x.rows());
  const int W = static_cast<int>(p.wh.cols());
  Mat h(T, W), r(T, W), z(T, W), n(T, W), uhn(T, W);
  Vec h_prev = Vec::Zero(W);
  for (int t = 0; t < T; ++t) {
    Vec a = p.wx * x.row(t).transpose() + p.bx.col(0);
    Vec u = p.wh * h_prev + p.bh.col(0);
    Vec rt = sigmoid(a.segment(0, W) + u.segment(0, W));
    Vec zt = sigmoid(a.segment(W, W) + u.segment(W, W));
    Vec un = u.segment(2 * W, W);
    Vec nt = (a.segment(2 * W, W) + rt.cwiseProduct(un)).array().tanh();
    Vec ht = (Vec::Ones(W) - zt).cwiseProduct(nt) + zt.cwiseProduct(h_prev);
    r.row(t) = rt.transpose();
    z.row(t) = zt.transpose();
    n.row(t) = nt.transpose();
    uhn.row(t) = un.transpose();
    h.row(t) = ht.transpose();
    h_prev = ht;
  }
  if (cache) {
    cache->x = x;
    cache->h = h;
    cache->r = r;
    cache->z = z;
    cache->n = n;
    cache->uhn = uhn;
  }
  return h;
}

inline Mat gru_dir_backward(const GruCache& c, const GruParams& p,
                            GruGrads& g, const Mat& dh_up) {
  const int T = static_cast<int>(c.x.rows());
  const int din = static_cast<int>(c.x.cols());
  const int W = static_cast<int>(p.wh.cols());
  Mat dx = Mat::Zero(T, din);
  Vec dh_carry = Vec::Zero(W);
  for (int t = T - 1; t >= 0; --t) {
    Vec dh = dh_up.row(t).transpose() + dh_carry;
    Vec h_prev = t > 0 ? Vec(c.h.row(t - 1).transpose()) : Vec(Vec::Zero(W));
    Vec rt = c.r.row(t).transpose();
    Vec zt = c.z.row(t).transpose();
    Vec nt = c.n.row(t).transpose();
    Vec un = c.uhn.row(t).transpose();
    Vec dz = dh.cwiseProduct(h_prev - nt);
    Vec dn = dh.cwiseProduct(Vec::Ones(W) - zt);
    Vec dan = dn.cwiseProduct(Vec::Ones(W) - nt.cwiseProduct(nt));
    Vec dr = dan.cwiseProduct(un);
    Vec dun = dan.cwiseProduct(rt);
    Vec daz = dz.cwiseProduct(zt).cwiseProduct(Vec::Ones(W) - zt);
    Vec dar = dr.cwiseProduct(rt).cwiseProduct(Vec::Ones(W) - rt);
    g.wx.middleRows(0, W).noalias() += dar * c.x.row(t);
    g.wx.middleRows(W, W).noalias() += daz * c.x.row(t);
    g.wx.middleRows(2 * W, W).noalias() += dan * c.x.row(t);
    g.bx.col(0).segment(0, W) += dar;
    g.bx.col(0).segment(W, W) += daz;
    g.bx.col(0).segment(2 * W, W) += dan;
    g.wh.middleRows(0, W).noalias() += dar * h_prev.transpose();
    g.wh.middleRows(W, W).noalias() += daz * h_prev.transpose();
    g.wh.middleRows(2 * W, W).noalias() += dun * h_prev.transpose();
    g.bh.col(0).segment(0, W) += dar;
    g.bh.col(0).segment(W, W) += daz;
    g.bh.col(0).segment(2 * W, W) += dun;
    dx.row(t) = (p.wx.middleRows(0, W).transpose() * dar +
                 p.wx.middleRows(W, W).transpose() * daz +
                 p.wx.middleRows(2 * W, W).transpose() * dan)
                    .transpose();
    dh_carry = dh.cwiseProduct(zt) +
               p.wh.middleRows(0, W).transpose() * dar +
               p.wh.middleRows(W, W).transpose() * daz +
               p.wh.middleRows(2 * W, W).transpose() * dun;
  }
  return dx;
}

struct BiGruCache {
  GruCache fwd, bwd;  // bwd holds the time-reversed sequence
};

// Bidirectional layer: forward pass over x and a second pass over the
// time-reversed x, outputs concatenated to T x 2W.
inline Mat bigru_forward(const Mat& x, const GruParams& fwd,
                         const GruParams& bwd, BiGruCache* cache) {
  const int W = static_cast<int>(fwd.wh.cols());
  Mat hf = gru_dir_forward(x, fwd, cache ? &cache->fwd : nullptr);
  Mat xr = x.colwise().reverse();
  Mat hbr = gru_dir_forward(xr, bwd, cache ? &cache->bwd : nullptr);
  Mat out(x.rows(), 2 * W);
  out.leftCols(W) = hf;
  out.rightCols(W) = hbr.colwise().reverse();
  return out;
}

inline Mat bigru_backward(const BiGruCache& c, const GruParams& fwd,
                          const GruParams& bwd, GruGrads& gfwd, GruGrads& gbwd,
                          const Mat& dout) {
  const int W = static_cast<int>(fwd.wh.cols());
  Mat dx = gru_dir_backward(c.fwd, fwd, gfwd, dout.leftCols(W));
  Mat dhbr = dout.rightCols(W).colwise().reverse();
  Mat dxr = gru_dir_backward(c.bwd, bwd, gbwd, dhbr);
  dx += dxr.colwise().reverse();
  return dx;
}

// y = x W^T + b per row.
inline Mat linear_forward(const Mat& x, const Eigen::Map<const Mat>& w,
                          const Eigen::Map<const Mat>& b) {
  return (x * w.transpose()).rowwise() + b.col(0).transpose();
}

inline Mat linear_backward(const Mat& x, const Eigen::Map<const Mat>& w,
                           Eigen::Map<Mat> gw, Eigen::Map<Mat> gb,
                           const Mat& dy) {
  gw.noalias() += dy.transpose() * x;
  gb.col(0) += dy.colwise().sum().transpose();
  return dy * w;
}

inline Mat log_softmax_rows(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (int t = 0; t < logits.rows(); ++t)
    out.row(t) = logits.row(t).array() - log_sum_exp_row(logits.row(t));
  return out;
}

inline Mat log_softmax_backward(const Mat& log_post, const Mat& dlp) {
  Mat out(dlp.rows(), dlp.cols());
  for (int t = 0; t < dlp.rows(); ++t) {
    double s = dlp.row(t).sum();
    out.row(t) = dlp.row(t) - s * log_post.row(t).array().exp().matrix();
  }
  return out;
}

}  // namespace detail

// Cached activations from one forward call, sufficient for an exact
// reverse-mode sweep. A tape is tied to the graph that produced it.
struct GradientTape {
  char stage = 0;
  int param_count = 0;
  Mat input;
  std::vector<Mat> conv_in;   // framewise layer inputs
  std::vector<Mat> conv_pre;  // framewise pre-activations
  Mat trunk_out;
  std::vector<detail::BiGruCache> tracing_layers;
  std::vector<Mat> tracing_in;  // input per tracing layer
  Mat tracing_top;              // last tracing layer output
  struct RecogTape {
    Mat in;
    std::vector<detail::BiGruCache> layers;
    std::vector<Mat> layer_in;
    Mat top;
    Mat log_post;
  };
  std::vector<RecogTape> recog;
};

class ModelGraph {
 public:
  char stage = 0;
  ModelConfig config;
  std::vector<ModuleSpec> modules;
  ParamStore params;

  static ModelGraph build(char stage, const ModelConfig& cfg, uint64_t seed) {
    check(stage == 'b' || stage == 'c' || stage == 'd' || stage == 'e',
          "unknown stage tag");
    check(cfg.feat_dim >= 1 && cfg.senones >= 2, "bad model dimensions");
    check(cfg.streams >= 1 && cfg.streams <= 6, "stream count out of range");
    check(cfg.framewise_layers >= 1 && cfg.tracing_layers >= 1 &&
              cfg.recognition_layers >= 1,
          "layer counts must be positive");
    check(cfg.framewise_width >= 1 && cfg.tracing_width >= 1 &&
              cfg.recognition_width >= 1,
          "widths must be positive");
    check(cfg.context_radius >= 0, "context radius must be non-negative");
    ModelGraph g;
    g.stage = stage;
    g.config = cfg;
    if (stage == 'b' || stage == 'c' || stage == 'e') {
      g.add_framewise(stage == 'b');
      g.modules.push_back({ModuleKind::framewise_conv, cfg.framewise_layers,
                           cfg.framewise_width, cfg.context_radius,
                           stage == 'b' ? cfg.streams : 0});
    }
    if (stage == 'c' || stage == 'e') {
      g.add_tracing();
      g.modules.push_back({ModuleKind::tracing_recurrent, cfg.tracing_layers,
                           cfg.tracing_width, 0, cfg.streams});
    }
    if (stage == 'd') {
      g.add_recognition("recognition");
      g.modules.push_back({ModuleKind::recognition_recurrent,
                           cfg.recognition_layers, cfg.recognition_width, 0,
                           1});
    }
    if (stage == 'e') {
      if (cfg.share_recognition) {
        g.add_recognition("recognition");
      } else {
        for (int n = 0; n < cfg.streams; ++n)
          g.add_recognition("recognition" + std::to_string(n));
      }
      g.modules.push_back({ModuleKind::recognition_recurrent,
                           cfg.recognition_layers, cfg.recognition_width, 0,
                           cfg.streams});
    }
    g.params.finalize();
    g.params.init(seed);
    return g;
  }

 private:
  static double glorot(int fan_in, int fan_out) {
    return std::sqrt(6.0 / (fan_in + fan_out));
  }

  void add_framewise(bool with_heads) {
    const ModelConfig& c = config;
    int din = c.feat_dim;
    for (int l = 0; l < c.framewise_layers; ++l) {
      int radius = l == 0 ? c.context_radius : 0;
      int K = 2 * radius + 1;
      std::string base = "framewise.conv" + std::to_string(l);
      params.add(base + ".weight", c.framewise_width, din * K,
                 glorot(din * K, c.framewise_width));
      params.add(base + ".bias", c.framewise_width, 1, 0.0);
      din = c.framewise_width;
    }
    if (with_heads) {
      for (int n = 0; n < c.streams; ++n) {
        std::string base = "framewise.head" + std::to_string(n);
        params.add(base + ".weight", c.feat_dim, c.framewise_width,
                   glorot(c.framewise_width, c.feat_dim));
        params.add(base + ".bias", c.feat_dim, 1, 0.0);
      }
    }
  }

  void add_gru_stack(const std::string& prefix, int layers, int width,
                     int input_dim) {
    int din = input_dim;
    for (int l = 0; l < layers; ++l) {
      for (const char* dir : {"fwd", "bwd"}) {
        std::string base =
            prefix + ".gru" + std::to_string(l) + "." + dir;
        params.add(base + ".wx", 3 * width, din, glorot(din, width));
        params.add(base + ".wh", 3 * width, width, glorot(width, width));
        params.add(base + ".bx", 3 * width, 1, 0.0);
        params.add(base + ".bh", 3 * width, 1, 0.0);
      }
      din = 2 * width;
    }
  }

  void add_tracing() {
    const ModelConfig& c = config;
    add_gru_stack("tracing", c.tracing_layers, c.tracing_width,
                  c.framewise_width);
    for (int n = 0; n < c.streams; ++n) {
      std::string base = "tracing.head" + std::to_string(n);
      params.add(base + ".weight", c.feat_dim, 2 * c.tracing_width,
                 glorot(2 * c.tracing_width, c.feat_dim));
      params.add(base + ".bias", c.feat_dim, 1, 0.0);
    }
  }

  void add_recognition(const std::string& prefix) {
    const ModelConfig& c = config;
    add_gru_stack(prefix, c.recognition_layers, c.recognition_width,
                  c.feat_dim);
    params.add(prefix + ".out.weight", c.senones, 2 * c.recognition_width,
               glorot(2 * c.recognition_width, c.senones));
    params.add(prefix + ".out.bias", c.senones, 1, 0.0);
  }
};

namespace detail {

inline Mat framewise_trunk(const ModelGraph& g, const Mat& mixed,
                           GradientTape* tape) {
  check(mixed.cols() == g.config.feat_dim, "input feature width mismatch");
  Mat x = mixed;
  for (int l = 0; l < g.config.framewise_layers; ++l) {
    int radius = l == 0 ? g.config.context_radius : 0;
    std::string base = "framewise.conv" + std::to_string(l);
    Mat pre = conv_forward(x, g.params.mat(base + ".weight"),
                           g.params.mat(base + ".bias"), radius);
    if (tape) {
      tape->conv_in.push_back(x);
      tape->conv_pre.push_back(pre);
    }
    x = pre.cwiseMax(0.0);
  }
  if (tape) tape->trunk_out = x;
  return x;
}

inline Mat framewise_trunk_backward(const ModelGraph& g,
                                    const GradientTape& tape, Vec& grad,
                                    Mat dtrunk) {
  for (int l = g.config.framewise_layers - 1; l >= 0; --l) {
    int radius = l == 0 ? g.config.context_radius : 0;
    std::string base = "framewise.conv" + std::to_string(l);
    Mat dpre =
        dtrunk.cwiseProduct((tape.conv_pre[l].array() > 0.0).cast<double>().matrix());
    dtrunk = conv_backward(tape.conv_in[l], g.params.mat(base + ".weight"),
                           g.params.mat_in(grad, base + ".weight"),
                           g.params.mat_in(grad, base + ".bias"), radius, dpre);
  }
  return dtrunk;
}

inline Mat gru_stack_forward(const ModelGraph& g, const std::string& prefix,
                             int layers, const Mat& input,
                             std::vector<BiGruCache>* caches,
                             std::vector<Mat>* layer_in) {
  Mat x = input;
  for (int l = 0; l < layers; ++l) {
    std::string base = prefix + ".gru" + std::to_string(l);
    if (layer_in) layer_in->push_back(x);
    if (caches) caches->emplace_back();
    x = bigru_forward(x, gru_params(g.params, base + ".fwd"),
                      gru_params(g.params, base + ".bwd"),
                      caches ? &caches->back() : nullptr);
  }
  return x;
}

inline Mat gru_stack_backward(const ModelGraph& g, const std::string& prefix,
                              int layers,
                              const std::vector<BiGruCache>& caches,
                              Vec& grad, Mat dtop) {
  for (int l = layers - 1; l >= 0; --l) {
    std::string base = prefix + ".gru" + std::to_string(l);
    GruGrads gfwd = gru_grads(g.params, grad, base + ".fwd");
    GruGrads gbwd = gru_grads(g.params, grad, base + ".bwd");
    dtop = bigru_backward(caches[l], gru_params(g.params, base + ".fwd"),
                          gru_params(g.params, base + ".bwd"), gfwd, gbwd,
                          dtop);
  }
  return dtop;
}

inline std::string recog_prefix(const ModelGraph& g, int stream) {
  if (g.stage == 'd' || g.config.share_recognition) return "recognition";
  return "recognition" + std::to_string(stream);
}

// Recognition stack over one feature stream; fills a per-stream tape.
inline Mat recognition_forward_one(const ModelGraph& g, const Mat& features,
                                   int stream, GradientTape::RecogTape* rt) {
  check(features.cols() == g.config.feat_dim, "input feature width mismatch");
  std::string prefix = recog_prefix(g, stream);
  if (rt) rt->in = features;
  Mat top = gru_stack_forward(g, prefix, g.config.recognition_layers, features,
                              rt ? &rt->layers : nullptr,
                              rt ? &rt->layer_in : nullptr);
  if (rt) rt->top = top;
  Mat logits = linear_forward(top, g.params.mat(prefix + ".out.weight"),
                              g.params.mat(prefix + ".out.bias"));
  Mat log_post = log_softmax_rows(logits);
  if (rt) rt->log_post = log_post;
  return log_post;
}

inline Mat recognition_backward_one(const ModelGraph& g,
                                    const GradientTape::RecogTape& rt,
                                    int stream, Vec& grad, const Mat& dlp) {
  std::string prefix = recog_prefix(g, stream);
  Mat dlogits = log_softmax_backward(rt.log_post, dlp);
  Mat dtop = linear_backward(rt.top, g.params.mat(prefix + ".out.weight"),
                             g.params.mat_in(grad, prefix + ".out.weight"),
                             g.params.mat_in(grad, prefix + ".out.bias"),
                             dlogits);
  return gru_stack_backward(g, prefix, g.config.recognition_layers, rt.layers,
                            grad, dtop);
}

}  // namespace detail

// Stage b: trunk plus N linear heads, one recovered stream per head. Output
// at frame t depends only on input frames within context_radius of t.
inline std::vector<Mat> forward_framewise(const ModelGraph& g, const Mat& mixed,
                                          GradientTape* tape = nullptr) {
  check(g.stage == 'b', "framewise output heads absent at this stage");
  if (tape) {
    *tape = GradientTape();
    tape->stage = g.stage;
    tape->param_count = g.params.size();
    tape->input = mixed;
  }
  Mat trunk = detail::framewise_trunk(g, mixed, tape);
  std::vector<Mat> out;
  for (int n = 0; n < g.config.streams; ++n) {
    std::string base = "framewise.head" + std::to_string(n);
    out.push_back(detail::linear_forward(trunk, g.params.mat(base + ".weight"),
                                         g.params.mat(base + ".bias")));
  }
  return out;
}

// Stage c (and the tracing sub-stack of stage e): trunk then bidirectional
// tracing layers then N heads of recovered features.
inline std::vector<Mat> forward_tracing(const ModelGraph& g, const Mat& mixed,
                                        GradientTape* tape = nullptr) {
  check(g.stage == 'c' || g.stage == 'e',
        "tracing module absent at this stage");
  if (tape) {
    *tape = GradientTape();
    tape->stage = 'c';
    tape->param_count = g.params.size();
    tape->input = mixed;
  }
  Mat trunk = detail::framewise_trunk(g, mixed, tape);
  Mat top = detail::gru_stack_forward(g, "tracing", g.config.tracing_layers,
                                      trunk, tape ? &tape->tracing_layers : nullptr,
                                      tape ? &tape->tracing_in : nullptr);
  if (tape) tape->tracing_top = top;
  std::vector<Mat> out;
  for (int n = 0; n < g.config.streams; ++n) {
    std::string base = "tracing.head" + std::to_string(n);
    out.push_back(detail::linear_forward(top, g.params.mat(base + ".weight"),
                                         g.params.mat(base + ".bias")));
  }
  return out;
}

// Stage d (or the shared recognition module of stage e) over a single
// feature stream; rows are normalized log-posteriors.
inline Mat forward_recognition(const ModelGraph& g, const Mat& features,
                               GradientTape* tape = nullptr) {
  check(g.stage == 'd' || (g.stage == 'e' && g.config.share_recognition),
        "recognition module absent at this stage");
  if (tape) {
    *tape = GradientTape();
    tape->stage = 'd';
    tape->param_count = g.params.size();
    tape->input = features;
    tape->recog.resize(1);
  }
  return detail::recognition_forward_one(g, features, 0,
                                         tape ? &tape->recog[0] : nullptr);
}

// Stage e: full stack, N normalized log-posterior streams.
inline std::vector<Mat> forward_joint(const ModelGraph& g, const Mat& mixed,
                                      GradientTape* tape = nullptr) {
  check(g.stage == 'e', "joint forward requires the full stack");
  if (tape) {
    *tape = GradientTape();
    tape->stage = 'e';
    tape->param_count = g.params.size();
    tape->input = mixed;
    tape->recog.resize(g.config.streams);
  }
  Mat trunk = detail::framewise_trunk(g, mixed, tape);
  Mat top = detail::gru_stack_forward(g, "tracing", g.config.tracing_layers,
                                      trunk, tape ? &tape->tracing_layers : nullptr,
                                      tape ? &tape->tracing_in : nullptr);
  if (tape) tape->tracing_top = top;
  std::vector<Mat> out;
  for (int n = 0; n < g.config.streams; ++n) {
    std::string base = "tracing.head" + std::to_string(n);
    Mat traced = detail::linear_forward(top, g.params.mat(base + ".weight"),
                                        g.params.mat(base + ".bias"));
    out.push_back(detail::recognition_forward_one(
        g, traced, n, tape ? &tape->recog[n] : nullptr));
  }
  return out;
}

// Reverse-mode sweep over a recorded tape. upstream holds the gradient of
// the scalar loss w.r.t. each forward output stream; the return value is
// the gradient w.r.t. the flat parameter vector. Shared slices accumulate
// contributions from every stream that touches them.
inline Vec backward(const ModelGraph& g, const GradientTape& tape,
                    const std::vector<Mat>& upstream) {
  check(tape.param_count == g.params.size() &&
            (tape.stage == g.stage ||
             (tape.stage == 'c' && g.stage == 'e') ||
             (tape.stage == 'd' && g.stage == 'e')),
        "tape does not match this graph");
  Vec grad = Vec::Zero(g.params.size());
  if (tape.stage == 'b') {
    check(static_cast<int>(upstream.size()) == g.config.streams,
          "upstream stream count mismatch");
    Mat dtrunk = Mat::Zero(tape.trunk_out.rows(), tape.trunk_out.cols());
    for (int n = 0; n < g.config.streams; ++n) {
      std::string base = "framewise.head" + std::to_string(n);
      dtrunk += detail::linear_backward(
          tape.trunk_out, g.params.mat(base + ".weight"),
          g.params.mat_in(grad, base + ".weight"),
          g.params.mat_in(grad, base + ".bias"), upstream[n]);
    }
    detail::framewise_trunk_backward(g, tape, grad, dtrunk);
    return grad;
  }
  if (tape.stage == 'c') {
    check(static_cast<int>(upstream.size()) == g.config.streams,
          "upstream stream count mismatch");
    Mat dtop = Mat::Zero(tape.tracing_top.rows(), tape.tracing_top.cols());
    for (int n = 0; n < g.config.streams; ++n) {
      std::string base = "tracing.head" + std::to_string(n);
      dtop += detail::linear_backward(
          tape.tracing_top, g.params.mat(base + ".weight"),
          g.params.mat_in(grad, base + ".weight"),
          g.params.mat_in(grad, base + ".bias"), upstream[n]);
    }
    Mat dtrunk = detail::gru_stack_backward(
        g, "tracing", g.config.tracing_layers, tape.tracing_layers, grad, dtop);
    detail::framewise_trunk_backward(g, tape, grad, dtrunk);
    return grad;
  }
  if (tape.stage == 'd') {
    check(upstream.size() == 1, "stage d expects one upstream stream");
    detail::recognition_backward_one(g, tape.recog[0], 0, grad, upstream[0]);
    return grad;
  }
  check(static_cast<int>(upstream.size()) == g.config.streams,
        "upstream stream count mismatch");
  Mat dtop = Mat::Zero(tape.tracing_top.rows(), tape.tracing_top.cols());
  for (int n = 0; n < g.config.streams; ++n) {
    Mat dtraced =
        detail::recognition_backward_one(g, tape.recog[n], n, grad, upstream[n]);
    std::string base = "tracing.head" + std::to_string(n);
    dtop += detail::linear_backward(tape.tracing_top,
                                    g.params.mat(base + ".weight"),
                                    g.params.mat_in(grad, base + ".weight"),
                                    g.params.mat_in(grad, base + ".bias"),
                                    dtraced);
  }
  Mat dtrunk = detail::gru_stack_backward(
      g, "tracing", g.config.tracing_layers, tape.tracing_layers, grad, dtop);
  detail::framewise_trunk_backward(g, tape, grad, dtrunk);
  return grad;
}

inline Vec backward(const ModelGraph& g, const GradientTape& tape,
                    const Mat& upstream) {
  return backward(g, tape, std::vector<Mat>{upstream});
}

// Progressive assembly. Retained slices are copied bit-exactly from the
// pretrained parts; everything else keeps its fresh seeded initialization.
//   b, d: built from scratch (no parts)
//   c:    one part at stage b (trunk retained, heads dropped)
//   e:    one part at stage c and one at stage d
inline ModelGraph assemble(char stage_to, const ModelConfig& cfg,
                           const std::vector<const ModelGraph*>& parts,
                           uint64_t seed) {
  auto part_at = [&](char stage) -> const ModelGraph* {
    const ModelGraph* found = nullptr;
    for (const ModelGraph* p : parts)
      if (p->stage == stage) {
        check(found == nullptr, "assemble: duplicate part stage");
        found = p;
      }
    return found;
  };
  std::vector<std::string> required;
  if (stage_to == 'b' || stage_to == 'd') {
    check(parts.empty(), "assemble: stage takes no pretrained parts");
  } else if (stage_to == 'c') {
    check(parts.size() == 1 && part_at('b') != nullptr,
          "assemble: stage c requires a stage b part");
    required = {"framewise."};
  } else if (stage_to == 'e') {
    check(parts.size() == 2 && part_at('c') != nullptr &&
              part_at('d') != nullptr,
          "assemble: stage e requires stage c and stage d parts");
    check(cfg.share_recognition,
          "assemble: stage e assembly requires shared recognition");
    required = {"framewise.", "tracing.", "recognition."};
  } else {
    throw InvariantError("assemble: unknown target stage");
  }
  ModelGraph g = ModelGraph::build(stage_to, cfg, seed);
  for (const ModelGraph* part : parts) {
    for (const ParamStore::Slice& s : part->params.slices()) {
      if (!g.params.has(s.name)) continue;
      const ParamStore::Slice& dst = g.params.slice(s.name);
      check(dst.len() == s.len(),
            "assemble: incompatible slice width: " + s.name);
      g.params.data().segment(dst.offset, dst.len()) =
          part->params.data().segment(s.offset, s.len());
    }
  }
  for (const std::string& prefix : required) {
    for (const ParamStore::Slice& s : g.params.slices()) {
      if (s.name.rfind(prefix, 0) != 0) continue;
      bool found = false;
      for (const ModelGraph* part : parts)
        if (part->params.has(s.name) &&
            part->params.slice(s.name).len() == s.len())
          found = true;
      check(found, "assemble: missing pretrained slice: " + s.name);
    }
  }
  return g;
}

}  // namespace mtpit

#endif  // MTPIT_MODEL_HPP_
