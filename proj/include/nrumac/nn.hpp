#pragma once

// Small recurrent network: stacked GRU layers followed by one dense output
// layer whose rows are split into categorical heads (policy) or a single
// scalar (value). All parameters live in one flat vector; gradients come
// from an explicit reverse pass over a recorded tape.
//
// Sequences are batched: step t of a batch is an (in x B) matrix, so B
// independent sequences are evaluated with matrix products.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nrumac/error.hpp"
#include "nrumac/rng.hpp"

namespace nrumac {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct NetSpec {
  int input = 1;
  int hidden = 256;
  int layers = 2;
  std::vector<int> heads = {1};  // output rows per head; a value net has {1}

  int outputs() const { return std::accumulate(heads.begin(), heads.end(), 0); }

  friend bool operator==(const NetSpec&, const NetSpec&) = default;

  void validate() const {
    if (input < 1) throw ConfigError("net: input size must be >= 1");
    if (hidden < 1) throw ConfigError("net: hidden width must be >= 1");
    if (layers < 1) throw ConfigError("net: need at least one recurrent layer");
    if (heads.empty()) throw ConfigError("net: need at least one head");
    for (int h : heads) {
      if (h < 1) throw ConfigError("net: head sizes must be >= 1");
    }
  }
};

class Net {
 public:
  Net() = default;
  explicit Net(NetSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    std::size_t off = 0;
    for (int l = 0; l < spec_.layers; ++l) {
      const int in = l == 0 ? spec_.input : spec_.hidden;
      const int h3 = 3 * spec_.hidden;
      Layer L;
      L.w = off;
      off += static_cast<std::size_t>(h3) * in;
      L.u = off;
      off += static_cast<std::size_t>(h3) * spec_.hidden;
      L.b = off;
      off += static_cast<std::size_t>(h3);
      L.in = in;
      layers_.push_back(L);
    }
    out_w_ = off;
    off += static_cast<std::size_t>(spec_.outputs()) * spec_.hidden;
    out_b_ = off;
    off += static_cast<std::size_t>(spec_.outputs());
    params = Vec::Zero(static_cast<Eigen::Index>(off));
  }

  const NetSpec& spec() const { return spec_; }
  Eigen::Index size() const { return params.size(); }

  /// Orthogonal recurrent blocks, Glorot-uniform input and output weights,
  /// zero biases; the output layer is scaled by `head_scale`.
  void initialize(Rng& rng, double head_scale) {
    params.setZero();
    const int H = spec_.hidden;
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto glorot = [&](double* p, int rows, int cols, double scale) {
      const double a = scale * std::sqrt(6.0 / (rows + cols));
      std::uniform_real_distribution<double> u(-a, a);
      for (int k = 0; k < rows * cols; ++k) p[k] = u(rng);
    };
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const Layer& L = layers_[l];
      glorot(params.data() + L.w, 3 * H, L.in, 1.0);
      auto U = umat(params, l);
      for (int g = 0; g < 3; ++g) {
        Mat a(H, H);
        for (int k = 0; k < H * H; ++k) a.data()[k] = gauss(rng);
        Eigen::HouseholderQR<Mat> qr(a);
        Mat q = qr.householderQ() * Mat::Identity(H, H);
        // Sign fix so the distribution is uniform over orthogonal matrices.
        const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
        for (int c = 0; c < H; ++c) {
          if (r(c, c) < 0) q.col(c) *= -1.0;
        }
        U.block(g * H, 0, H, H) = q;
      }
    }
    glorot(params.data() + out_w_, spec_.outputs(), H, head_scale);
  }

  Vec params;

  // Views into a flat vector laid out like `params` (used for gradients too).
  struct Layer {
    std::size_t w = 0, u = 0, b = 0;
    int in = 0;
  };
  using MapM = Eigen::Map<Mat>;
  using CMapM = Eigen::Map<const Mat>;
  using MapV = Eigen::Map<Vec>;
  using CMapV = Eigen::Map<const Vec>;

  MapM wmat(Vec& v, std::size_t l) const { return MapM(v.data() + layers_[l].w, 3 * spec_.hidden, layers_[l].in); }
  MapM umat(Vec& v, std::size_t l) const { return MapM(v.data() + layers_[l].u, 3 * spec_.hidden, spec_.hidden); }
  MapV bvec(Vec& v, std::size_t l) const { return MapV(v.data() + layers_[l].b, 3 * spec_.hidden); }
  MapM owmat(Vec& v) const { return MapM(v.data() + out_w_, spec_.outputs(), spec_.hidden); }
  MapV obvec(Vec& v) const { return MapV(v.data() + out_b_, spec_.outputs()); }
  CMapM wmat(const Vec& v, std::size_t l) const { return CMapM(v.data() + layers_[l].w, 3 * spec_.hidden, layers_[l].in); }
  CMapM umat(const Vec& v, std::size_t l) const { return CMapM(v.data() + layers_[l].u, 3 * spec_.hidden, spec_.hidden); }
  CMapV bvec(const Vec& v, std::size_t l) const { return CMapV(v.data() + layers_[l].b, 3 * spec_.hidden); }
  CMapM owmat(const Vec& v) const { return CMapM(v.data() + out_w_, spec_.outputs(), spec_.hidden); }
  CMapV obvec(const Vec& v) const { return CMapV(v.data() + out_b_, spec_.outputs()); }

 private:
  NetSpec spec_;
  std::vector<Layer> layers_;
  std::size_t out_w_ = 0, out_b_ = 0;
};

/// Hidden state: one (hidden x B) matrix per layer.
using Hidden = std::vector<Mat>;

inline Hidden zero_hidden(const NetSpec& spec, int batch = 1) {
  return Hidden(static_cast<std::size_t>(spec.layers), Mat::Zero(spec.hidden, batch));
}

/// Forward intermediates needed by backward().
struct Tape {
  struct Step {
    std::vector<Mat> x, h, z, r, n, un;  // per layer
    Mat top;                              // top-layer output
  };
  std::vector<Step> steps;
  std::size_t param_count = 0;
};

struct ForwardResult {
  std::vector<Mat> outputs;  // per step, (outputs x B)
  Hidden hidden;
};

namespace detail {
inline Mat sigmoid(const Mat& a) { return (1.0 + (-a.array()).exp()).inverse().matrix(); }
}  // namespace detail

/// Runs the network over `inputs` (one (input x B) matrix per step) from
/// hidden state `h0`. Records a tape when one is given.
inline ForwardResult forward(const Net& net, const std::vector<Mat>& inputs, const Hidden& h0, Tape* tape = nullptr) {
  const NetSpec& s = net.spec();
  const int H = s.hidden;
  if (h0.size() != static_cast<std::size_t>(s.layers)) throw ConfigError("forward: hidden state has wrong layer count");
  ForwardResult out;
  out.hidden = h0;
  if (tape) {
    tape->steps.clear();
    tape->param_count = static_cast<std::size_t>(net.size());
  }
  for (const Mat& x0 : inputs) {
    if (x0.rows() != s.input) throw ConfigError("forward: input has wrong size");
    if (!x0.allFinite()) throw ConfigError("forward: non-finite input");
    const Eigen::Index B = x0.cols();
    Tape::Step st;
    Mat x = x0;
    for (std::size_t l = 0; l < static_cast<std::size_t>(s.layers); ++l) {
      Mat& h = out.hidden[l];
      if (h.rows() != H || h.cols() != B) throw ConfigError("forward: hidden state has wrong shape");
      Mat a = net.wmat(net.params, l) * x;
      a.colwise() += net.bvec(net.params, l);
      const Mat u = net.umat(net.params, l) * h;
      const Mat z = detail::sigmoid(a.topRows(H) + u.topRows(H));
      const Mat r = detail::sigmoid(a.middleRows(H, H) + u.middleRows(H, H));
      const Mat un = u.bottomRows(H);
      const Mat n = (a.bottomRows(H).array() + r.array() * un.array()).tanh().matrix();
      Mat hn = ((1.0 - z.array()) * n.array() + z.array() * h.array()).matrix();
      if (tape) {
        st.x.push_back(x);
        st.h.push_back(h);
        st.z.push_back(z);
        st.r.push_back(r);
        st.n.push_back(n);
        st.un.push_back(un);
      }
      h = hn;
      x = std::move(hn);
    }
    Mat y = net.owmat(net.params) * x;
    y.colwise() += net.obvec(net.params);
    if (tape) st.top = x;
    if (tape) tape->steps.push_back(std::move(st));
    out.outputs.push_back(std::move(y));
  }
  return out;
}

/// Accumulates into `grad` the gradient of a loss whose derivative with
/// respect to each step's outputs is `d_outputs`. The initial hidden state is
/// treated as a constant.
inline void backward(const Net& net, const Tape& tape, const std::vector<Mat>& d_outputs, Vec& grad) {
  if (tape.param_count != static_cast<std::size_t>(net.size())) throw ConfigError("backward: tape belongs to another net");
  if (grad.size() != net.size()) throw ConfigError("backward: gradient vector has wrong length");
  if (d_outputs.size() != tape.steps.size()) throw ConfigError("backward: output gradients do not match the tape");
  const NetSpec& s = net.spec();
  const int H = s.hidden;
  const std::size_t L = static_cast<std::size_t>(s.layers);
  std::vector<Mat> carry(L);
  for (std::size_t k = tape.steps.size(); k-- > 0;) {
    const Tape::Step& st = tape.steps[k];
    const Mat& dy = d_outputs[k];
    const Eigen::Index B = dy.cols();
    net.owmat(grad).noalias() += dy * st.top.transpose();
    net.obvec(grad) += dy.rowwise().sum();
    Mat dh_in = net.owmat(net.params).transpose() * dy;
    for (std::size_t l = L; l-- > 0;) {
      if (carry[l].size() == 0) carry[l] = Mat::Zero(H, B);
      const Mat dh = dh_in + carry[l];
      const auto z = st.z[l].array();
      const auto r = st.r[l].array();
      const auto n = st.n[l].array();
      const auto h = st.h[l].array();
      const Mat dn = dh.array() * (1.0 - z);
      const Mat dz = dh.array() * (h - n);
      Mat da(3 * H, B), du(3 * H, B);
      const Mat dan = dn.array() * (1.0 - n.square());
      da.topRows(H) = dz.array() * z * (1.0 - z);
      da.middleRows(H, H) = (dan.array() * st.un[l].array()) * r * (1.0 - r);
      da.bottomRows(H) = dan;
      du.topRows(H) = da.topRows(H);
      du.middleRows(H, H) = da.middleRows(H, H);
      du.bottomRows(H) = dan.array() * r;
      net.wmat(grad, l).noalias() += da * st.x[l].transpose();
      net.umat(grad, l).noalias() += du * st.h[l].transpose();
      net.bvec(grad, l) += da.rowwise().sum();
      carry[l] = (dh.array() * z).matrix();
      carry[l].noalias() += net.umat(net.params, l).transpose() * du;
      if (l > 0) dh_in = net.wmat(net.params, l).transpose() * da;
    }
  }
}

// ---------------------------------------------------------------------------
// Categorical heads

/// Log-softmax of one head's logits (log-sum-exp form).
inline Vec log_softmax(const Eigen::Ref<const Vec>& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return (logits.array() - lse).matrix();
}

inline Vec softmax(const Eigen::Ref<const Vec>& logits) { return log_softmax(logits).array().exp().matrix(); }

/// Draws an index with probability softmax(logits).
inline int categorical_sample(const Eigen::Ref<const Vec>& logits, Rng& rng) {
  const Vec p = softmax(logits);
  const double u = uniform01(rng);
  double acc = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    acc += p[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(p.size() - 1);
}

inline int categorical_argmax(const Eigen::Ref<const Vec>& logits) {
  Eigen::Index k = 0;
  logits.maxCoeff(&k);
  return static_cast<int>(k);
}

inline double categorical_log_prob(const Eigen::Ref<const Vec>& logits, int index) {
  if (index < 0 || index >= logits.size()) throw ConfigError("categorical_log_prob: index out of range");
  return log_softmax(logits)[index];
}

inline double categorical_entropy(const Eigen::Ref<const Vec>& logits) {
  const Vec lp = log_softmax(logits);
  return std::max(0.0, -(lp.array().exp() * lp.array()).sum());
}

/// Splits a stacked output column into per-head segments.
inline std::vector<Eigen::Index> head_offsets(const NetSpec& spec) {
  std::vector<Eigen::Index> off;
  Eigen::Index o = 0;
  for (int h : spec.heads) {
    off.push_back(o);
    o += h;
  }
  return off;
}

/// Joint log-probability of one action per head (sum over heads).
inline double joint_log_prob(const NetSpec& spec, const Eigen::Ref<const Vec>& logits, const std::vector<int>& action) {
  if (action.size() != spec.heads.size()) throw ConfigError("joint_log_prob: action has wrong number of heads");
  const auto off = head_offsets(spec);
  double lp = 0.0;
  for (std::size_t k = 0; k < action.size(); ++k) {
    lp += categorical_log_prob(logits.segment(off[k], spec.heads[k]), action[k]);
  }
  return lp;
}

inline double joint_entropy(const NetSpec& spec, const Eigen::Ref<const Vec>& logits) {
  const auto off = head_offsets(spec);
  double s = 0.0;
  for (std::size_t k = 0; k < spec.heads.size(); ++k) s += categorical_entropy(logits.segment(off[k], spec.heads[k]));
  return s;
}

// ---------------------------------------------------------------------------
// Single-sequence conveniences

struct PolicyOutput {
  std::vector<Vec> logits;  // per step, all heads stacked
  Hidden hidden;
};

inline PolicyOutput forward_policy(const Net& net, const std::vector<Vec>& obs, const Hidden& h0) {
  std::vector<Mat> in;
  for (const auto& o : obs) in.emplace_back(o);
  ForwardResult r = forward(net, in, h0);
  PolicyOutput out;
  for (auto& y : r.outputs) out.logits.emplace_back(y.col(0));
  out.hidden = std::move(r.hidden);
  return out;
}

struct ValueOutput {
  std::vector<double> values;
  Hidden hidden;
};

inline ValueOutput forward_value(const Net& net, const std::vector<Vec>& obs, const Hidden& h0) {
  if (net.spec().outputs() != 1) throw ConfigError("forward_value: net has more than one output");
  std::vector<Mat> in;
  for (const auto& o : obs) in.emplace_back(o);
  ForwardResult r = forward(net, in, h0);
  ValueOutput out;
  for (auto& y : r.outputs) out.values.push_back(y(0, 0));
  out.hidden = std::move(r.hidden);
  return out;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  Vec m, v;
  long long t = 0;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam step on `params` (descending `grads`).
inline void adam_step(Vec& params, const Vec& grads, AdamState& st, double lr, const AdamConfig& c = {}) {
  if (grads.size() != params.size()) throw ConfigError("adam_step: gradient length mismatch");
  if (st.m.size() == 0) {
    st.m = Vec::Zero(params.size());
    st.v = Vec::Zero(params.size());
  }
  if (st.m.size() != params.size()) throw ConfigError("adam_step: optimizer state length mismatch");
  ++st.t;
  st.m = c.beta1 * st.m + (1.0 - c.beta1) * grads;
  st.v = c.beta2 * st.v + (1.0 - c.beta2) * grads.cwiseProduct(grads);
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.t));
  params.array() -= lr * (st.m.array() / bc1) / ((st.v.array() / bc2).sqrt() + c.eps);
}

// ---------------------------------------------------------------------------
// Finite differences

/// Loss over a forward pass; when `d_out` is non-null it also receives the
/// loss gradient with respect to each step's outputs.
using SequenceLoss = std::function<double(const std::vector<Mat>& outputs, std::vector<Mat>* d_out)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  Eigen::Index worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares backward() with five-point central differences on every parameter.
inline GradCheckReport finite_diff_check(Net net, const std::vector<Mat>& inputs, const Hidden& h0,
                                         const SequenceLoss& loss, double h = 1e-3) {
  Tape tape;
  auto fr = forward(net, inputs, h0, &tape);
  std::vector<Mat> d_out;
  loss(fr.outputs, &d_out);
  Vec g = Vec::Zero(net.size());
  backward(net, tape, d_out, g);
  GradCheckReport rep;
  for (Eigen::Index i = 0; i < net.size(); ++i) {
    const double keep = net.params[i];
    auto at = [&](double dx) {
      net.params[i] = keep + dx;
      return loss(forward(net, inputs, h0).outputs, nullptr);
    };
    const double num = (at(-2 * h) - 8 * at(-h) + 8 * at(h) - at(2 * h)) / (12 * h);
    net.params[i] = keep;
    const double denom = std::max({std::abs(num), std::abs(g[i]), 1e-6});
    const double rel = std::abs(num - g[i]) / denom;
    if (rel > rep.max_rel_error || rep.worst_index < 0) {
      rep.max_rel_error = std::max(rep.max_rel_error, rel);
      rep.worst_index = i;
      rep.analytic = g[i];
      rep.numeric = num;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Serialization
//
// Text format, one item per line:
//   nrumac-net 1
//   input <n> hidden <h> layers <l>
//   heads <k> <size_1> ... <size_k>
//   params <count>
//   <value>            (count lines, hexadecimal floating point)

namespace detail {
inline std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ConfigError("cannot parse number '" + s + "'");
  return v;
}

inline void expect_word(std::istream& in, const char* word) {
  std::string w;
  if (!(in >> w) || w != word) throw ConfigError(std::string("net file: expected '") + word + "'");
}

inline void write_vec(std::ostream& out, const char* tag, const Vec& v) {
  out << tag << ' ' << v.size() << '\n';
  for (Eigen::Index i = 0; i < v.size(); ++i) out << hexfloat(v[i]) << '\n';
}

inline Vec read_vec(std::istream& in, const char* tag) {
  expect_word(in, tag);
  long long n = -1;
  if (!(in >> n) || n < 0) throw ConfigError(std::string("net file: bad ") + tag + " count");
  Vec v(n);
  std::string tok;
  for (long long i = 0; i < n; ++i) {
    if (!(in >> tok)) throw ConfigError("net file: truncated vector");
    v[i] = parse_double(tok);
  }
  return v;
}
}  // namespace detail

inline void save_net(std::ostream& out, const Net& net) {
  const NetSpec& s = net.spec();
  out << "nrumac-net 1\n";
  out << "input " << s.input << " hidden " << s.hidden << " layers " << s.layers << '\n';
  out << "heads " << s.heads.size();
  for (int h : s.heads) out << ' ' << h;
  out << '\n';
  detail::write_vec(out, "params", net.params);
}

inline Net load_net(std::istream& in) {
  detail::expect_word(in, "nrumac-net");
  int version = 0;
  if (!(in >> version) || version != 1) throw ConfigError("net file: unsupported version");
  NetSpec s;
  detail::expect_word(in, "input");
  in >> s.input;
  detail::expect_word(in, "hidden");
  in >> s.hidden;
  detail::expect_word(in, "layers");
  in >> s.layers;
  detail::expect_word(in, "heads");
  std::size_t k = 0;
  in >> k;
  s.heads.assign(k, 0);
  for (auto& h : s.heads) in >> h;
  if (!in) throw ConfigError("net file: malformed header");
  Net net(s);
  Vec p = detail::read_vec(in, "params");
  if (p.size() != net.size()) throw ConfigError("net file: parameter count does not match the layer spec");
  if (!p.allFinite()) throw ConfigError("net file: non-finite parameter");
  net.params = std::move(p);
  return net;
}

inline void save_adam(std::ostream& out, const AdamState& st) {
  out << "adam " << st.t << '\n';
  detail::write_vec(out, "m", st.m);
  detail::write_vec(out, "v", st.v);
}

inline AdamState load_adam(std::istream& in) {
  AdamState st;
  detail::expect_word(in, "adam");
  if (!(in >> st.t)) throw ConfigError("optimizer state: bad step count");
  st.m = detail::read_vec(in, "m");
  st.v = detail::read_vec(in, "v");
  return st;
}

}  // namespace nrumac
