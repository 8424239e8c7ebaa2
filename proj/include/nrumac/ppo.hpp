#pragma once

// PPO with a recurrent actor and a separate recurrent critic, plus the two
// training modes: one independent learner per gNB (dtde) or one joint
// learner over all gNBs (ctce).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "nrumac/env.hpp"
#include "nrumac/error.hpp"
#include "nrumac/nn.hpp"
#include "nrumac/rng.hpp"

namespace nrumac {

struct PpoConfig {
  double gamma = 0.99;
  double clip_epsilon = 0.2;
  double entropy_coeff = 0.01;
  int minibatch_size = 1000;
  int epochs = 4;
  double lr = 1e-3;
  int iterations = 10;
  int hidden = 256;
  int layers = 2;
  int seq_len = 20;  // truncated-BPTT chunk length
  bool standardize_advantages = true;

  void validate() const {
    if (!(gamma > 0 && gamma <= 1)) throw ConfigError("gamma: must be in (0, 1]");
    if (!(clip_epsilon > 0 && clip_epsilon < 1)) throw ConfigError("clip_epsilon: must be in (0, 1)");
    if (!(entropy_coeff >= 0)) throw ConfigError("entropy_coeff: must be >= 0");
    if (minibatch_size < 1) throw ConfigError("minibatch_size: must be >= 1");
    if (epochs < 1) throw ConfigError("epochs: must be >= 1");
    if (!(lr > 0)) throw ConfigError("lr: must be > 0");
    if (iterations < 0) throw ConfigError("iterations: must be >= 0");
    if (hidden < 1) throw ConfigError("hidden: must be >= 1");
    if (layers < 1) throw ConfigError("layers: must be >= 1");
    if (seq_len < 1) throw ConfigError("seq_len: must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Loss arithmetic

/// Discounted return from every step to the end of the sequence.
inline std::vector<double> discounted_returns(const std::vector<double>& rewards, double gamma) {
  std::vector<double> g(rewards.size());
  double acc = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    acc = rewards[t] + gamma * acc;
    g[t] = acc;
  }
  return g;
}

/// Shifts to zero mean and, when the spread is not negligible, scales to
/// unit variance.
inline void standardize(std::vector<double>& v) {
  if (v.size() < 2) return;
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= n;
  const double sd = std::sqrt(var);
  for (double& x : v) x = sd > 1e-8 ? (x - mean) / sd : x - mean;
}

struct Advantages {
  std::vector<double> returns;
  std::vector<double> advantages;
};

inline Advantages compute_advantages(const std::vector<double>& rewards, const std::vector<double>& values, double gamma,
                                     bool standardized = false) {
  if (rewards.empty()) throw ConfigError("compute_advantages: empty input");
  if (rewards.size() != values.size()) throw ConfigError("compute_advantages: rewards and values differ in length");
  Advantages a;
  a.returns = discounted_returns(rewards, gamma);
  a.advantages.resize(rewards.size());
  for (std::size_t t = 0; t < rewards.size(); ++t) a.advantages[t] = a.returns[t] - values[t];
  if (standardized) standardize(a.advantages);
  return a;
}

inline double value_loss(const std::vector<double>& returns, const std::vector<double>& values) {
  if (returns.empty() || returns.size() != values.size()) throw ConfigError("value_loss: need equal non-empty inputs");
  double s = 0.0;
  for (std::size_t i = 0; i < returns.size(); ++i) s += (returns[i] - values[i]) * (returns[i] - values[i]);
  return s / (2.0 * static_cast<double>(returns.size()));
}

inline constexpr double kMaxRatio = 1e6;

/// exp(new - old), clamped to kMaxRatio.
inline double policy_ratio(double log_prob_new, double log_prob_old) {
  return std::exp(std::min(log_prob_new - log_prob_old, std::log(kMaxRatio)));
}

inline double clipped_term(double ratio, double advantage, double eps) {
  return -std::min(ratio * advantage, std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage);
}

/// Derivative of clipped_term with respect to the new log-probability.
inline double clipped_term_grad(double ratio, double advantage, double eps) {
  const double unclipped = ratio * advantage;
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage;
  return unclipped <= clipped ? -advantage * ratio : 0.0;
}

/// Minimized PPO objective: mean clipped term minus c times mean entropy.
inline double clipped_surrogate(const std::vector<double>& ratios, const std::vector<double>& advantages,
                                const std::vector<double>& entropies, double eps, double c) {
  if (ratios.empty() || ratios.size() != advantages.size() || ratios.size() != entropies.size()) {
    throw ConfigError("clipped_surrogate: need equal non-empty inputs");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < ratios.size(); ++i) s += clipped_term(ratios[i], advantages[i], eps) - c * entropies[i];
  return s / static_cast<double>(ratios.size());
}

// ---------------------------------------------------------------------------
// Actor and learner

struct Decision {
  std::vector<int> action;  // one index per head
  double log_prob = 0.0;
  double value = 0.0;
  Hidden policy_hidden;  // state before this step
  Hidden value_hidden;
};

/// Runs a policy net step by step, carrying its hidden state.
class Actor {
 public:
  Actor() = default;
  explicit Actor(Net policy) : policy_(std::move(policy)) { reset(); }

  void reset() { hidden_ = zero_hidden(policy_.spec()); }
  const Net& net() const { return policy_; }
  Net& net() { return policy_; }
  const Hidden& hidden() const { return hidden_; }

  /// Samples from the policy, or takes the per-head argmax when `rng` is null.
  std::vector<int> act(const Vec& obs, Rng* rng, double* log_prob = nullptr) {
    ForwardResult r = forward(policy_, {Mat(obs)}, hidden_);
    hidden_ = std::move(r.hidden);
    const Vec logits = r.outputs[0].col(0);
    const auto off = head_offsets(policy_.spec());
    std::vector<int> a;
    for (std::size_t k = 0; k < off.size(); ++k) {
      const auto seg = logits.segment(off[k], policy_.spec().heads[k]);
      a.push_back(rng ? categorical_sample(seg, *rng) : categorical_argmax(seg));
    }
    if (log_prob) *log_prob = joint_log_prob(policy_.spec(), logits, a);
    return a;
  }

 private:
  Net policy_;
  Hidden hidden_;
};

struct TrajectoryStep {
  Vec obs;
  std::vector<int> action;
  double log_prob = 0.0;
  double reward = 0.0;
  double value = 0.0;
  Hidden policy_hidden;
  Hidden value_hidden;
  bool episode_start = false;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;

  void add(const Vec& obs, Decision d, double reward, bool episode_start) {
    steps.push_back({obs, std::move(d.action), d.log_prob, reward, d.value, std::move(d.policy_hidden),
                     std::move(d.value_hidden), episode_start || steps.empty()});
  }
};

struct TrainStats {
  double mean_reward = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double first_ratio_deviation = 0.0;  // max |r - 1| on the first minibatch
  int clamped_ratios = 0;
  bool full_batch = false;  // fewer samples than one minibatch
};

class Learner {
 public:
  Learner() = default;
  Learner(int obs_dim, std::vector<int> heads, const PpoConfig& cfg, std::uint64_t seed, std::uint64_t index)
      : cfg_(cfg) {
    cfg_.validate();
    NetSpec ps{obs_dim, cfg.hidden, cfg.layers, std::move(heads)};
    NetSpec vs{obs_dim, cfg.hidden, cfg.layers, {1}};
    Net pol(ps), val(vs);
    Rng pr = make_rng(seed, Stream::policy_init, index);
    Rng vr = make_rng(seed, Stream::value_init, index);
    pol.initialize(pr, 0.01);
    val.initialize(vr, 1.0);
    actor_ = Actor(std::move(pol));
    value_ = std::move(val);
    rng_ = make_rng(seed, Stream::sampling, index);
    reset_hidden();
  }

  const PpoConfig& config() const { return cfg_; }
  const Net& policy() const { return actor_.net(); }
  const Net& value() const { return value_; }
  Net& mutable_policy() { return actor_.net(); }
  const AdamState& policy_optimizer() const { return popt_; }

  void reset_hidden() {
    actor_.reset();
    value_hidden_ = zero_hidden(value_.spec());
  }

  Decision act(const Vec& obs, bool greedy = false) {
    Decision d;
    d.policy_hidden = actor_.hidden();
    d.value_hidden = value_hidden_;
    d.action = actor_.act(obs, greedy ? nullptr : &rng_, &d.log_prob);
    ForwardResult v = forward(value_, {Mat(obs)}, value_hidden_);
    value_hidden_ = std::move(v.hidden);
    d.value = v.outputs[0](0, 0);
    return d;
  }

  TrainStats train(const Trajectory& traj) {
    const auto& S = traj.steps;
    if (S.empty()) throw ConfigError("train: empty trajectory");
    TrainStats st;
    const std::size_t T = S.size();

    // Returns and advantages per episode, standardized over the batch.
    std::vector<double> ret(T), adv(T);
    std::vector<std::size_t> starts;
    for (std::size_t t = 0; t < T; ++t) {
      if (S[t].episode_start || t == 0) starts.push_back(t);
    }
    starts.push_back(T);
    double rsum = 0.0;
    for (std::size_t e = 0; e + 1 < starts.size(); ++e) {
      std::vector<double> r, v;
      for (std::size_t t = starts[e]; t < starts[e + 1]; ++t) {
        r.push_back(S[t].reward);
        v.push_back(S[t].value);
        rsum += S[t].reward;
      }
      const Advantages a = compute_advantages(r, v, cfg_.gamma);
      std::copy(a.returns.begin(), a.returns.end(), ret.begin() + static_cast<std::ptrdiff_t>(starts[e]));
      std::copy(a.advantages.begin(), a.advantages.end(), adv.begin() + static_cast<std::ptrdiff_t>(starts[e]));
    }
    if (cfg_.standardize_advantages) standardize(adv);
    st.mean_reward = rsum / static_cast<double>(T);

    // Chunks of at most seq_len steps that never cross an episode start.
    std::vector<Chunk> chunks;
    for (std::size_t e = 0; e + 1 < starts.size(); ++e) {
      for (std::size_t b = starts[e]; b < starts[e + 1]; b += static_cast<std::size_t>(cfg_.seq_len)) {
        chunks.push_back({b, std::min(static_cast<std::size_t>(cfg_.seq_len), starts[e + 1] - b)});
      }
    }
    std::size_t per_mb = chunks.size();
    if (static_cast<int>(T) < cfg_.minibatch_size) {
      st.full_batch = true;
    } else {
      per_mb = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(
                                            static_cast<double>(cfg_.minibatch_size) / cfg_.seq_len)));
    }

    int updates = 0;
    std::vector<std::size_t> order(chunks.size());
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      std::iota(order.begin(), order.end(), 0);
      shuffle(order);
      for (std::size_t m = 0; m < order.size(); m += per_mb) {
        std::vector<Chunk> mb;
        for (std::size_t k = m; k < std::min(order.size(), m + per_mb); ++k) mb.push_back(chunks[order[k]]);
        st.value_loss += update_value(traj, mb, ret);
        PolicyPass p = update_policy(traj, mb, adv);
        st.policy_loss += p.loss;
        st.entropy += p.entropy;
        st.clamped_ratios += p.clamped;
        if (updates == 0) st.first_ratio_deviation = p.max_ratio_dev;
        ++updates;
      }
    }
    st.policy_loss /= updates;
    st.value_loss /= updates;
    st.entropy /= updates;
    return st;
  }

  void save(std::ostream& out) const {
    save_net(out, actor_.net());
    save_net(out, value_);
    save_adam(out, popt_);
    save_adam(out, vopt_);
    out << "rng " << rng_ << '\n';
  }

  void load(std::istream& in) {
    Net p = load_net(in);
    Net v = load_net(in);
    if (!(p.spec() == actor_.net().spec()) || !(v.spec() == value_.spec())) {
      throw ConfigError("checkpoint: network shape does not match the configuration");
    }
    actor_ = Actor(std::move(p));
    value_ = std::move(v);
    popt_ = load_adam(in);
    vopt_ = load_adam(in);
    detail::expect_word(in, "rng");
    in >> rng_;
    if (!in) throw ConfigError("checkpoint: bad rng state");
    reset_hidden();
  }

 private:
  struct Chunk {
    std::size_t begin = 0, len = 0;
  };

  // Fisher-Yates with the learner's own stream (std::shuffle is
  // implementation-defined).
  void shuffle(std::vector<std::size_t>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng_);
      std::swap(v[i - 1], v[j]);
    }
  }

  struct Batch {
    std::vector<Mat> inputs;
    Hidden h0;
    std::size_t samples = 0;
    std::size_t steps = 0;
  };

  Batch make_batch(const Trajectory& traj, const std::vector<Chunk>& mb, bool policy_hidden) const {
    Batch b;
    const Net& net = policy_hidden ? actor_.net() : value_;
    const int B = static_cast<int>(mb.size());
    for (const auto& c : mb) {
      b.steps = std::max(b.steps, c.len);
      b.samples += c.len;
    }
    const int in = net.spec().input;
    b.inputs.assign(b.steps, Mat::Zero(in, B));
    b.h0 = zero_hidden(net.spec(), B);
    for (int j = 0; j < B; ++j) {
      const Chunk& c = mb[static_cast<std::size_t>(j)];
      const TrajectoryStep& first = traj.steps[c.begin];
      const Hidden& h = policy_hidden ? first.policy_hidden : first.value_hidden;
      for (std::size_t l = 0; l < b.h0.size(); ++l) b.h0[l].col(j) = h[l].col(0);
      for (std::size_t t = 0; t < c.len; ++t) b.inputs[t].col(j) = traj.steps[c.begin + t].obs;
    }
    return b;
  }

  double update_value(const Trajectory& traj, const std::vector<Chunk>& mb, const std::vector<double>& ret) {
    Batch b = make_batch(traj, mb, false);
    Tape tape;
    const ForwardResult fr = forward(value_, b.inputs, b.h0, &tape);
    const double M = static_cast<double>(b.samples);
    std::vector<Mat> d(b.steps, Mat::Zero(1, static_cast<Eigen::Index>(mb.size())));
    double loss = 0.0;
    for (std::size_t j = 0; j < mb.size(); ++j) {
      for (std::size_t t = 0; t < mb[j].len; ++t) {
        const double e = fr.outputs[t](0, static_cast<Eigen::Index>(j)) - ret[mb[j].begin + t];
        loss += e * e / (2 * M);
        d[t](0, static_cast<Eigen::Index>(j)) = e / M;
      }
    }
    Vec g = Vec::Zero(value_.size());
    backward(value_, tape, d, g);
    adam_step(value_.params, g, vopt_, cfg_.lr);
    return loss;
  }

  struct PolicyPass {
    double loss = 0.0;
    double entropy = 0.0;
    double max_ratio_dev = 0.0;
    int clamped = 0;
  };

  PolicyPass update_policy(const Trajectory& traj, const std::vector<Chunk>& mb, const std::vector<double>& adv) {
    Net& net = actor_.net();
    const NetSpec& spec = net.spec();
    const auto off = head_offsets(spec);
    Batch b = make_batch(traj, mb, true);
    Tape tape;
    const ForwardResult fr = forward(net, b.inputs, b.h0, &tape);
    const double M = static_cast<double>(b.samples);
    const double c = cfg_.entropy_coeff;
    std::vector<Mat> d(b.steps, Mat::Zero(spec.outputs(), static_cast<Eigen::Index>(mb.size())));
    PolicyPass p;
    for (std::size_t j = 0; j < mb.size(); ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      for (std::size_t t = 0; t < mb[j].len; ++t) {
        const TrajectoryStep& s = traj.steps[mb[j].begin + t];
        const double A = adv[mb[j].begin + t];
        std::vector<Vec> lps, ps;
        std::vector<double> hs;
        double logp = 0.0, ent = 0.0;
        for (std::size_t k = 0; k < off.size(); ++k) {
          Vec lp = log_softmax(fr.outputs[t].col(col).segment(off[k], spec.heads[k]));
          Vec pk = lp.array().exp();
          const double hk = -(pk.array() * lp.array()).sum();
          logp += lp[s.action[k]];
          ent += hk;
          lps.push_back(std::move(lp));
          ps.push_back(std::move(pk));
          hs.push_back(hk);
        }
        if (logp - s.log_prob > std::log(kMaxRatio)) ++p.clamped;
        const double r = policy_ratio(logp, s.log_prob);
        p.max_ratio_dev = std::max(p.max_ratio_dev, std::abs(r - 1.0));
        p.loss += (clipped_term(r, A, cfg_.clip_epsilon) - c * ent) / M;
        p.entropy += ent / M;
        const double glp = clipped_term_grad(r, A, cfg_.clip_epsilon) / M;
        for (std::size_t k = 0; k < off.size(); ++k) {
          Vec g = -glp * ps[k];
          g[s.action[k]] += glp;
          g += (c / M) * (ps[k].array() * (lps[k].array() + hs[k])).matrix();
          d[t].col(col).segment(off[k], spec.heads[k]) = g;
        }
      }
    }
    Vec g = Vec::Zero(net.size());
    backward(net, tape, d, g);
    adam_step(net.params, g, popt_, cfg_.lr);
    return p;
  }

  PpoConfig cfg_;
  Actor actor_;
  Net value_;
  Hidden value_hidden_;
  AdamState popt_, vopt_;
  Rng rng_;
};

// ---------------------------------------------------------------------------
// Multi-agent orchestration

enum class Algo { dtde, ctce };

inline const char* to_string(Algo a) { return a == Algo::dtde ? "dtde" : "ctce"; }

inline Vec obs_vector(const Observation& o) {
  const auto f = obs_features(o);
  return Eigen::Map<const Vec>(f.data(), kObsDim);
}

inline std::vector<int> action_heads(int agents) {
  std::vector<int> h;
  for (int i = 0; i < agents; ++i) h.insert(h.end(), kActionSizes.begin(), kActionSizes.end());
  return h;
}

/// Maps environment observations to learner inputs and learner actions back
/// to per-gNB action tuples.
struct AgentLayout {
  Algo algo = Algo::dtde;
  int gnbs = 1;

  int learners() const { return algo == Algo::dtde ? gnbs : 1; }
  int obs_dim() const { return algo == Algo::dtde ? kObsDim : kObsDim * gnbs; }
  std::vector<int> heads() const { return action_heads(algo == Algo::dtde ? 1 : gnbs); }

  std::vector<Vec> inputs(const std::vector<Observation>& obs) const {
    if (static_cast<int>(obs.size()) != gnbs) throw ConfigError("observation count does not match the gNB count");
    std::vector<Vec> in;
    if (algo == Algo::dtde) {
      for (const auto& o : obs) in.push_back(obs_vector(o));
    } else {
      Vec all(obs_dim());
      for (int i = 0; i < gnbs; ++i) all.segment(i * kObsDim, kObsDim) = obs_vector(obs[static_cast<std::size_t>(i)]);
      in.push_back(all);
    }
    return in;
  }

  std::vector<ActionTuple> actions(const std::vector<std::vector<int>>& per_learner) const {
    std::vector<ActionTuple> out;
    for (const auto& a : per_learner) {
      for (std::size_t k = 0; k < a.size(); k += kActionDims) {
        ActionTuple t;
        std::copy_n(a.begin() + static_cast<std::ptrdiff_t>(k), kActionDims, t.begin());
        out.push_back(t);
      }
    }
    return out;
  }

  std::vector<double> rewards(const std::vector<double>& env_rewards) const {
    if (algo == Algo::dtde) return env_rewards;
    return {std::accumulate(env_rewards.begin(), env_rewards.end(), 0.0) / static_cast<double>(env_rewards.size())};
  }
};

struct CurveRow {
  int iteration = 0;
  int agent_id = 0;
  double mean_reward = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

/// Iteration-by-iteration trainer. Each iteration rolls out one episode in a
/// freshly reset environment and trains every learner on its own trajectory.
class Trainer {
 public:
  Trainer(const ScenarioConfig& scenario, const PpoConfig& cfg, Algo algo, std::uint64_t seed)
      : scenario_(scenario), cfg_(cfg), layout_{algo, scenario.num_gnbs}, seed_(seed) {
    scenario_.validate();
    cfg_.validate();
    for (int i = 0; i < layout_.learners(); ++i) {
      learners_.emplace_back(layout_.obs_dim(), layout_.heads(), cfg_, seed, static_cast<std::uint64_t>(i));
    }
  }

  int iteration() const { return iteration_; }
  const AgentLayout& layout() const { return layout_; }
  const std::vector<Learner>& learners() const { return learners_; }
  std::vector<Learner>& learners() { return learners_; }
  bool warned_full_batch() const { return warned_; }

  std::vector<CurveRow> run_iteration() {
    Env env;
    auto obs = env.reset(scenario_, derive_seed(seed_, static_cast<std::uint64_t>(Stream::episode),
                                                static_cast<std::uint64_t>(iteration_)));
    for (auto& l : learners_) l.reset_hidden();
    std::vector<Trajectory> traj(learners_.size());
    bool first = true;
    while (!env.done()) {
      const auto in = layout_.inputs(obs);
      std::vector<Decision> dec;
      std::vector<std::vector<int>> acts;
      for (std::size_t i = 0; i < learners_.size(); ++i) {
        dec.push_back(learners_[i].act(in[i]));
        acts.push_back(dec.back().action);
      }
      const StepResult r = env.step(layout_.actions(acts));
      const auto rew = layout_.rewards(r.rewards);
      for (std::size_t i = 0; i < learners_.size(); ++i) traj[i].add(in[i], std::move(dec[i]), rew[i], first);
      obs = r.observations;
      first = false;
    }
    std::vector<CurveRow> rows;
    for (std::size_t i = 0; i < learners_.size(); ++i) {
      const TrainStats s = learners_[i].train(traj[i]);
      warned_ = warned_ || s.full_batch;
      rows.push_back({iteration_, static_cast<int>(i), s.mean_reward, s.policy_loss, s.value_loss, s.entropy});
    }
    ++iteration_;
    return rows;
  }

  void save(std::ostream& out) const {
    out << "nrumac-checkpoint 1\n" << "algo " << to_string(layout_.algo) << " learners " << learners_.size()
        << " iteration " << iteration_ << '\n';
    for (const auto& l : learners_) l.save(out);
  }

  void load(std::istream& in) {
    detail::expect_word(in, "nrumac-checkpoint");
    int version = 0;
    in >> version;
    std::string algo;
    std::size_t n = 0;
    detail::expect_word(in, "algo");
    in >> algo;
    detail::expect_word(in, "learners");
    in >> n;
    detail::expect_word(in, "iteration");
    in >> iteration_;
    if (!in || version != 1) throw ConfigError("checkpoint: malformed header");
    if (algo != to_string(layout_.algo) || n != learners_.size()) {
      throw ConfigError("checkpoint: algorithm or learner count does not match");
    }
    for (auto& l : learners_) l.load(in);
  }

 private:
  ScenarioConfig scenario_;
  PpoConfig cfg_;
  AgentLayout layout_;
  std::uint64_t seed_;
  std::vector<Learner> learners_;
  int iteration_ = 0;
  bool warned_ = false;
};

struct TrainResult {
  std::vector<Learner> learners;
  std::vector<CurveRow> curve;
};

inline TrainResult run_training(const ScenarioConfig& scenario, const PpoConfig& cfg, Algo algo, std::uint64_t seed) {
  Trainer tr(scenario, cfg, algo, seed);
  TrainResult out;
  for (int k = 0; k < cfg.iterations; ++k) {
    auto rows = tr.run_iteration();
    out.curve.insert(out.curve.end(), rows.begin(), rows.end());
  }
  out.learners = tr.learners();
  return out;
}

inline TrainResult run_dtde(const ScenarioConfig& scenario, const PpoConfig& cfg, std::uint64_t seed) {
  return run_training(scenario, cfg, Algo::dtde, seed);
}

inline TrainResult run_ctce(const ScenarioConfig& scenario, const PpoConfig& cfg, std::uint64_t seed) {
  return run_training(scenario, cfg, Algo::ctce, seed);
}

/// Mean reward per iteration, averaged over learners.
inline std::vector<double> mean_reward_curve(const std::vector<CurveRow>& rows) {
  std::vector<double> sum, cnt;
  for (const auto& r : rows) {
    const auto k = static_cast<std::size_t>(r.iteration);
    if (sum.size() <= k) {
      sum.resize(k + 1, 0.0);
      cnt.resize(k + 1, 0.0);
    }
    sum[k] += r.mean_reward;
    cnt[k] += 1;
  }
  for (std::size_t k = 0; k < sum.size(); ++k) sum[k] /= std::max(cnt[k], 1.0);
  return sum;
}

}  // namespace nrumac
