#pragma once

// Multi-agent environment: one agent per gNB, one decision every step_s.

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nrumac/engine.hpp"
#include "nrumac/error.hpp"
#include "nrumac/lbt.hpp"
#include "nrumac/radio.hpp"
#include "nrumac/rng.hpp"
#include "nrumac/scenario.hpp"
#include "nrumac/traffic.hpp"

namespace nrumac {

// ---------------------------------------------------------------------------
// Actions

inline constexpr int kActionDims = 8;
/// Choices per action dimension: slot, backoff type, CW_min, MCOT, MCS,
/// defer, ED threshold, Tx power.
inline constexpr std::array<int, kActionDims> kActionSizes = {21, 4, 64, 11, 29, 21, 31, 21};
inline constexpr std::array<const char*, kActionDims> kActionNames = {
    "sensing_slot_us", "backoff_type", "cw_min", "mcot_ms", "mcs", "defer_us", "ed_threshold_dbm", "tx_power_dbm"};

using ActionTuple = std::array<int, kActionDims>;

inline MacConfig decode_action(const ActionTuple& a) {
  for (int k = 0; k < kActionDims; ++k) {
    if (a[k] < 0 || a[k] >= kActionSizes[k]) {
      throw ConfigError(std::string("action dimension ") + kActionNames[k] + " index " + std::to_string(a[k]) +
                        " outside [0, " + std::to_string(kActionSizes[k] - 1) + "]");
    }
  }
  static constexpr std::array<BackoffType, 4> kBackoff = {BackoffType::off, BackoffType::edid, BackoffType::beb,
                                                          BackoffType::constant};
  MacConfig m;
  m.sensing_slot_us = a[0];
  m.backoff = kBackoff[static_cast<std::size_t>(a[1])];
  m.cw_min = a[2];
  m.mcot_ms = a[3];
  m.mcs = a[4];
  m.defer_us = a[5];
  m.ed_threshold_dbm = -90.0 + a[6];
  m.tx_power_dbm = 10.0 + a[7];
  return m;
}

/// Inverse of decode_action; an auto MCS is reported as `mcs_in_use`.
inline ActionTuple encode_action(const MacConfig& m, int mcs_in_use) {
  return {m.sensing_slot_us,
          static_cast<int>(m.backoff),
          m.cw_min,
          m.mcot_ms,
          m.mcs.value_or(mcs_in_use),
          m.defer_us,
          static_cast<int>(std::lround(m.ed_threshold_dbm + 90.0)),
          static_cast<int>(std::lround(m.tx_power_dbm - 10.0))};
}

/// Standard NR-U settings. MCOT follows the traffic class: 8 ms for
/// best-effort Poisson, 5 ms for AR/VR.
inline MacConfig standard_mac_config(TrafficKind kind) {
  MacConfig m;
  m.sensing_slot_us = 9;
  m.backoff = BackoffType::beb;
  m.cw_min = 15;
  m.mcot_ms = kind == TrafficKind::arvr ? 5 : 8;
  m.mcs = std::nullopt;
  m.defer_us = 16;
  m.ed_threshold_dbm = -62.0;
  m.tx_power_dbm = 23.0;
  return m;
}

// ---------------------------------------------------------------------------
// Observations, metrics, reward

struct Observation {
  ActionTuple current_action{};
  int nn_visible = 0;
  double rssi_c_dbm = kSilentDbm;
  double rssi_i_dbm = kSilentDbm;
  double throughput_bps = 0.0;
  double traffic_rate_pps = 0.0;
  double delay_s = 0.0;
  double foreign_airtime_frac = 0.0;
};

inline constexpr int kObsDim = kActionDims + 7;

inline double map_dbm(double dbm) { return std::clamp((dbm + 110.0) / 90.0, -1.0, 1.0); }

/// Fixed-bound scaling of an observation into the policy input.
inline std::array<double, kObsDim> obs_features(const Observation& o) {
  std::array<double, kObsDim> f{};
  for (int k = 0; k < kActionDims; ++k) {
    f[k] = static_cast<double>(o.current_action[k]) / (kActionSizes[k] - 1);
  }
  f[8] = o.nn_visible / static_cast<double>(kMaxGnbs - 1);
  f[9] = map_dbm(o.rssi_c_dbm);
  f[10] = map_dbm(o.rssi_i_dbm);
  f[11] = o.throughput_bps / (kMaxLambdaPps * kPacketBits);
  f[12] = o.traffic_rate_pps / kMaxLambdaPps;
  f[13] = o.delay_s / (o.delay_s + 0.01);
  f[14] = o.foreign_airtime_frac;
  return f;
}

struct NodeStepMetrics {
  double throughput_bps = 0.0;
  double mean_delay_s = 0.0;
  bool delay_defined = false;
  double delay_sum_s = 0.0;
  long long delivered_packets = 0;
  double delivered_bits = 0.0;
  long long arrivals = 0;
  std::size_t queue_length = 0;
  double own_airtime_frac = 0.0;
  double foreign_airtime_frac = 0.0;
  double rssi_i_dbm = kSilentDbm;
  int tx_attempts = 0;
  int tx_failures = 0;
};

struct StepMetrics {
  std::vector<NodeStepMetrics> nodes;
  std::vector<GrantRecord> grants;
};

/// value / (value + sum of neighbours); 0 when everything is zero.
inline double normalize_in_range(double value, std::span<const double> neighbors) {
  const double denom = value + std::accumulate(neighbors.begin(), neighbors.end(), 0.0);
  return denom > 0 ? value / denom : 0.0;
}

/// Normalized throughput over normalized demand, minus alpha times the
/// normalized own airtime. The ratio is 0 when there is no demand.
inline double reward_from_normalized(double th, double lambda, double air, double alpha) {
  const double ratio = lambda > 0 ? th / lambda : 0.0;
  return ratio - alpha * air;
}

/// Reward of `node`, normalizing each quantity over the node itself and the
/// gNBs in `sensing_range`.
inline double compute_reward(int node, const StepMetrics& m, std::span<const int> sensing_range,
                             std::span<const double> lambdas, double alpha) {
  std::vector<double> th, lam, air;
  for (int j : sensing_range) {
    th.push_back(m.nodes.at(static_cast<std::size_t>(j)).throughput_bps);
    lam.push_back(lambdas[static_cast<std::size_t>(j)]);
    air.push_back(m.nodes[static_cast<std::size_t>(j)].own_airtime_frac);
  }
  const auto& self = m.nodes.at(static_cast<std::size_t>(node));
  return reward_from_normalized(normalize_in_range(self.throughput_bps, th),
                                normalize_in_range(lambdas[static_cast<std::size_t>(node)], lam),
                                normalize_in_range(self.own_airtime_frac, air), alpha);
}

/// Mean over all steps and gNBs of the per-step throughput; trace[t][j].
inline double objective_mean_throughput(const std::vector<std::vector<double>>& trace) {
  if (trace.empty()) throw ConfigError("objective_mean_throughput: empty trace");
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& step : trace) {
    for (double v : step) {
      sum += v;
      ++n;
    }
  }
  if (n == 0) throw ConfigError("objective_mean_throughput: empty trace");
  return sum / static_cast<double>(n);
}

struct StepResult {
  std::vector<Observation> observations;
  std::vector<double> rewards;
  StepMetrics metrics;
  bool done = false;
};

// ---------------------------------------------------------------------------

class Env {
 public:
  std::vector<Observation> reset(const ScenarioConfig& scenario, std::uint64_t seed) {
    scenario.validate();
    scenario_ = scenario;
    deployment_ = make_deployment(scenario);
    const int n = scenario.num_gnbs;
    std::vector<NodeSetup> setups;
    for (int i = 0; i < n; ++i) {
      NodeSetup s;
      s.position = deployment_.gnbs[static_cast<std::size_t>(i)];
      s.ues = deployment_.ues[static_cast<std::size_t>(i)];
      s.mac = standard_mac_config(scenario.traffic.kind);
      s.d_slots = scenario.lbt.d_slots;
      s.backoff_seed = derive_seed(seed, static_cast<std::uint64_t>(Stream::backoff), static_cast<std::uint64_t>(i));
      setups.push_back(std::move(s));
    }
    sim_ = std::make_unique<ChannelSim>(scenario.radio, scenario.lbt, setups);
    sim_->enable_event_log(true);
    traffic_rng_.clear();
    lambdas_.clear();
    for (int i = 0; i < n; ++i) {
      traffic_rng_.push_back(make_rng(seed, Stream::traffic, static_cast<std::uint64_t>(i)));
      lambdas_.push_back(deployment_.traffic[static_cast<std::size_t>(i)].offered_pps());
      if (scenario.initial_backlog_packets > 0) {
        std::vector<Packet> backlog(static_cast<std::size_t>(scenario.initial_backlog_packets), Packet{});
        sim_->add_arrivals(i, backlog);
      }
    }
    step_index_ = 0;
    done_ = false;
    StepMetrics zero;
    zero.nodes.resize(static_cast<std::size_t>(n));
    last_metrics_ = zero;
    observations_ = build_observations(zero);
    return observations_;
  }

  int num_agents() const { return scenario_.num_gnbs; }
  int step_index() const { return step_index_; }
  int num_steps() const { return scenario_.num_steps(); }
  bool done() const { return done_; }
  const ScenarioConfig& scenario() const { return scenario_; }
  const Deployment& deployment() const { return deployment_; }
  const ChannelSim& sim() const { return require_sim(); }
  const std::vector<Observation>& observations() const { return observations_; }
  std::span<const double> lambdas() const { return lambdas_; }

  /// Applies one action per agent, then simulates one step.
  StepResult step(std::span<const ActionTuple> actions) {
    require_running();
    if (static_cast<int>(actions.size()) != num_agents()) {
      throw ConfigError("step: expected " + std::to_string(num_agents()) + " actions, got " +
                        std::to_string(actions.size()));
    }
    for (int i = 0; i < num_agents(); ++i) {
      sim_->set_mac(i, decode_action(actions[static_cast<std::size_t>(i)]), 0);
    }
    return advance();
  }

  /// Simulates one step with every node keeping its current configuration.
  StepResult step_keep() {
    require_running();
    return advance();
  }

  /// Installs a configuration outside the action space (e.g. auto MCS).
  void set_mac(int node, const MacConfig& mac, int d_slots) { sim_->set_mac(node, mac, d_slots); }

  int visible_nodes(int node, double ed_threshold_dbm) const {
    return require_sim().visible_nodes(node, ed_threshold_dbm);
  }

  /// gNBs visible at `node`'s current ED threshold.
  std::vector<int> sensing_range(int node) const {
    const ChannelSim& s = require_sim();
    std::vector<int> out;
    for (int j = 0; j < num_agents(); ++j) {
      if (j != node && s.rx_dbm(j, node) > s.mac(node).ed_threshold_dbm) out.push_back(j);
    }
    return out;
  }

 private:
  const ChannelSim& require_sim() const {
    if (!sim_) throw StateError("environment used before reset");
    return *sim_;
  }

  void require_running() const {
    require_sim();
    if (done_) throw StateError("step called on a finished episode; call reset first");
  }

  StepResult advance() {
    const TimeUs step_us = scenario_.step_us();
    const TimeUs t0 = static_cast<TimeUs>(step_index_) * step_us;
    const TimeUs t1 = t0 + step_us;
    for (int i = 0; i < num_agents(); ++i) {
      const TrafficSpec& spec = deployment_.traffic[static_cast<std::size_t>(i)];
      if (spec.kind == TrafficKind::arvr && spec.fps <= 0) continue;
      auto packets = generate_arrivals(spec, static_cast<double>(t0) * 1e-6, static_cast<double>(t1) * 1e-6,
                                       traffic_rng_[static_cast<std::size_t>(i)]);
      sim_->add_arrivals(i, packets);
    }
    sim_->clear_logs();
    sim_->run_until(t1);

    StepResult r;
    r.metrics.grants = sim_->grants();
    const double step_s = static_cast<double>(step_us) * 1e-6;
    for (int i = 0; i < num_agents(); ++i) {
      NodeCounters c = sim_->take_counters(i);
      NodeStepMetrics m;
      m.delivered_bits = c.delivered_bits;
      m.throughput_bps = c.delivered_bits / step_s;
      const DelayStat d = mean_delay_s(c.delivered);
      m.mean_delay_s = d.mean_s;
      m.delay_defined = d.defined;
      m.delivered_packets = static_cast<long long>(c.delivered.size());
      m.delay_sum_s = d.mean_s * static_cast<double>(m.delivered_packets);
      m.arrivals = c.arrivals;
      m.queue_length = sim_->queue_length(i);
      m.own_airtime_frac = static_cast<double>(c.own_air_us) / static_cast<double>(step_us);
      m.foreign_airtime_frac = static_cast<double>(c.foreign_busy_us) / static_cast<double>(step_us);
      m.rssi_i_dbm = mw_to_dbm(c.interference_mw_us / static_cast<double>(step_us));
      m.tx_attempts = c.tx_attempts;
      m.tx_failures = c.tx_failures;
      r.metrics.nodes.push_back(m);
    }
    for (int i = 0; i < num_agents(); ++i) {
      const auto range = sensing_range(i);
      r.rewards.push_back(compute_reward(i, r.metrics, range, lambdas_, scenario_.alpha));
    }
    ++step_index_;
    done_ = step_index_ >= num_steps();
    r.done = done_;
    last_metrics_ = r.metrics;
    observations_ = build_observations(r.metrics);
    r.observations = observations_;
    return r;
  }

  std::vector<Observation> build_observations(const StepMetrics& m) const {
    std::vector<Observation> obs;
    const ChannelSim& s = *sim_;
    for (int i = 0; i < num_agents(); ++i) {
      Observation o;
      const MacConfig& mac = s.mac(i);
      o.current_action = encode_action(mac, s.last_mcs(i));
      o.nn_visible = s.visible_nodes(i, mac.ed_threshold_dbm);
      double mw = 0.0;
      for (const auto& ue : s.ues(i)) mw += dbm_to_mw(rx_power_dbm(s.radio(), mac.tx_power_dbm, s.position(i), ue));
      o.rssi_c_dbm = mw_to_dbm(mw / static_cast<double>(s.ues(i).size()));
      const auto& nm = m.nodes[static_cast<std::size_t>(i)];
      o.rssi_i_dbm = nm.rssi_i_dbm;
      o.throughput_bps = nm.throughput_bps;
      o.traffic_rate_pps = lambdas_[static_cast<std::size_t>(i)];
      o.delay_s = nm.delay_defined ? nm.mean_delay_s : 0.0;
      o.foreign_airtime_frac = nm.foreign_airtime_frac;
      obs.push_back(o);
    }
    return obs;
  }

  ScenarioConfig scenario_;
  Deployment deployment_;
  std::unique_ptr<ChannelSim> sim_;
  std::vector<Rng> traffic_rng_;
  std::vector<double> lambdas_;
  int step_index_ = 0;
  bool done_ = false;
  StepMetrics last_metrics_;
  std::vector<Observation> observations_;
};

}  // namespace nrumac
