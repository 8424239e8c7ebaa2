#pragma once

// Event-driven multi-node channel simulation.
//
// Between two consecutive events the set of active transmitters is constant,
// so every node's sensing result is constant too; the engine jumps from event
// to event and applies whole idle/busy intervals to each LBT machine. Events
// are grant ends, contention completions (defer or backoff running out on an
// idle medium) and arrivals into empty queues.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "nrumac/error.hpp"
#include "nrumac/lbt.hpp"
#include "nrumac/radio.hpp"
#include "nrumac/rng.hpp"
#include "nrumac/traffic.hpp"

namespace nrumac {

struct NodeSetup {
  NodePosition position;
  std::vector<NodePosition> ues;  // at least one
  MacConfig mac;
  int d_slots = 3;
  std::uint64_t backoff_seed = 0;
};

struct TxEvent {
  enum Kind { tx_start, tx_end };
  TimeUs time_us = 0;
  int node = 0;
  Kind kind = tx_start;

  friend bool operator==(const TxEvent&, const TxEvent&) = default;
};

struct GrantRecord {
  int node = 0;
  TimeUs start_us = 0;
  TimeUs end_us = 0;
  TimeUs mcot_us = 0;
  int mcs = 0;
  double worst_sinr_db = 0.0;
  bool success = false;
  int packets = 0;
};

/// Per-node accumulators since the last take_counters().
struct NodeCounters {
  TimeUs own_air_us = 0;
  TimeUs foreign_busy_us = 0;
  double interference_mw_us = 0.0;  // foreign power at the gNB integrated over time
  std::vector<Packet> delivered;
  double delivered_bits = 0.0;
  long long arrivals = 0;
  int tx_attempts = 0;
  int tx_failures = 0;
};

class ChannelSim {
 public:
  ChannelSim(const RadioConfig& radio, const LbtConfig& lbt, std::span<const NodeSetup> nodes)
      : radio_(radio), lbt_(lbt), noise_dbm_(noise_floor_dbm(radio)) {
    radio_.validate();
    lbt_.validate();
    nodes_.reserve(nodes.size());
    for (const auto& setup : nodes) {
      if (setup.ues.empty()) throw ConfigError("every node needs at least one UE");
      setup.mac.validate();
      Node n;
      n.position = setup.position;
      n.ues = setup.ues;
      n.mac = setup.mac;
      n.d_slots = setup.d_slots;
      n.params = params_for(setup.mac, setup.d_slots);
      n.lbt = initial_lbt_state(n.params);
      n.rng = Rng(setup.backoff_seed);
      n.tx_power_dbm = setup.mac.tx_power_dbm;
      nodes_.push_back(std::move(n));
    }
    for (auto& n : nodes_) {
      n.sinr_estimate_db = link_snr_db(n, 0);
      n.last_mcs = n.mac.mcs.value_or(select_mcs_auto(n.sinr_estimate_db, radio_.capture_margin_db));
    }
    counters_.resize(nodes_.size());
    refresh_gains();
  }

  std::size_t size() const { return nodes_.size(); }
  TimeUs now() const { return now_; }
  const RadioConfig& radio() const { return radio_; }

  const MacConfig& mac(int node) const { return at(node).mac; }
  const LbtState& lbt_state(int node) const { return at(node).lbt; }
  const LbtParams& lbt_params(int node) const { return at(node).params; }
  const NodePosition& position(int node) const { return at(node).position; }
  std::span<const NodePosition> ues(int node) const { return at(node).ues; }
  std::size_t queue_length(int node) const { return at(node).queue.size(); }
  std::size_t pending_arrivals(int node) const { return at(node).pending.size(); }
  int last_mcs(int node) const { return at(node).last_mcs; }

  /// Takes effect for the next contention; an ongoing grant keeps its end.
  void set_mac(int node, const MacConfig& mac, int d_slots) {
    mac.validate();
    Node& n = at(node);
    const LbtParams p = params_for(mac, d_slots);
    lbt_reconfigure(n.lbt, n.params, p);
    n.params = p;
    n.mac = mac;
    n.d_slots = d_slots;
    if (mac.mcs) n.last_mcs = *mac.mcs;
    if (!transmitting(n)) {
      n.tx_power_dbm = mac.tx_power_dbm;
      refresh_gains();
    }
  }

  /// Packets must not arrive before the current time.
  void add_arrivals(int node, std::span<const Packet> packets) {
    Node& n = at(node);
    for (const auto& p : packets) {
      if (arrival_us(p) < now_) throw InvariantError("add_arrivals: packet arrives in the past");
      n.pending.push_back(p);
    }
    std::stable_sort(n.pending.begin() + static_cast<std::ptrdiff_t>(n.pending_head), n.pending.end(),
                     [](const Packet& a, const Packet& b) { return a.arrival_s < b.arrival_s; });
  }

  void enable_event_log(bool on) { log_events_ = on; }
  const std::vector<TxEvent>& events() const { return events_; }
  const std::vector<GrantRecord>& grants() const { return grants_; }
  void clear_logs() {
    events_.clear();
    grants_.clear();
  }

  NodeCounters take_counters(int node) {
    NodeCounters c = std::move(counters_.at(static_cast<std::size_t>(node)));
    counters_[static_cast<std::size_t>(node)] = NodeCounters{};
    return c;
  }

  /// Processes every boundary in [now, t_end) and leaves the clock at t_end.
  void run_until(TimeUs t_end) {
    while (now_ < t_end) {
      if (!boundary_done_) {
        process_boundary(now_);
        boundary_done_ = true;
      }
      const TimeUs next = std::min(next_event_time(), t_end);
      advance_interval(now_, next);
      now_ = next;
      boundary_done_ = false;
    }
    // Packets that arrived before t_end into non-empty queues (empty queues
    // already had an event for them); they change nothing but counters.
    enqueue_arrivals(t_end - 1);
  }

  /// Received power at node `to` (its gNB position) from node `from` at
  /// `from`'s configured power.
  double rx_dbm(int from, int to) const {
    return rx_power_dbm(radio_, at(from).mac.tx_power_dbm, at(from).position, at(to).position);
  }

  /// Number of other nodes whose configured power reaches `node` above the
  /// given energy-detection threshold.
  int visible_nodes(int node, double ed_threshold_dbm) const {
    int count = 0;
    for (int j = 0; j < static_cast<int>(nodes_.size()); ++j) {
      if (j != node && rx_dbm(j, node) > ed_threshold_dbm) ++count;
    }
    return count;
  }

  /// Noise-limited SNR on the link to UE `ue` of `node`.
  double link_snr_db(int node, int ue) const { return link_snr_db(at(node), ue); }

  static TimeUs arrival_us(const Packet& p) { return static_cast<TimeUs>(std::ceil(p.arrival_s * 1e6 - 1e-6)); }

 private:
  struct Node {
    NodePosition position;
    std::vector<NodePosition> ues;
    MacConfig mac;
    int d_slots = 3;
    LbtParams params;
    LbtState lbt;
    Rng rng;
    PacketQueue queue;
    std::vector<Packet> pending;  // sorted future arrivals
    std::size_t pending_head = 0;
    // current grant
    int mcs = 0;
    double rate_bps = 0.0;
    int ue = 0;
    double worst_interference_mw = 0.0;
    long long grant_count = 0;
    double sinr_estimate_db = 0.0;
    int last_mcs = 0;
    double tx_power_dbm = 23.0;  // power of the current or last grant
    TimeUs grant_mcot_us = 0;    // MCOT the current grant was started under
  };

  const Node& at(int i) const {
    if (i < 0 || static_cast<std::size_t>(i) >= nodes_.size()) throw ConfigError("node index out of range");
    return nodes_[static_cast<std::size_t>(i)];
  }
  Node& at(int i) { return const_cast<Node&>(std::as_const(*this).at(i)); }

  LbtParams params_for(const MacConfig& mac, int d_slots) const {
    LbtConfig l = lbt_;
    l.d_slots = d_slots;
    return make_lbt_params(mac, l);
  }

  double link_snr_db(const Node& n, int ue) const {
    const double s = rx_power_dbm(radio_, n.mac.tx_power_dbm, n.position, n.ues[static_cast<std::size_t>(ue)]);
    return s - noise_dbm_;
  }

  void refresh_gains() {
    const std::size_t n = nodes_.size();
    gain_mw_.assign(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        if (i == j) continue;
        gain_mw_[j * n + i] = dbm_to_mw(rx_power_dbm(radio_, nodes_[j].tx_power_dbm, nodes_[j].position, nodes_[i].position));
      }
    }
  }

  bool transmitting(const Node& n) const { return n.lbt.phase == LbtPhase::transmitting; }

  bool contending(const Node& n) const {
    return !transmitting(n) && !n.queue.empty() && n.params.mcot_us > 0;
  }

  TimeUs next_event_time() const {
    TimeUs t = std::numeric_limits<TimeUs>::max();
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const Node& n = nodes_[i];
      if (transmitting(n)) {
        t = std::min(t, n.lbt.tx_end_us);
      } else if (contending(n)) {
        if (!sensed_busy(i)) t = std::min(t, lbt_completion_time(n.lbt, n.params, now_));
      } else if (n.pending_head < n.pending.size()) {
        t = std::min(t, std::max(arrival_us(n.pending[n.pending_head]), now_ + 1));
      }
    }
    if (t <= now_) throw InvariantError("engine: non-advancing event at t=" + std::to_string(now_));
    return t;
  }

  double foreign_power_mw(std::size_t i) const {
    const std::size_t n = nodes_.size();
    double mw = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && transmitting(nodes_[j])) mw += gain_mw_[j * n + i];
    }
    return mw;
  }

  bool sensed_busy(std::size_t i) const {
    return mw_to_dbm(foreign_power_mw(i)) > nodes_[i].mac.ed_threshold_dbm;
  }

  double interference_at_ue_mw(std::size_t i) const {
    const Node& rx = nodes_[i];
    const NodePosition& ue = rx.ues[static_cast<std::size_t>(rx.ue)];
    double mw = 0.0;
    for (std::size_t j = 0; j < nodes_.size(); ++j) {
      if (j == i || !transmitting(nodes_[j])) continue;
      mw += dbm_to_mw(rx_power_dbm(radio_, nodes_[j].tx_power_dbm, nodes_[j].position, ue));
    }
    return mw;
  }

  void advance_interval(TimeUs a, TimeUs b) {
    const TimeUs dt = b - a;
    if (dt <= 0) return;
    // Sensing results for the whole interval, before any state changes.
    std::vector<char> busy(nodes_.size());
    std::vector<double> foreign(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      foreign[i] = foreign_power_mw(i);
      busy[i] = mw_to_dbm(foreign[i]) > nodes_[i].mac.ed_threshold_dbm;
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      Node& n = nodes_[i];
      NodeCounters& c = counters_[i];
      c.interference_mw_us += foreign[i] * static_cast<double>(dt);
      if (busy[i]) c.foreign_busy_us += dt;
      if (transmitting(n)) {
        c.own_air_us += dt;
        n.worst_interference_mw = std::max(n.worst_interference_mw, interference_at_ue_mw(i));
      } else if (contending(n)) {
        if (busy[i]) {
          lbt_busy(n.lbt, n.params);
        } else {
          lbt_idle(n.lbt, n.params, dt);
        }
      }
    }
  }

  void process_boundary(TimeUs t) {
    // 1. grants ending now
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      Node& n = nodes_[i];
      if (!transmitting(n)) continue;
      if (n.lbt.tx_end_us < t) throw InvariantError("engine: missed a grant end");
      if (n.lbt.tx_end_us == t) finish_grant(i, t);
    }
    // 2. arrivals
    enqueue_arrivals(t);
    // 3. contention resolution
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      Node& n = nodes_[i];
      if (!contending(n)) {
        if (n.lbt.phase == LbtPhase::deferring) n.lbt.defer_remaining_us = n.params.defer_total_us;
        continue;
      }
      if (lbt_resolve(n.lbt, n.params, n.rng)) start_grant(i, t);
      check_lbt_invariants(n.lbt, n.params, t);
    }
  }

  void enqueue_arrivals(TimeUs t) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      Node& n = nodes_[i];
      while (n.pending_head < n.pending.size() && arrival_us(n.pending[n.pending_head]) <= t) {
        n.queue.push_back(n.pending[n.pending_head++]);
        ++counters_[i].arrivals;
      }
      if (n.pending_head == n.pending.size()) {
        n.pending.clear();
        n.pending_head = 0;
      }
    }
  }

  void start_grant(std::size_t i, TimeUs t) {
    Node& n = nodes_[i];
    if (n.tx_power_dbm != n.mac.tx_power_dbm) {
      n.tx_power_dbm = n.mac.tx_power_dbm;
      refresh_gains();
    }
    n.ue = static_cast<int>(n.grant_count % static_cast<long long>(n.ues.size()));
    ++n.grant_count;
    n.mcs = n.mac.mcs.value_or(select_mcs_auto(n.sinr_estimate_db, radio_.capture_margin_db));
    n.last_mcs = n.mcs;
    n.rate_bps = phy_rate_bps(n.mcs, radio_.bandwidth_hz);
    double bits = 0.0;
    for (const auto& p : n.queue) bits += p.size_bits;
    const TimeUs grant = tx_grant_duration_us(bits, n.rate_bps, n.mac.mcot_ms);
    lbt_start_tx(n.lbt, n.params, t, grant);
    n.grant_mcot_us = n.params.mcot_us;
    n.worst_interference_mw = 0.0;
    ++counters_[i].tx_attempts;
    if (log_events_) events_.push_back({t, static_cast<int>(i), TxEvent::tx_start});
  }

  void finish_grant(std::size_t i, TimeUs t) {
    Node& n = nodes_[i];
    const NodePosition& ue = n.ues[static_cast<std::size_t>(n.ue)];
    const double signal = rx_power_dbm(radio_, n.tx_power_dbm, n.position, ue);
    const double noise_plus_i = dbm_to_mw(noise_dbm_) + n.worst_interference_mw;
    const double worst_sinr = signal - mw_to_dbm(noise_plus_i);
    const bool ok = tx_success(worst_sinr, n.mcs, radio_.capture_margin_db);
    const TimeUs start = n.lbt.tx_start_us;
    NodeCounters& c = counters_[i];
    DrainResult r = drain_queue(n.queue, static_cast<double>(t - start), n.rate_bps, ok, static_cast<double>(start) * 1e-6);
    for (auto& p : r.delivered) {
      c.delivered_bits += p.size_bits;
      c.delivered.push_back(p);
    }
    if (!ok) ++c.tx_failures;
    if (log_events_) {
      events_.push_back({t, static_cast<int>(i), TxEvent::tx_end});
      grants_.push_back({static_cast<int>(i), start, t, n.grant_mcot_us, n.mcs, worst_sinr, ok,
                         static_cast<int>(r.delivered.size())});
    }
    n.sinr_estimate_db = worst_sinr;
    lbt_finish_tx(n.lbt, n.params, ok ? TxOutcome::success : TxOutcome::failure);
  }

  RadioConfig radio_;
  LbtConfig lbt_;
  double noise_dbm_;
  std::vector<Node> nodes_;
  std::vector<double> gain_mw_;  // [from * n + to]
  std::vector<NodeCounters> counters_;
  TimeUs now_ = 0;
  bool boundary_done_ = false;
  bool log_events_ = false;
  std::vector<TxEvent> events_;
  std::vector<GrantRecord> grants_;
};

}  // namespace nrumac
