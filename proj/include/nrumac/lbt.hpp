#pragma once

// Listen-before-talk channel access built from composable blocks: a defer
// period of T_f + d * slot, slotted backoff with one of four contention-window
// disciplines, and an MCOT-limited transmission grant.
//
// Time is integral microseconds. A node's state is updated at microsecond
// boundaries from what it sensed during the preceding microsecond, so two
// nodes whose counters expire at the same boundary both transmit (collision),
// while a node expiring one microsecond later senses the first and freezes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>

#include "nrumac/error.hpp"
#include "nrumac/rng.hpp"

namespace nrumac {

using TimeUs = std::int64_t;

enum class BackoffType { off, edid, beb, constant };

inline const char* to_string(BackoffType b) {
  switch (b) {
    case BackoffType::off: return "off";
    case BackoffType::edid: return "edid";
    case BackoffType::beb: return "beb";
    case BackoffType::constant: return "constant";
  }
  return "?";
}

/// One node's MAC building-block choice (actions a1..a8).
struct MacConfig {
  int sensing_slot_us = 9;                     // a1, 0..20
  BackoffType backoff = BackoffType::beb;      // a2
  int cw_min = 15;                             // a3, 0..63
  int mcot_ms = 8;                             // a4, 0..10
  std::optional<int> mcs;                      // a5, 0..28; nullopt = auto rate control
  int defer_us = 16;                           // a6, 0..20
  double ed_threshold_dbm = -62.0;             // a7, -90..-60
  double tx_power_dbm = 23.0;                  // a8, 10..30

  friend bool operator==(const MacConfig&, const MacConfig&) = default;

  void validate() const {
    auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
    if (!in(sensing_slot_us, 0, 20)) throw ConfigError("sensing_slot_us outside [0, 20]");
    if (!in(cw_min, 0, 63)) throw ConfigError("cw_min outside [0, 63]");
    if (!in(mcot_ms, 0, 10)) throw ConfigError("mcot_ms outside [0, 10]");
    if (mcs && !in(*mcs, 0, 28)) throw ConfigError("mcs outside [0, 28]");
    if (!in(defer_us, 0, 20)) throw ConfigError("defer_us outside [0, 20]");
    if (!in(ed_threshold_dbm, -90, -60)) throw ConfigError("ed_threshold_dbm outside [-90, -60]");
    if (!in(tx_power_dbm, 10, 30)) throw ConfigError("tx_power_dbm outside [10, 30]");
  }
};

struct LbtConfig {
  int t_f_us = 16;
  int cca_slot_us = 9;
  int d_slots = 3;
  int cw_max = 63;

  void validate() const {
    if (t_f_us < 0) throw ConfigError("lbt.t_f_us must be >= 0");
    if (d_slots < 0) throw ConfigError("lbt.d_slots must be >= 0");
    if (cca_slot_us < 0) throw ConfigError("lbt.cca_slot_us must be >= 0");
    if (cw_max < 0) throw ConfigError("lbt.cw_max must be >= 0");
  }
};

inline constexpr int defer_duration_us(int t_f_us, int d_slots, int slot_us) {
  return t_f_us + d_slots * slot_us;
}

/// Resolved per-node timing parameters. The defer prefix comes from the MAC
/// config (a6) and the slot from a1; d_slots from LbtConfig.
struct LbtParams {
  BackoffType backoff = BackoffType::beb;
  int cw_min = 15;
  int cw_max = 63;
  int slot_us = 9;
  int defer_total_us = 43;
  TimeUs mcot_us = 8000;

  friend bool operator==(const LbtParams&, const LbtParams&) = default;
};

inline LbtParams make_lbt_params(const MacConfig& mac, const LbtConfig& lbt) {
  LbtParams p;
  p.backoff = mac.backoff;
  p.cw_min = mac.cw_min;
  p.cw_max = std::max(lbt.cw_max, mac.cw_min);
  p.slot_us = mac.sensing_slot_us;
  p.defer_total_us = defer_duration_us(mac.defer_us, lbt.d_slots, mac.sensing_slot_us);
  p.mcot_us = static_cast<TimeUs>(mac.mcot_ms) * 1000;
  return p;
}

/// Uniform draw from {0, ..., cw-1}; cw <= 0 means immediate access.
inline int draw_backoff(int cw, Rng& rng) {
  if (cw <= 1) return 0;
  return std::uniform_int_distribution<int>(0, cw - 1)(rng);
}

enum class TxOutcome { success, failure };

inline int update_cw(BackoffType type, int cw_current, int cw_min, int cw_max, TxOutcome outcome) {
  switch (type) {
    case BackoffType::off:
      return 0;
    case BackoffType::constant:
      return cw_min;
    case BackoffType::beb:
      if (outcome == TxOutcome::success) return cw_min;
      return std::min(2 * (cw_current + 1) - 1, cw_max);
    case BackoffType::edid:
      if (outcome == TxOutcome::success) return std::max((cw_current + 1) / 2 - 1, cw_min);
      return std::min(2 * (cw_current + 1) - 1, cw_max);
  }
  throw InvariantError("update_cw: unknown backoff type");
}

/// Grant length: the queue drain time capped at MCOT, rounded up to whole µs.
inline TimeUs tx_grant_duration_us(double queue_bits, double rate_bps, int mcot_ms) {
  if (queue_bits <= 0) return 0;
  if (!(rate_bps > 0)) throw ConfigError("tx_grant_duration_us: zero rate with a non-empty queue");
  const double need_us = queue_bits * 1e6 / rate_bps;
  const TimeUs need = static_cast<TimeUs>(std::ceil(need_us - 1e-9));
  return std::min<TimeUs>(need, static_cast<TimeUs>(mcot_ms) * 1000);
}

enum class LbtPhase { deferring, backoff, transmitting, post_tx };

struct LbtState {
  LbtPhase phase = LbtPhase::deferring;
  int defer_remaining_us = 0;
  int backoff_counter = 0;
  int slot_progress_us = 0;  // idle µs accumulated in the current backoff slot
  int cw_current = 0;
  TimeUs tx_start_us = 0;
  TimeUs tx_end_us = 0;
  bool frozen = false;  // a counter survived a busy slot and will be resumed

  friend bool operator==(const LbtState&, const LbtState&) = default;
};

inline LbtState initial_lbt_state(const LbtParams& p) {
  LbtState s;
  s.defer_remaining_us = p.defer_total_us;
  s.cw_current = p.backoff == BackoffType::off ? 0 : p.cw_min;
  return s;
}

inline void check_lbt_invariants(const LbtState& s, const LbtParams& p, TimeUs now) {
  if (s.backoff_counter < 0 || (s.backoff_counter > 0 && s.backoff_counter > std::max(s.cw_current, 0))) {
    throw InvariantError("lbt: backoff counter " + std::to_string(s.backoff_counter) +
                         " outside [0, cw=" + std::to_string(s.cw_current) + "]");
  }
  if (p.backoff != BackoffType::off && (s.cw_current < p.cw_min || s.cw_current > p.cw_max)) {
    throw InvariantError("lbt: cw " + std::to_string(s.cw_current) + " outside [cw_min, cw_max]");
  }
  if (s.phase == LbtPhase::transmitting &&
      !(now < s.tx_end_us && s.tx_end_us - s.tx_start_us <= p.mcot_us)) {
    throw InvariantError("lbt: transmitting outside its grant at t=" + std::to_string(now));
  }
}

// --- Transitions ----------------------------------------------------------
// These are the building blocks of both the per-µs lbt_advance and the
// event-driven engine, which applies them over whole constant-channel
// intervals.

/// `n_us` idle microseconds while contending. The caller guarantees the
/// interval does not run past the node's next completion time.
inline void lbt_idle(LbtState& s, const LbtParams& p, TimeUs n_us) {
  if (n_us <= 0) return;
  if (s.phase == LbtPhase::deferring) {
    if (n_us > s.defer_remaining_us) {
      throw InvariantError("lbt_idle: interval overruns the defer period");
    }
    s.defer_remaining_us -= static_cast<int>(n_us);
  } else if (s.phase == LbtPhase::backoff) {
    if (p.slot_us <= 0) throw InvariantError("lbt_idle: backoff phase with zero-length slots");
    const TimeUs total = s.slot_progress_us + n_us;
    const TimeUs slots = total / p.slot_us;
    if (slots > s.backoff_counter) throw InvariantError("lbt_idle: interval overruns the backoff");
    s.backoff_counter -= static_cast<int>(slots);
    s.slot_progress_us = static_cast<int>(total % p.slot_us);
  }
}

/// A contending node sensed the medium busy for at least one microsecond.
/// Deferral restarts from scratch; a running backoff freezes and the node
/// returns to deferring with its counter retained.
inline void lbt_busy(LbtState& s, const LbtParams& p) {
  if (s.phase == LbtPhase::backoff) {
    s.frozen = true;
    s.phase = LbtPhase::deferring;
  }
  if (s.phase == LbtPhase::deferring) {
    s.defer_remaining_us = p.defer_total_us;
    s.slot_progress_us = 0;
  }
}

/// Resolves zero-length stages at the current boundary. Returns true when
/// the node should start transmitting now.
inline bool lbt_resolve(LbtState& s, const LbtParams& p, Rng& rng) {
  if (s.phase == LbtPhase::deferring && s.defer_remaining_us == 0) {
    if (p.backoff == BackoffType::off || p.slot_us == 0) {
      s.backoff_counter = 0;
      s.frozen = false;
      return true;
    }
    if (!s.frozen) s.backoff_counter = draw_backoff(s.cw_current, rng);
    s.frozen = false;
    s.slot_progress_us = 0;
    s.phase = LbtPhase::backoff;
  }
  return s.phase == LbtPhase::backoff && s.backoff_counter == 0;
}

/// Next boundary at which the node would act if the medium stays idle.
inline TimeUs lbt_completion_time(const LbtState& s, const LbtParams& p, TimeUs now) {
  if (s.phase == LbtPhase::deferring) return now + s.defer_remaining_us;
  if (s.phase == LbtPhase::backoff) {
    return now + (p.slot_us - s.slot_progress_us) +
           static_cast<TimeUs>(s.backoff_counter - 1) * p.slot_us;
  }
  return now;
}

inline void lbt_start_tx(LbtState& s, const LbtParams& p, TimeUs now, TimeUs grant_us) {
  if (grant_us <= 0 || grant_us > p.mcot_us) {
    throw InvariantError("lbt_start_tx: grant of " + std::to_string(grant_us) + " µs outside (0, mcot]");
  }
  s.phase = LbtPhase::transmitting;
  s.tx_start_us = now;
  s.tx_end_us = now + grant_us;
  s.backoff_counter = 0;
  s.slot_progress_us = 0;
}

/// Grant over: adjusts CW and re-enters the full defer period.
inline void lbt_finish_tx(LbtState& s, const LbtParams& p, TxOutcome outcome) {
  s.phase = LbtPhase::post_tx;
  s.cw_current = update_cw(p.backoff, s.cw_current, p.cw_min, p.cw_max, outcome);
  s.phase = LbtPhase::deferring;
  s.defer_remaining_us = p.defer_total_us;
  s.frozen = false;
}

/// Switches a node to new parameters at a step boundary. An ongoing grant
/// keeps its end time.
inline void lbt_reconfigure(LbtState& s, const LbtParams& old_p, const LbtParams& new_p) {
  if (old_p == new_p) return;
  if (new_p.backoff == BackoffType::off) {
    s.cw_current = 0;
  } else if (new_p.backoff != old_p.backoff || new_p.cw_min != old_p.cw_min) {
    s.cw_current = new_p.cw_min;
  } else {
    s.cw_current = std::clamp(s.cw_current, new_p.cw_min, new_p.cw_max);
  }
  if (s.phase == LbtPhase::backoff) {
    s.frozen = true;
    s.phase = LbtPhase::deferring;
  }
  if (s.phase == LbtPhase::deferring) {
    s.defer_remaining_us = new_p.defer_total_us;
    s.slot_progress_us = 0;
    if (s.frozen) {
      s.backoff_counter = std::min(s.backoff_counter, std::max(s.cw_current - 1, 0));
      if (s.backoff_counter == 0 || new_p.backoff == BackoffType::off) s.frozen = false;
    }
  }
}

// --- Single-boundary form ---------------------------------------------------

enum LbtEvent : unsigned { lbt_none = 0, lbt_tx_start = 1, lbt_tx_end = 2 };

struct LbtInput {
  bool channel_busy = false;   // medium state over [now-1, now)
  bool was_contending = false; // node had traffic and was not transmitting over [now-1, now)
  bool has_traffic = false;    // queue non-empty at `now`
  TimeUs grant_us = 0;         // grant to use if a transmission starts at `now`
  TxOutcome outcome = TxOutcome::success;  // result of a grant ending at `now`
};

struct LbtStep {
  LbtState state;
  unsigned events = lbt_none;
};

/// Advances the machine across one microsecond boundary.
inline LbtStep lbt_advance(LbtState s, const LbtParams& p, const LbtInput& in, TimeUs now, Rng& rng) {
  LbtStep out;
  if (s.phase == LbtPhase::transmitting) {
    if (now > s.tx_end_us) throw InvariantError("lbt_advance: missed tx_end at " + std::to_string(s.tx_end_us));
    if (now < s.tx_end_us) {
      out.state = s;
      return out;
    }
    lbt_finish_tx(s, p, in.outcome);
    out.events |= lbt_tx_end;
  } else if (in.was_contending) {
    if (in.channel_busy) {
      lbt_busy(s, p);
    } else {
      lbt_idle(s, p, 1);
    }
  } else if (s.phase == LbtPhase::deferring) {
    s.defer_remaining_us = p.defer_total_us;
  }
  if (in.has_traffic && p.mcot_us > 0 && lbt_resolve(s, p, rng)) {
    lbt_start_tx(s, p, now, in.grant_us);
    out.events |= lbt_tx_start;
  }
  check_lbt_invariants(s, p, now);
  out.state = s;
  return out;
}

}  // namespace nrumac
