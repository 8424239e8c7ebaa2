#pragma once

// Static channel and PHY abstraction: log-distance path loss, energy
// detection, SINR and the MCS table.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>

#include "nrumac/error.hpp"

namespace nrumac {

/// Power level used for "nothing received".
inline constexpr double kSilentDbm = -200.0;

struct RadioConfig {
  double carrier_freq_hz = 6e9;
  double bandwidth_hz = 20e6;
  double noise_figure_db = 7.0;
  double pathloss_exponent = 3.0;
  double ref_loss_db = 48.0;  // free space at 1 m, 6 GHz
  double capture_margin_db = 3.0;

  void validate() const {
    if (!(bandwidth_hz > 0)) throw ConfigError("radio.bandwidth_hz must be > 0");
    if (!(pathloss_exponent >= 2)) throw ConfigError("radio.pathloss_exponent must be >= 2");
    if (!(ref_loss_db > 0)) throw ConfigError("radio.ref_loss_db must be > 0");
    if (!(carrier_freq_hz > 0)) throw ConfigError("radio.carrier_freq_hz must be > 0");
  }
};

struct NodePosition {
  double x_m = 0.0;
  double y_m = 0.0;

  friend bool operator==(const NodePosition&, const NodePosition&) = default;
};

inline double distance_m(const NodePosition& a, const NodePosition& b) {
  return std::hypot(a.x_m - b.x_m, a.y_m - b.y_m);
}

inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

inline double mw_to_dbm(double mw) { return mw > 0 ? 10.0 * std::log10(mw) : kSilentDbm; }

/// Distance is clamped to 1 m.
inline double path_loss_db(const RadioConfig& cfg, double dist_m) {
  const double d = std::max(dist_m, 1.0);
  return cfg.ref_loss_db + 10.0 * cfg.pathloss_exponent * std::log10(d);
}

inline double rx_power_dbm(const RadioConfig& cfg, double tx_power_dbm, const NodePosition& from,
                           const NodePosition& to) {
  return tx_power_dbm - path_loss_db(cfg, distance_m(from, to));
}

/// Power sum in the linear domain. Empty input gives kSilentDbm.
inline double aggregate_power_dbm(std::span<const double> powers_dbm) {
  double mw = 0.0;
  for (double p : powers_dbm) {
    if (p > kSilentDbm) mw += dbm_to_mw(p);
  }
  return mw_to_dbm(mw);
}

inline double noise_floor_dbm(const RadioConfig& cfg) {
  return -174.0 + 10.0 * std::log10(cfg.bandwidth_hz) + cfg.noise_figure_db;
}

struct ActiveTransmitter {
  int node = 0;
  double tx_power_dbm = 0.0;
  NodePosition position;
};

enum class Cca { idle, busy };

/// Energy detection at `listener_pos`: busy iff the summed received power of
/// all active transmitters exceeds the threshold.
inline Cca cca_assessment(const RadioConfig& cfg, int listener, const NodePosition& listener_pos,
                          double ed_threshold_dbm, std::span<const ActiveTransmitter> active) {
  double mw = 0.0;
  for (const auto& tx : active) {
    if (tx.node == listener) {
      throw InvariantError("cca_assessment: listener is among the active transmitters");
    }
    mw += dbm_to_mw(rx_power_dbm(cfg, tx.tx_power_dbm, tx.position, listener_pos));
  }
  return mw_to_dbm(mw) > ed_threshold_dbm ? Cca::busy : Cca::idle;
}

// ---------------------------------------------------------------------------
// MCS

inline constexpr int kMaxMcs = 28;
inline constexpr int kNumMcs = kMaxMcs + 1;

/// Spectral efficiency (bit/s/Hz) per MCS index, from the NR 64QAM MCS table.
/// The table's rows 16 and 17 (2.5703 and 2.5664) are stored in ascending
/// order so that the mapping is strictly increasing.
inline constexpr std::array<double, kNumMcs> kSpectralEfficiency = {
    0.2344, 0.3066, 0.3770, 0.4902, 0.6016, 0.7402, 0.8770, 1.0273, 1.1758, 1.3262,
    1.3281, 1.4766, 1.6953, 1.9141, 2.1602, 2.4063, 2.5664, 2.5703, 2.7305, 3.0293,
    3.3223, 3.6094, 3.9023, 4.2129, 4.5234, 4.8164, 5.1152, 5.3320, 5.5547};

/// Fraction of the raw PHY rate left after control and reference signals.
inline constexpr double kPhyOverheadFactor = 0.8;

inline void check_mcs(int mcs) {
  if (mcs < 0 || mcs > kMaxMcs) {
    throw ConfigError("mcs index " + std::to_string(mcs) + " outside [0, 28]");
  }
}

inline double mcs_spectral_efficiency(int mcs) {
  check_mcs(mcs);
  return kSpectralEfficiency[static_cast<std::size_t>(mcs)];
}

inline double phy_rate_bps(int mcs, double bandwidth_hz) {
  return mcs_spectral_efficiency(mcs) * bandwidth_hz * kPhyOverheadFactor;
}

/// signal minus (interferers + noise), all summed in the linear domain.
inline double sinr_db(double signal_dbm, std::span<const double> interferers_dbm, double noise_dbm) {
  double mw = dbm_to_mw(noise_dbm);
  for (double p : interferers_dbm) mw += dbm_to_mw(p);
  return signal_dbm - mw_to_dbm(mw);
}

/// Minimum SINR for MCS `mcs`: Shannon gap plus the capture margin, in dB.
inline double mcs_threshold_db(int mcs, double capture_margin_db) {
  const double se = mcs_spectral_efficiency(mcs);
  return 10.0 * std::log10(std::exp2(se) - 1.0) + capture_margin_db;
}

/// Compared in dB so that an input exactly at the threshold succeeds.
inline bool tx_success(double sinr, int mcs, double capture_margin_db) {
  return sinr >= mcs_threshold_db(mcs, capture_margin_db);
}

/// Highest MCS whose threshold is met; 0 when none is.
inline int select_mcs_auto(double estimated_sinr_db, double capture_margin_db) {
  int best = 0;
  for (int m = 0; m <= kMaxMcs; ++m) {
    if (tx_success(estimated_sinr_db, m, capture_margin_db)) best = m;
  }
  return best;
}

}  // namespace nrumac
