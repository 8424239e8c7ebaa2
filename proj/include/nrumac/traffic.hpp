#pragma once

// Downlink traffic: Poisson and bursty AR/VR arrivals, FIFO queues, delay.

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <random>
#include <vector>

#include "nrumac/error.hpp"
#include "nrumac/rng.hpp"

namespace nrumac {

inline constexpr int kPacketBytes = 1500;
inline constexpr int kPacketBits = kPacketBytes * 8;
inline constexpr double kMaxLambdaPps = 3000.0;

enum class TrafficKind { poisson, arvr };

struct TrafficSpec {
  TrafficKind kind = TrafficKind::poisson;
  double lambda_pps = 0.0;        // Poisson rate
  double fps = 60.0;              // AR/VR frame rate
  double frame_bytes_mean = 18750.0;
  double frame_bytes_sigma_frac = 0.1;
  double jitter_ms = 1.0;
  int packet_bytes = kPacketBytes;

  void validate() const {
    if (!(lambda_pps >= 0 && lambda_pps <= kMaxLambdaPps)) {
      throw ConfigError("traffic lambda_pps outside [0, 3000]");
    }
    if (packet_bytes != kPacketBytes) throw ConfigError("traffic packet_bytes must be 1500");
    if (kind == TrafficKind::arvr) {
      if (!(fps > 0)) throw ConfigError("traffic fps must be > 0 for arvr");
      if (!(frame_bytes_mean > 0)) throw ConfigError("traffic frame_bytes_mean must be > 0");
      if (!(frame_bytes_sigma_frac >= 0)) throw ConfigError("traffic frame_bytes_sigma_frac must be >= 0");
      if (!(jitter_ms >= 0)) throw ConfigError("traffic jitter_ms must be >= 0");
    }
  }

  /// Expected packets per second.
  double offered_pps() const {
    if (kind == TrafficKind::poisson) return lambda_pps;
    return fps * std::ceil(frame_bytes_mean / packet_bytes);
  }
};

struct Packet {
  double arrival_s = 0.0;
  int size_bits = kPacketBits;
  std::optional<double> delivered_s;
};

/// Arrivals in [t0, t1), sorted by time.
inline std::vector<Packet> generate_arrivals(const TrafficSpec& spec, double t0, double t1, Rng& rng) {
  if (!(t0 < t1)) throw ConfigError("generate_arrivals: t0 must be < t1");
  std::vector<Packet> out;
  const int bits = spec.packet_bytes * 8;
  if (spec.kind == TrafficKind::poisson) {
    if (spec.lambda_pps <= 0) return out;
    std::exponential_distribution<double> gap(spec.lambda_pps);
    for (double t = t0 + gap(rng); t < t1; t += gap(rng)) out.push_back({t, bits, std::nullopt});
    return out;
  }
  // Frame epochs k / fps; the index range partitions adjacent windows exactly.
  const auto first = static_cast<long long>(std::ceil(t0 * spec.fps - 1e-9));
  const auto last = static_cast<long long>(std::ceil(t1 * spec.fps - 1e-9));
  std::normal_distribution<double> size(spec.frame_bytes_mean, spec.frame_bytes_sigma_frac * spec.frame_bytes_mean);
  const double jitter_s = spec.jitter_ms * 1e-3;
  std::uniform_real_distribution<double> jitter(-jitter_s, jitter_s);
  for (long long k = first; k < last; ++k) {
    const double epoch = static_cast<double>(k) / spec.fps;
    const double t = std::clamp(epoch + jitter(rng), t0, std::nextafter(t1, t0));
    const double bytes = std::max(size(rng), static_cast<double>(spec.packet_bytes));
    const auto n = static_cast<int>(std::ceil(bytes / spec.packet_bytes));
    for (int i = 0; i < n; ++i) out.push_back({t, bits, std::nullopt});
  }
  std::stable_sort(out.begin(), out.end(), [](const Packet& a, const Packet& b) { return a.arrival_s < b.arrival_s; });
  return out;
}

using PacketQueue = std::deque<Packet>;

struct DrainResult {
  std::vector<Packet> delivered;
  double airtime_used_us = 0.0;
};

/// Serves the queue head-first within `budget_us` of airtime starting at
/// `start_s`. On failure nothing leaves the queue (the same packets are
/// retransmitted later).
inline DrainResult drain_queue(PacketQueue& queue, double budget_us, double rate_bps, bool success, double start_s) {
  DrainResult r;
  if (!success || rate_bps <= 0) return r;
  double used = 0.0;
  while (!queue.empty()) {
    const double need = queue.front().size_bits * 1e6 / rate_bps;
    if (used + need > budget_us + 1e-6) break;
    used += need;
    Packet p = queue.front();
    queue.pop_front();
    p.delivered_s = start_s + used * 1e-6;
    r.delivered.push_back(p);
  }
  r.airtime_used_us = used;
  return r;
}

struct DelayStat {
  double mean_s = 0.0;
  bool defined = false;
};

inline DelayStat mean_delay_s(const std::vector<Packet>& delivered) {
  DelayStat d;
  if (delivered.empty()) return d;
  double sum = 0.0;
  for (const auto& p : delivered) sum += p.delivered_s.value_or(p.arrival_s) - p.arrival_s;
  d.mean_s = sum / static_cast<double>(delivered.size());
  d.defined = true;
  return d;
}

}  // namespace nrumac
