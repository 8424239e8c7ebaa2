#pragma once

// Scenario description and its seeded instantiation into a deployment
// (gNB/UE positions and per-gNB traffic).

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nrumac/error.hpp"
#include "nrumac/lbt.hpp"
#include "nrumac/radio.hpp"
#include "nrumac/rng.hpp"
#include "nrumac/traffic.hpp"

namespace nrumac {

inline constexpr int kMaxGnbs = 6;

/// Traffic description shared by all gNBs of a scenario. The per-gNB rate is
/// either fixed, listed per gNB, or drawn uniformly from a range when the
/// deployment is instantiated.
struct TrafficTemplate {
  TrafficKind kind = TrafficKind::poisson;
  std::optional<double> lambda;
  std::optional<std::pair<double, double>> lambda_range;
  std::vector<double> lambda_per_gnb;
  // AR/VR shape. With a rate given, the frame rate is derived from it.
  double fps = 60.0;
  double frame_bytes_mean = 18750.0;
  double frame_bytes_sigma_frac = 0.1;
  double jitter_ms = 1.0;
};

struct ScenarioConfig {
  std::string name = "custom";
  int num_gnbs = 1;
  double area_m = 200.0;
  std::vector<NodePosition> positions;  // empty: random within the area
  int ue_per_gnb = 1;
  std::vector<std::vector<NodePosition>> ue_positions;  // empty: random around each gNB
  double ue_min_distance_m = 5.0;
  double ue_max_distance_m = 20.0;
  TrafficTemplate traffic;
  double step_s = 0.1;
  double episode_s = 50.0;
  std::uint64_t seed = 1;  // deployment seed (positions, drawn rates)
  int initial_backlog_packets = 0;
  double alpha = 0.3;
  RadioConfig radio;
  LbtConfig lbt;

  int num_steps() const { return static_cast<int>(std::llround(episode_s / step_s)); }
  TimeUs step_us() const { return static_cast<TimeUs>(std::llround(step_s * 1e6)); }

  void validate() const {
    if (num_gnbs < 1 || num_gnbs > kMaxGnbs) throw ConfigError("num_gnbs: must be in [1, 6]");
    if (!(area_m > 0)) throw ConfigError("area_m: must be > 0");
    if (!positions.empty()) {
      if (static_cast<int>(positions.size()) != num_gnbs) throw ConfigError("positions: need one entry per gNB");
      for (const auto& p : positions) {
        if (p.x_m < 0 || p.y_m < 0 || p.x_m > area_m || p.y_m > area_m) {
          throw ConfigError("positions: coordinates must lie within [0, area_m]");
        }
      }
    }
    if (ue_per_gnb < 1) throw ConfigError("ue_per_gnb: must be >= 1");
    if (!ue_positions.empty()) {
      if (static_cast<int>(ue_positions.size()) != num_gnbs) throw ConfigError("ue_positions: need one list per gNB");
      for (const auto& l : ue_positions) {
        if (static_cast<int>(l.size()) != ue_per_gnb) throw ConfigError("ue_positions: need ue_per_gnb entries per gNB");
      }
    }
    if (!(ue_min_distance_m >= 0 && ue_max_distance_m >= ue_min_distance_m)) {
      throw ConfigError("ue_min_distance_m/ue_max_distance_m: need 0 <= min <= max");
    }
    if (!(step_s > 0)) throw ConfigError("step_s: must be > 0");
    if (!(episode_s >= step_s)) throw ConfigError("episode_s: must be >= step_s");
    const double ratio = episode_s / step_s;
    if (std::abs(ratio - std::round(ratio)) > 1e-6) throw ConfigError("episode_s: must be a multiple of step_s");
    if (step_us() <= 0) throw ConfigError("step_s: below one microsecond");
    if (initial_backlog_packets < 0) throw ConfigError("initial_backlog_packets: must be >= 0");
    if (!(alpha >= 0)) throw ConfigError("alpha: must be >= 0");
    auto check_lambda = [](double l, const char* key) {
      if (!(l >= 0 && l <= kMaxLambdaPps)) throw ConfigError(std::string(key) + ": must be in [0, 3000]");
    };
    const int given = (traffic.lambda ? 1 : 0) + (traffic.lambda_range ? 1 : 0) + (traffic.lambda_per_gnb.empty() ? 0 : 1);
    if (given > 1) throw ConfigError("lambda: give only one of lambda, lambda_range, lambda_per_gnb");
    if (traffic.lambda) check_lambda(*traffic.lambda, "lambda");
    if (traffic.lambda_range) {
      check_lambda(traffic.lambda_range->first, "lambda_range");
      check_lambda(traffic.lambda_range->second, "lambda_range");
      if (traffic.lambda_range->first > traffic.lambda_range->second) throw ConfigError("lambda_range: min > max");
    }
    if (!traffic.lambda_per_gnb.empty()) {
      if (static_cast<int>(traffic.lambda_per_gnb.size()) != num_gnbs) {
        throw ConfigError("lambda_per_gnb: need one rate per gNB");
      }
      for (double l : traffic.lambda_per_gnb) check_lambda(l, "lambda_per_gnb");
    }
    if (traffic.kind == TrafficKind::arvr) {
      if (!(traffic.fps > 0)) throw ConfigError("fps: must be > 0");
      if (!(traffic.frame_bytes_mean > 0)) throw ConfigError("frame_bytes_mean: must be > 0");
      if (!(traffic.frame_bytes_sigma_frac >= 0)) throw ConfigError("frame_bytes_sigma_frac: must be >= 0");
      if (!(traffic.jitter_ms >= 0)) throw ConfigError("jitter_ms: must be >= 0");
    }
    radio.validate();
    lbt.validate();
  }
};

struct Deployment {
  std::vector<NodePosition> gnbs;
  std::vector<std::vector<NodePosition>> ues;
  std::vector<TrafficSpec> traffic;
};

/// Everything random here is drawn from the scenario's own seed, so one
/// scenario is one fixed deployment across episodes.
inline Deployment make_deployment(const ScenarioConfig& sc) {
  sc.validate();
  Deployment d;
  Rng place = make_rng(sc.seed, Stream::placement);
  std::uniform_real_distribution<double> coord(0.0, sc.area_m);
  if (sc.positions.empty()) {
    for (int i = 0; i < sc.num_gnbs; ++i) {
      const double x = coord(place);
      const double y = coord(place);
      d.gnbs.push_back({x, y});
    }
  } else {
    d.gnbs = sc.positions;
  }
  if (sc.ue_positions.empty()) {
    std::uniform_real_distribution<double> dist(sc.ue_min_distance_m, sc.ue_max_distance_m);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    for (const auto& g : d.gnbs) {
      std::vector<NodePosition> ues;
      for (int u = 0; u < sc.ue_per_gnb; ++u) {
        const double r = dist(place);
        const double a = angle(place);
        ues.push_back({std::clamp(g.x_m + r * std::cos(a), 0.0, sc.area_m),
                       std::clamp(g.y_m + r * std::sin(a), 0.0, sc.area_m)});
      }
      d.ues.push_back(std::move(ues));
    }
  } else {
    d.ues = sc.ue_positions;
  }

  Rng lam = make_rng(sc.seed, Stream::lambda);
  const TrafficTemplate& t = sc.traffic;
  for (int i = 0; i < sc.num_gnbs; ++i) {
    std::optional<double> rate;
    if (t.lambda) rate = *t.lambda;
    if (t.lambda_range) rate = std::uniform_real_distribution<double>(t.lambda_range->first, t.lambda_range->second)(lam);
    if (!t.lambda_per_gnb.empty()) rate = t.lambda_per_gnb[static_cast<std::size_t>(i)];
    TrafficSpec s;
    s.kind = t.kind;
    s.fps = t.fps;
    s.frame_bytes_mean = t.frame_bytes_mean;
    s.frame_bytes_sigma_frac = t.frame_bytes_sigma_frac;
    s.jitter_ms = t.jitter_ms;
    if (t.kind == TrafficKind::poisson) {
      s.lambda_pps = rate.value_or(0.0);
    } else if (rate) {
      // Packets per frame is ceil(mean frame / packet); a zero rate means no frames.
      const double per_frame = std::ceil(t.frame_bytes_mean / kPacketBytes);
      s.lambda_pps = *rate;
      s.fps = *rate > 0 ? *rate / per_frame : 0.0;
    }
    d.traffic.push_back(s);
  }
  return d;
}

}  // namespace nrumac
