#pragma once

// Scenario files (JSON) and the built-in presets.
//
// Schema, all keys optional except where noted; unknown keys are rejected:
//   name, num_gnbs, area_m, positions [[x, y], ...], ue_per_gnb,
//   ue_positions [[[x, y], ...], ...], ue_min_distance_m, ue_max_distance_m,
//   traffic "poisson" | "arvr", lambda, lambda_range [lo, hi],
//   lambda_per_gnb [...], fps, frame_bytes_mean, frame_bytes_sigma_frac,
//   jitter_ms, step_s, episode_s, seed, initial_backlog_packets, alpha,
//   radio {carrier_freq_hz, bandwidth_hz, noise_figure_db, pathloss_exponent,
//          ref_loss_db, capture_margin_db},
//   lbt {t_f_us, cca_slot_us, d_slots, cw_max},
//   ppo {gamma, clip_epsilon, entropy_coeff, minibatch_size, epochs, lr,
//        iterations, hidden, layers, seq_len, standardize_advantages}

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nrumac/error.hpp"
#include "nrumac/scenario.hpp"

namespace nrumac {

using Json = nlohmann::json;

/// A scenario file: environment plus optional learner settings. The learner
/// part is kept as raw JSON so that this header does not depend on the
/// learning code.
struct ScenarioFile {
  ScenarioConfig scenario;
  Json ppo = Json::object();
};

namespace detail {

/// Rejects duplicate keys at any depth.
inline Json parse_strict(const std::string& text) {
  std::vector<std::set<std::string>> keys;
  auto cb = [&keys](int, Json::parse_event_t ev, Json& j) {
    switch (ev) {
      case Json::parse_event_t::object_start:
        keys.emplace_back();
        break;
      case Json::parse_event_t::object_end:
        keys.pop_back();
        break;
      case Json::parse_event_t::key: {
        const std::string k = j.get<std::string>();
        if (!keys.back().insert(k).second) throw ConfigError("duplicate key '" + k + "'");
        break;
      }
      default:
        break;
    }
    return true;
  };
  try {
    return Json::parse(text, cb);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("scenario parse error: ") + e.what());
  }
}

inline void reject_unknown(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where.empty() ? "scenario must be an object" : where + ": must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw ConfigError("unknown key '" + (where.empty() ? "" : where + ".") + it.key() + "'");
    }
  }
}

template <class T>
void read_key(const Json& obj, const char* key, T& out, const std::string& where = "") {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const Json::exception&) {
    throw ConfigError((where.empty() ? "" : where + ".") + key + ": wrong type");
  }
}

inline NodePosition read_point(const Json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ConfigError(key + ": expected [x, y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

inline Json point_json(const NodePosition& p) { return Json::array({p.x_m, p.y_m}); }

}  // namespace detail

inline ScenarioFile scenario_from_json(const Json& j) {
  detail::reject_unknown(j,
                         {"name", "num_gnbs", "area_m", "positions", "ue_per_gnb", "ue_positions", "ue_min_distance_m",
                          "ue_max_distance_m", "traffic", "lambda", "lambda_range", "lambda_per_gnb", "fps",
                          "frame_bytes_mean", "frame_bytes_sigma_frac", "jitter_ms", "step_s", "episode_s", "seed",
                          "initial_backlog_packets", "alpha", "radio", "lbt", "ppo"},
                         "");
  ScenarioFile f;
  ScenarioConfig& s = f.scenario;
  using detail::read_key;
  read_key(j, "name", s.name);
  read_key(j, "num_gnbs", s.num_gnbs);
  read_key(j, "area_m", s.area_m);
  if (j.contains("positions")) {
    if (!j["positions"].is_array()) throw ConfigError("positions: expected a list of [x, y]");
    for (const auto& p : j["positions"]) s.positions.push_back(detail::read_point(p, "positions"));
  }
  read_key(j, "ue_per_gnb", s.ue_per_gnb);
  if (j.contains("ue_positions")) {
    if (!j["ue_positions"].is_array()) throw ConfigError("ue_positions: expected one list per gNB");
    for (const auto& l : j["ue_positions"]) {
      if (!l.is_array()) throw ConfigError("ue_positions: expected one list per gNB");
      std::vector<NodePosition> ues;
      for (const auto& p : l) ues.push_back(detail::read_point(p, "ue_positions"));
      s.ue_positions.push_back(std::move(ues));
    }
  }
  read_key(j, "ue_min_distance_m", s.ue_min_distance_m);
  read_key(j, "ue_max_distance_m", s.ue_max_distance_m);
  if (j.contains("traffic")) {
    std::string kind;
    read_key(j, "traffic", kind);
    if (kind == "poisson") {
      s.traffic.kind = TrafficKind::poisson;
    } else if (kind == "arvr") {
      s.traffic.kind = TrafficKind::arvr;
    } else {
      throw ConfigError("traffic: must be \"poisson\" or \"arvr\"");
    }
  }
  if (j.contains("lambda")) {
    double l = 0;
    read_key(j, "lambda", l);
    s.traffic.lambda = l;
  }
  if (j.contains("lambda_range")) {
    std::vector<double> r;
    read_key(j, "lambda_range", r);
    if (r.size() != 2) throw ConfigError("lambda_range: expected [min, max]");
    s.traffic.lambda_range = std::make_pair(r[0], r[1]);
  }
  read_key(j, "lambda_per_gnb", s.traffic.lambda_per_gnb);
  read_key(j, "fps", s.traffic.fps);
  read_key(j, "frame_bytes_mean", s.traffic.frame_bytes_mean);
  read_key(j, "frame_bytes_sigma_frac", s.traffic.frame_bytes_sigma_frac);
  read_key(j, "jitter_ms", s.traffic.jitter_ms);
  read_key(j, "step_s", s.step_s);
  read_key(j, "episode_s", s.episode_s);
  read_key(j, "seed", s.seed);
  read_key(j, "initial_backlog_packets", s.initial_backlog_packets);
  read_key(j, "alpha", s.alpha);
  if (j.contains("radio")) {
    const Json& r = j["radio"];
    detail::reject_unknown(r,
                           {"carrier_freq_hz", "bandwidth_hz", "noise_figure_db", "pathloss_exponent", "ref_loss_db",
                            "capture_margin_db"},
                           "radio");
    read_key(r, "carrier_freq_hz", s.radio.carrier_freq_hz, "radio");
    read_key(r, "bandwidth_hz", s.radio.bandwidth_hz, "radio");
    read_key(r, "noise_figure_db", s.radio.noise_figure_db, "radio");
    read_key(r, "pathloss_exponent", s.radio.pathloss_exponent, "radio");
    read_key(r, "ref_loss_db", s.radio.ref_loss_db, "radio");
    read_key(r, "capture_margin_db", s.radio.capture_margin_db, "radio");
  }
  if (j.contains("lbt")) {
    const Json& l = j["lbt"];
    detail::reject_unknown(l, {"t_f_us", "cca_slot_us", "d_slots", "cw_max"}, "lbt");
    read_key(l, "t_f_us", s.lbt.t_f_us, "lbt");
    read_key(l, "cca_slot_us", s.lbt.cca_slot_us, "lbt");
    read_key(l, "d_slots", s.lbt.d_slots, "lbt");
    read_key(l, "cw_max", s.lbt.cw_max, "lbt");
  }
  if (j.contains("ppo")) {
    detail::reject_unknown(j["ppo"],
                           {"gamma", "clip_epsilon", "entropy_coeff", "minibatch_size", "epochs", "lr", "iterations",
                            "hidden", "layers", "seq_len", "standardize_advantages"},
                           "ppo");
    f.ppo = j["ppo"];
  }
  s.validate();
  return f;
}

inline ScenarioFile parse_scenario_text(const std::string& text) { return scenario_from_json(detail::parse_strict(text)); }

inline ScenarioFile parse_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario_text(ss.str());
}

inline Json scenario_to_json(const ScenarioConfig& s, const Json& ppo = Json::object()) {
  Json j;
  j["name"] = s.name;
  j["num_gnbs"] = s.num_gnbs;
  j["area_m"] = s.area_m;
  if (!s.positions.empty()) {
    j["positions"] = Json::array();
    for (const auto& p : s.positions) j["positions"].push_back(detail::point_json(p));
  }
  j["ue_per_gnb"] = s.ue_per_gnb;
  if (!s.ue_positions.empty()) {
    j["ue_positions"] = Json::array();
    for (const auto& l : s.ue_positions) {
      Json a = Json::array();
      for (const auto& p : l) a.push_back(detail::point_json(p));
      j["ue_positions"].push_back(a);
    }
  }
  j["ue_min_distance_m"] = s.ue_min_distance_m;
  j["ue_max_distance_m"] = s.ue_max_distance_m;
  j["traffic"] = s.traffic.kind == TrafficKind::poisson ? "poisson" : "arvr";
  if (s.traffic.lambda) j["lambda"] = *s.traffic.lambda;
  if (s.traffic.lambda_range) j["lambda_range"] = {s.traffic.lambda_range->first, s.traffic.lambda_range->second};
  if (!s.traffic.lambda_per_gnb.empty()) j["lambda_per_gnb"] = s.traffic.lambda_per_gnb;
  if (s.traffic.kind == TrafficKind::arvr) {
    j["fps"] = s.traffic.fps;
    j["frame_bytes_mean"] = s.traffic.frame_bytes_mean;
    j["frame_bytes_sigma_frac"] = s.traffic.frame_bytes_sigma_frac;
    j["jitter_ms"] = s.traffic.jitter_ms;
  }
  j["step_s"] = s.step_s;
  j["episode_s"] = s.episode_s;
  j["seed"] = s.seed;
  if (s.initial_backlog_packets > 0) j["initial_backlog_packets"] = s.initial_backlog_packets;
  j["alpha"] = s.alpha;
  j["radio"] = {{"carrier_freq_hz", s.radio.carrier_freq_hz},     {"bandwidth_hz", s.radio.bandwidth_hz},
                {"noise_figure_db", s.radio.noise_figure_db},     {"pathloss_exponent", s.radio.pathloss_exponent},
                {"ref_loss_db", s.radio.ref_loss_db},             {"capture_margin_db", s.radio.capture_margin_db}};
  j["lbt"] = {{"t_f_us", s.lbt.t_f_us}, {"cca_slot_us", s.lbt.cca_slot_us}, {"d_slots", s.lbt.d_slots},
              {"cw_max", s.lbt.cw_max}};
  if (!ppo.empty()) j["ppo"] = ppo;
  return j;
}

// ---------------------------------------------------------------------------
// Presets

struct Preset {
  std::string name;
  std::string description;
  ScenarioFile file;
};

inline std::vector<Preset> scenario_presets() {
  std::vector<Preset> out;
  const std::pair<const char*, std::pair<double, double>> densities[] = {
      {"low", {10, 500}}, {"medium", {500, 1000}}, {"high", {1000, 3000}}, {"random", {0, 3000}}};
  for (const auto& [dname, range] : densities) {
    for (TrafficKind kind : {TrafficKind::poisson, TrafficKind::arvr}) {
      ScenarioFile f;
      ScenarioConfig& s = f.scenario;
      s.name = std::string(dname) + (kind == TrafficKind::poisson ? "-poisson" : "-arvr");
      s.num_gnbs = 6;
      s.area_m = 200;
      s.traffic.kind = kind;
      s.traffic.lambda_range = range;
      out.push_back({s.name, "6 gNBs at random in 200x200 m, per-gNB rate uniform in [" +
                                 std::to_string(static_cast<int>(range.first)) + ", " +
                                 std::to_string(static_cast<int>(range.second)) + "] packets/s",
                     f});
    }
  }

  // Reduced variants: a few gNBs close enough to contend and a narrow
  // recurrent width so training fits on one core. Rewards are noisy per
  // step, so a short discount horizon keeps the returns informative.
  Json desk_ppo = {{"gamma", 0.5}, {"hidden", 32}, {"minibatch_size", 100}};
  auto desk = [&](const std::string& name, int n, double spacing, std::pair<double, double> range,
                  const std::string& what) {
    ScenarioFile f;
    ScenarioConfig& s = f.scenario;
    s.name = name;
    s.num_gnbs = n;
    s.area_m = 200;
    const NodePosition tri[] = {{50, 50}, {50 + spacing, 50}, {50 + spacing / 2, 50 + spacing * 0.8660254037844386}};
    for (int i = 0; i < n; ++i) s.positions.push_back(tri[i]);
    s.traffic.lambda_range = range;
    f.ppo = desk_ppo;
    out.push_back({name, what, f});
  };
  desk("desk-high-poisson", 3, 25, {1000, 3000}, "3 gNBs 25 m apart, per-gNB rate uniform in [1000, 3000]");
  desk("desk-low-poisson", 3, 25, {10, 500}, "3 gNBs 25 m apart, per-gNB rate uniform in [10, 500]");
  desk("desk-pair-poisson", 2, 25, {1000, 3000}, "2 gNBs 25 m apart, per-gNB rate uniform in [1000, 3000]");
  return out;
}

inline Preset find_preset(const std::string& name) {
  for (auto& p : scenario_presets()) {
    if (p.name == name) return p;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

}  // namespace nrumac
