#pragma once

// Episode rollouts with a fixed controller and the per-episode metrics table.
// Nothing here depends on the learning code.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "nrumac/env.hpp"
#include "nrumac/error.hpp"
#include "nrumac/rng.hpp"
#include "nrumac/scenario.hpp"

namespace nrumac {

/// One row of metrics.csv: per-episode means for one gNB.
struct EpisodeRow {
  int episode = 0;
  int gnb_id = 0;
  double throughput_bps = 0.0;
  double mean_delay_s = 0.0;  // over delivered packets; 0 when none
  double own_airtime = 0.0;
  long long tx_failures = 0;
};

/// Picks actions during a rollout. `begin_episode` is called after every
/// reset. Returning an empty vector from `act` keeps the current settings.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual void begin_episode() {}
  virtual std::vector<ActionTuple> act(const std::vector<Observation>& obs) = 0;
};

/// Keeps whatever the environment installed at reset.
class KeepController final : public Controller {
 public:
  std::vector<ActionTuple> act(const std::vector<Observation>&) override { return {}; }
};

inline std::uint64_t episode_seed(std::uint64_t seed, int episode) {
  return derive_seed(seed, static_cast<std::uint64_t>(Stream::evaluation), static_cast<std::uint64_t>(episode));
}

inline std::vector<EpisodeRow> run_episodes(const ScenarioConfig& scenario, int episodes, std::uint64_t seed,
                                            Controller& ctl) {
  if (episodes < 1) throw ConfigError("episodes: must be >= 1");
  scenario.validate();
  std::vector<EpisodeRow> rows;
  for (int e = 0; e < episodes; ++e) {
    Env env;
    auto obs = env.reset(scenario, episode_seed(seed, e));
    ctl.begin_episode();
    const int n = env.num_agents();
    std::vector<double> bits(n, 0.0), delay(n, 0.0), air(n, 0.0);
    std::vector<long long> delivered(n, 0), failures(n, 0);
    int steps = 0;
    while (!env.done()) {
      const auto actions = ctl.act(obs);
      const StepResult r = actions.empty() ? env.step_keep() : env.step(actions);
      for (int i = 0; i < n; ++i) {
        const auto& m = r.metrics.nodes[static_cast<std::size_t>(i)];
        bits[i] += m.delivered_bits;
        delay[i] += m.delay_sum_s;
        delivered[i] += m.delivered_packets;
        air[i] += m.own_airtime_frac;
        failures[i] += m.tx_failures;
      }
      ++steps;
      obs = r.observations;
    }
    const double duration_s = static_cast<double>(steps) * static_cast<double>(scenario.step_us()) * 1e-6;
    for (int i = 0; i < n; ++i) {
      EpisodeRow row;
      row.episode = e;
      row.gnb_id = i;
      row.throughput_bps = bits[i] / duration_s;
      row.mean_delay_s = delivered[i] > 0 ? delay[i] / static_cast<double>(delivered[i]) : 0.0;
      row.own_airtime = air[i] / steps;
      row.tx_failures = failures[i];
      rows.push_back(row);
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* kMetricsHeader = "episode,gnb_id,throughput_bps,mean_delay_s,own_airtime,tx_failures";

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  if (!std::isfinite(v)) throw InvariantError("non-finite value in CSV output");
  char buf[32];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline void write_metrics_csv(std::ostream& out, const std::vector<EpisodeRow>& rows) {
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    out << r.episode << ',' << r.gnb_id << ',' << format_double(r.throughput_bps) << ','
        << format_double(r.mean_delay_s) << ',' << format_double(r.own_airtime) << ',' << r.tx_failures << '\n';
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::vector<EpisodeRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw ConfigError(path + ": not a metrics CSV");
  std::vector<EpisodeRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c = split_csv_line(line);
    if (c.size() != 6) throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 6 columns");
    try {
      rows.push_back({std::stoi(c[0]), std::stoi(c[1]), std::stod(c[2]), std::stod(c[3]), std::stod(c[4]),
                      std::stoll(c[5])});
    } catch (const std::exception&) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return rows;
}

}  // namespace nrumac
