#pragma once

// Summary statistics over metrics tables from several systems.

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "nrumac/error.hpp"
#include "nrumac/rollout.hpp"

namespace nrumac {

struct CompareInput {
  std::string label;
  std::string scenario;      // scenario name, used for grouping
  std::string scenario_key;  // canonical scenario text; must agree within a group
  bool reference = false;    // the system improvements are measured against
  std::vector<EpisodeRow> rows;
};

/// Quantile with linear interpolation between order statistics,
/// position (n - 1) * p.
inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw ConfigError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct SummaryRow {
  std::string scenario;
  std::string system;
  std::string metric;
  double mean = 0, median = 0, q1 = 0, q3 = 0;
  double improvement_pct = 0;  // positive = better than the reference
};

inline const std::vector<std::string>& compared_metrics() {
  static const std::vector<std::string> m = {"throughput_bps", "mean_delay_s"};
  return m;
}

inline double metric_value(const EpisodeRow& r, const std::string& metric) {
  if (metric == "throughput_bps") return r.throughput_bps;
  if (metric == "mean_delay_s") return r.mean_delay_s;
  throw ConfigError("unknown metric " + metric);
}

/// Throughput improves upwards, delay downwards. A zero reference gives 0.
inline double improvement_pct(double value, double ref, const std::string& metric) {
  if (ref == 0.0) return 0.0;
  return metric == "mean_delay_s" ? (ref - value) / ref * 100.0 : (value - ref) / ref * 100.0;
}

struct CompareResult {
  std::vector<SummaryRow> summary;
  std::vector<std::string> scenarios;  // in first-seen order
};

inline CompareResult compare_systems(const std::vector<CompareInput>& inputs) {
  if (inputs.size() < 2) throw ConfigError("compare: need at least two inputs");
  CompareResult out;
  std::map<std::string, std::vector<const CompareInput*>> groups;
  for (const auto& in : inputs) {
    if (in.rows.empty()) throw ConfigError("compare: input '" + in.label + "' has no rows");
    auto& g = groups[in.scenario];
    if (g.empty()) out.scenarios.push_back(in.scenario);
    if (!g.empty() && g.front()->scenario_key != in.scenario_key) {
      throw ConfigError("compare: scenario mismatch for '" + in.scenario + "' between '" + g.front()->label +
                        "' and '" + in.label + "'");
    }
    g.push_back(&in);
  }
  for (const auto& name : out.scenarios) {
    const auto& g = groups[name];
    if (g.size() < 2) throw ConfigError("compare: scenario '" + name + "' has only one system");
    const CompareInput* ref = g.front();
    for (const auto* in : g) {
      if (in->reference) {
        ref = in;
        break;
      }
    }
    for (const auto& metric : compared_metrics()) {
      auto values = [&](const CompareInput& in) {
        std::vector<double> v;
        for (const auto& r : in.rows) v.push_back(metric_value(r, metric));
        return v;
      };
      auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
      };
      const double ref_mean = mean(values(*ref));
      for (const auto* in : g) {
        const auto v = values(*in);
        SummaryRow s;
        s.scenario = name;
        s.system = in->label;
        s.metric = metric;
        s.mean = mean(v);
        s.median = quantile(v, 0.5);
        s.q1 = quantile(v, 0.25);
        s.q3 = quantile(v, 0.75);
        s.improvement_pct = improvement_pct(s.mean, ref_mean, metric);
        out.summary.push_back(s);
      }
    }
  }
  return out;
}

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "scenario,system,metric,mean,median,q1,q3,improvement_pct\n";
  for (const auto& r : rows) {
    out << r.scenario << ',' << r.system << ',' << r.metric << ',' << format_double(r.mean) << ','
        << format_double(r.median) << ',' << format_double(r.q1) << ',' << format_double(r.q3) << ','
        << format_double(r.improvement_pct) << '\n';
  }
}

/// One value per line, for plotting tools.
inline void write_long_csv(std::ostream& out, const std::vector<CompareInput>& inputs) {
  out << "scenario,system,episode,gnb_id,metric,value\n";
  for (const auto& in : inputs) {
    for (const auto& metric : compared_metrics()) {
      for (const auto& r : in.rows) {
        out << in.scenario << ',' << in.label << ',' << r.episode << ',' << r.gnb_id << ',' << metric << ','
            << format_double(metric_value(r, metric)) << '\n';
      }
    }
  }
}

}  // namespace nrumac
