#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

#include "nrumac/harness.hpp"

using namespace nrumac;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("nrumac_harness_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const std::string& path) {
  const std::string s = slurp(path);
  return static_cast<int>(std::count(s.begin(), s.end(), '\n'));
}

ScenarioFile pair_scenario() {
  return parse_scenario_text(R"({"name": "pair", "num_gnbs": 2, "traffic": "poisson", "lambda": 1500,
    "episode_s": 1.0, "positions": [[50, 50], [70, 50]],
    "ppo": {"hidden": 8, "minibatch_size": 5, "epochs": 2}})");
}

RunOptions options(const std::string& command, const ScenarioFile& f, const std::string& out) {
  RunOptions o;
  o.command = command;
  o.scenario = f;
  o.scenario_path = "inline";
  o.out_dir = out;
  return o;
}

std::string error_of(const std::string& text) {
  try {
    parse_scenario_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

// ---------------------------------------------------------------------------
// Scenario files

TEST(ScenarioFile, MinimalFileGetsDefaults) {
  const ScenarioFile f = parse_scenario_text(R"({"num_gnbs": 2, "traffic": "poisson", "lambda": 1000})");
  const ScenarioConfig& s = f.scenario;
  EXPECT_EQ(s.num_gnbs, 2);
  EXPECT_EQ(s.traffic.kind, TrafficKind::poisson);
  EXPECT_DOUBLE_EQ(*s.traffic.lambda, 1000.0);
  EXPECT_DOUBLE_EQ(s.area_m, 200.0);
  EXPECT_DOUBLE_EQ(s.step_s, 0.1);
  EXPECT_DOUBLE_EQ(s.radio.bandwidth_hz, 20e6);
  EXPECT_EQ(s.lbt.cca_slot_us, 9);
  EXPECT_EQ(s.lbt.d_slots, 3);
  EXPECT_TRUE(f.ppo.empty());
}

TEST(ScenarioFile, RangeErrorsNameKeyAndRange) {
  const std::string e = error_of(R"({"num_gnbs": 2, "lambda": 5000})");
  EXPECT_NE(e.find("lambda"), std::string::npos);
  EXPECT_NE(e.find("[0, 3000]"), std::string::npos);
  EXPECT_NE(error_of(R"({"num_gnbs": 9})").find("num_gnbs"), std::string::npos);
  EXPECT_NE(error_of(R"({"lbt": {"d_slots": -1}})").find("d_slots"), std::string::npos);
}

TEST(ScenarioFile, StrictParsing) {
  EXPECT_NE(error_of(R"({"num_gnbs": 2, "num_gnbs": 3})").find("duplicate key 'num_gnbs'"), std::string::npos);
  EXPECT_NE(error_of(R"({"radio": {"bandwidth_hz": 1, "bandwidth_hz": 2}})").find("duplicate"), std::string::npos);
  EXPECT_NE(error_of(R"({"colour": 1})").find("unknown key 'colour'"), std::string::npos);
  EXPECT_NE(error_of(R"({"lbt": {"slot": 9}})").find("unknown key 'lbt.slot'"), std::string::npos);
  EXPECT_NE(error_of(R"({"ppo": {"lr": 0.1, "momentum": 1}})").find("ppo.momentum"), std::string::npos);
  EXPECT_NE(error_of(R"({"num_gnbs": "two"})").find("num_gnbs: wrong type"), std::string::npos);
  EXPECT_NE(error_of(R"({"traffic": "cbr"})").find("traffic"), std::string::npos);
  EXPECT_NE(error_of(R"({"num_gnbs": 2,)").find("parse error"), std::string::npos);
  EXPECT_NE(error_of(R"({"lambda": 10, "lambda_range": [1, 2]})").find("only one"), std::string::npos);
}

TEST(ScenarioFile, JsonRoundTrip) {
  ScenarioFile f = pair_scenario();
  const Json j = scenario_to_json(f.scenario, f.ppo);
  const ScenarioFile g = parse_scenario_text(j.dump());
  EXPECT_EQ(scenario_to_json(g.scenario, g.ppo), j);
}

TEST(ScenarioFile, PpoBlockOverridesDefaults) {
  const PpoConfig c = ppo_from_json(pair_scenario().ppo);
  EXPECT_EQ(c.hidden, 8);
  EXPECT_EQ(c.minibatch_size, 5);
  EXPECT_EQ(c.epochs, 2);
  EXPECT_DOUBLE_EQ(c.gamma, 0.99);
  EXPECT_THROW(ppo_from_json(Json{{"gamma", 2.0}}), ConfigError);
}

// ---------------------------------------------------------------------------
// Presets

TEST(Presets, DensityRanges) {
  const auto high = find_preset("high-poisson").file.scenario;
  EXPECT_EQ(high.num_gnbs, 6);
  EXPECT_DOUBLE_EQ(high.area_m, 200.0);
  EXPECT_EQ(*high.traffic.lambda_range, std::make_pair(1000.0, 3000.0));
  EXPECT_EQ(*find_preset("low-poisson").file.scenario.traffic.lambda_range, std::make_pair(10.0, 500.0));
  EXPECT_EQ(*find_preset("medium-arvr").file.scenario.traffic.lambda_range, std::make_pair(500.0, 1000.0));
  EXPECT_EQ(*find_preset("random-poisson").file.scenario.traffic.lambda_range, std::make_pair(0.0, 3000.0));
  EXPECT_EQ(find_preset("low-arvr").file.scenario.traffic.kind, TrafficKind::arvr);
  EXPECT_THROW(find_preset("nope"), ConfigError);
}

TEST(Presets, AllParseBack) {
  int full = 0, desk = 0;
  for (const auto& p : scenario_presets()) {
    const ScenarioFile f = parse_scenario_text(scenario_to_json(p.file.scenario, p.file.ppo).dump());
    EXPECT_EQ(f.scenario.name, p.name);
    ppo_from_json(f.ppo);
    const auto d = make_deployment(f.scenario);
    for (const auto& t : d.traffic) {
      EXPECT_GE(t.offered_pps(), f.scenario.traffic.lambda_range->first - 1e-9);
      EXPECT_LE(t.offered_pps(), f.scenario.traffic.lambda_range->second + 1e-9);
    }
    if (f.scenario.num_gnbs == 6) ++full;
    if (f.scenario.num_gnbs >= 2 && f.scenario.num_gnbs <= 3) ++desk;
  }
  EXPECT_EQ(full, 8);
  EXPECT_GE(desk, 2);
}

// ---------------------------------------------------------------------------
// train

TEST(Train, DtdeOutputShape) {
  TempDir tmp;
  RunOptions o = options("train", pair_scenario(), tmp / "dtde");
  o.iters = 30;
  std::ostringstream log;
  cmd_train(o, log);
  EXPECT_TRUE(fs::exists(tmp / "dtde/policy_0.net"));
  EXPECT_TRUE(fs::exists(tmp / "dtde/policy_1.net"));
  EXPECT_FALSE(fs::exists(tmp / "dtde/policy_2.net"));
  EXPECT_EQ(count_lines(tmp / "dtde/curve.csv"), 1 + 30 * 2);
  EXPECT_EQ(slurp(tmp / "dtde/curve.csv").rfind(std::string(kCurveHeader) + "\n", 0), 0u);
  const Json m = read_manifest(tmp / "dtde/manifest.json");
  EXPECT_EQ(m["command"], "train");
  EXPECT_EQ(m["algo"], "dtde");
  EXPECT_EQ(m["version"], kToolVersion);
  EXPECT_TRUE(m["finished_utc"].is_string());
  EXPECT_EQ(m["ppo"]["hidden"], 8);
}

TEST(Train, CtceWritesOnePolicy) {
  TempDir tmp;
  ScenarioFile f = pair_scenario();
  f.ppo["minibatch_size"] = 1000;
  RunOptions o = options("train", f, tmp / "ctce");
  o.algo = Algo::ctce;
  o.iters = 3;
  std::ostringstream log;
  cmd_train(o, log);
  EXPECT_NE(log.str().find("full-batch"), std::string::npos);
  EXPECT_TRUE(fs::exists(tmp / "ctce/policy_0.net"));
  EXPECT_FALSE(fs::exists(tmp / "ctce/policy_1.net"));
  EXPECT_EQ(count_lines(tmp / "ctce/curve.csv"), 1 + 3);
}

TEST(Train, ResumeReproducesUninterruptedRun) {
  TempDir tmp;
  std::ostringstream log;
  RunOptions full = options("train", pair_scenario(), tmp / "full");
  full.iters = 7;
  full.checkpoint_every = 2;
  cmd_train(full, log);

  RunOptions part = full;
  part.out_dir = tmp / "part";
  part.iters = 4;
  cmd_train(part, log);
  // Simulate a crash after rows of an unsnapshotted iteration were written.
  {
    std::ofstream c(tmp / "part/curve.csv", std::ios::app);
    c << "4,0,9,9,9,9\n";
  }
  part.iters = 7;
  part.resume = true;
  cmd_train(part, log);

  EXPECT_EQ(slurp(tmp / "full/curve.csv"), slurp(tmp / "part/curve.csv"));
  EXPECT_EQ(slurp(tmp / "full/policy_0.net"), slurp(tmp / "part/policy_0.net"));
  EXPECT_EQ(slurp(tmp / "full/policy_1.net"), slurp(tmp / "part/policy_1.net"));
  EXPECT_EQ(slurp(tmp / "full/checkpoint.txt"), slurp(tmp / "part/checkpoint.txt"));
}

TEST(Train, ResumeWithoutCheckpointFails) {
  TempDir tmp;
  RunOptions o = options("train", pair_scenario(), tmp / "none");
  o.iters = 2;
  o.resume = true;
  EXPECT_THROW(cmd_train(o), ConfigError);
}

// ---------------------------------------------------------------------------
// eval and baseline

TEST(Eval, ShapeDeterminismAndBound) {
  TempDir tmp;
  ScenarioFile six;
  six.scenario.name = "six";
  six.scenario.num_gnbs = 6;
  six.scenario.traffic.lambda_range = std::make_pair(1000.0, 3000.0);
  six.scenario.episode_s = 0.3;
  six.ppo = {{"hidden", 8}};
  RunOptions t = options("train", six, tmp / "pol");
  t.iters = 0;
  std::ostringstream log;
  cmd_train(t, log);

  RunOptions e = options("eval", six, tmp / "ev1");
  e.policy_dir = tmp / "pol";
  e.episodes = 10;
  cmd_eval(e);
  e.out_dir = tmp / "ev2";
  cmd_eval(e);
  EXPECT_EQ(count_lines(tmp / "ev1/metrics.csv"), 1 + 60);
  EXPECT_EQ(slurp(tmp / "ev1/metrics.csv"), slurp(tmp / "ev2/metrics.csv"));
  const double bound = phy_rate_bps(28, 20e6);
  for (const auto& r : read_metrics_csv(tmp / "ev1/metrics.csv")) {
    EXPECT_LE(r.throughput_bps, bound);
    EXPECT_GE(r.throughput_bps, 0.0);
  }
}

TEST(Eval, AgentCountMismatch) {
  TempDir tmp;
  RunOptions t = options("train", pair_scenario(), tmp / "pol");
  t.iters = 0;
  std::ostringstream log;
  cmd_train(t, log);
  ScenarioFile three = pair_scenario();
  three.scenario.num_gnbs = 3;
  three.scenario.positions.push_back({60, 60});
  RunOptions e = options("eval", three, tmp / "ev");
  e.policy_dir = tmp / "pol";
  try {
    cmd_eval(e);
    FAIL();
  } catch (const ConfigError& err) {
    EXPECT_NE(std::string(err.what()).find("agent-count mismatch"), std::string::npos);
  }
  EXPECT_THROW(load_policies(tmp / "missing", 2), ConfigError);
}

TEST(Baseline, SaturatedSingleGnbDutyCycle) {
  ScenarioConfig s;
  s.num_gnbs = 1;
  s.traffic.lambda = 0;
  s.positions = {{100, 100}};
  s.ue_positions = {{{105, 100}}};
  s.initial_backlog_packets = 200000;
  s.episode_s = 2.0;
  const auto rows = run_baseline(s, 1, 5);
  ASSERT_EQ(rows.size(), 1u);
  // MCOT / (MCOT + defer + mean backoff), CW 15, 9 us slots, 16 + 3 * 9 us defer.
  const double duty = 8000.0 / (8000.0 + 43.0 + 7.0 * 9.0);
  const double ratio = rows[0].throughput_bps / (phy_rate_bps(28, s.radio.bandwidth_hz) * duty);
  EXPECT_GE(ratio, 0.9);
  EXPECT_LE(ratio, 1.0);
}

TEST(Baseline, ZeroTraffic) {
  ScenarioConfig s;
  s.num_gnbs = 3;
  s.traffic.lambda = 0;
  s.episode_s = 1.0;
  for (const auto& r : run_baseline(s, 2, 1)) {
    EXPECT_EQ(r.throughput_bps, 0.0);
    EXPECT_EQ(r.own_airtime, 0.0);
    EXPECT_EQ(r.mean_delay_s, 0.0);
    EXPECT_EQ(r.tx_failures, 0);
  }
}

TEST(Baseline, SixColocatedNodesShareAirtime) {
  ScenarioConfig s;
  s.num_gnbs = 6;
  s.traffic.lambda = 0;
  s.initial_backlog_packets = 1000000;
  s.episode_s = 10.0;
  for (int i = 0; i < 6; ++i) s.positions.push_back({100.0 + i, 100.0});
  std::vector<double> air(6, 0.0);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (const auto& r : run_baseline(s, 1, seed)) air[static_cast<std::size_t>(r.gnb_id)] += r.own_airtime;
  }
  double total = 0;
  for (double a : air) total += a;
  ASSERT_GT(total, 0.0);
  for (double a : air) EXPECT_NEAR(a / total, 1.0 / 6.0, 0.1 / 6.0);
}

// ---------------------------------------------------------------------------
// compare

namespace {

/// Quartiles by weighting the two neighbouring order statistics.
double oracle_quantile(std::vector<double> v, double p) {
  const std::size_t n = v.size();
  const double pos = p * static_cast<double>(n - 1);
  const std::size_t k = static_cast<std::size_t>(pos);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  const double a = v[k];
  if (k + 1 >= n) return a;
  const double b = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(k) + 1, v.end());
  const double w = pos - static_cast<double>(k);
  return (1.0 - w) * a + w * b;
}

void run_baseline_cmd(const ScenarioFile& f, const std::string& out, std::uint64_t seed, const std::string& label) {
  RunOptions o = options("baseline", f, out);
  o.episodes = 2;
  o.seed = seed;
  o.label = label;
  cmd_baseline(o);
}

}  // namespace

TEST(Compare, QuantileMatchesOracle) {
  std::mt19937_64 g(12);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + g() % 40);
    for (auto& x : v) x = u(g);
    for (double p : {0.25, 0.5, 0.75}) EXPECT_NEAR(quantile(v, p), oracle_quantile(v, p), 1e-12);
  }
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile({7}, 0.75), 7.0);
}

TEST(Compare, IdenticalInputsGiveZeroImprovement) {
  TempDir tmp;
  ScenarioFile f = pair_scenario();
  run_baseline_cmd(f, tmp / "a", 1, "sys");
  RunOptions c = options("compare", f, tmp / "cmp");
  c.inputs = {tmp / "a/metrics.csv", tmp / "a/metrics.csv"};
  const CompareResult r = cmd_compare(c);
  ASSERT_EQ(r.summary.size(), 4u);
  for (const auto& s : r.summary) EXPECT_EQ(s.improvement_pct, 0.0);
  EXPECT_EQ(r.summary[1].system, "sys#2");
  EXPECT_EQ(count_lines(tmp / "cmp/long.csv"), 1 + 2 * 2 * 4);
}

TEST(Compare, SummaryMatchesOracleAndImprovementSign) {
  TempDir tmp;
  ScenarioFile f = pair_scenario();
  run_baseline_cmd(f, tmp / "a", 1, "base");
  run_baseline_cmd(f, tmp / "b", 2, "other");
  RunOptions c = options("compare", f, tmp / "cmp");
  c.inputs = {tmp / "b/metrics.csv", tmp / "a/metrics.csv"};
  const CompareResult r = cmd_compare(c);
  const auto a = read_metrics_csv(tmp / "a/metrics.csv");
  const auto b = read_metrics_csv(tmp / "b/metrics.csv");
  auto col = [](const std::vector<EpisodeRow>& rows, bool th) {
    std::vector<double> v;
    for (const auto& x : rows) v.push_back(th ? x.throughput_bps : x.mean_delay_s);
    return v;
  };
  for (const auto& s : r.summary) {
    const auto v = col(s.system == "other" ? b : a, s.metric == "throughput_bps");
    EXPECT_NEAR(s.q1, oracle_quantile(v, 0.25), 1e-9 * std::abs(s.q1) + 1e-15);
    EXPECT_NEAR(s.median, oracle_quantile(v, 0.5), 1e-9 * std::abs(s.median) + 1e-15);
    EXPECT_NEAR(s.q3, oracle_quantile(v, 0.75), 1e-9 * std::abs(s.q3) + 1e-15);
    // Both inputs are baselines; the first one listed is the reference.
    const auto ref = col(b, s.metric == "throughput_bps");
    double m = 0, mr = 0;
    for (double x : v) m += x / static_cast<double>(v.size());
    for (double x : ref) mr += x / static_cast<double>(ref.size());
    const double expect = s.metric == "throughput_bps" ? (m - mr) / mr * 100 : (mr - m) / mr * 100;
    EXPECT_NEAR(s.improvement_pct, expect, 1e-9);
  }
}

TEST(Compare, CoversTheDensityPresets) {
  TempDir tmp;
  RunOptions c;
  c.out_dir = tmp / "cmp";
  for (const char* name : {"low-poisson", "medium-poisson", "high-poisson", "random-poisson"}) {
    ScenarioFile f = find_preset(name).file;
    f.scenario.episode_s = 0.2;
    run_baseline_cmd(f, tmp / (std::string(name) + "-a"), 1, "base");
    run_baseline_cmd(f, tmp / (std::string(name) + "-b"), 2, "other");
    c.inputs.push_back(tmp / (std::string(name) + "-a/metrics.csv"));
    c.inputs.push_back(tmp / (std::string(name) + "-b/metrics.csv"));
  }
  const CompareResult r = cmd_compare(c);
  EXPECT_EQ(r.scenarios, (std::vector<std::string>{"low-poisson", "medium-poisson", "high-poisson", "random-poisson"}));
  const std::string summary = slurp(tmp / "cmp/summary.csv");
  for (const char* d : {"low-poisson,", "medium-poisson,", "high-poisson,", "random-poisson,"}) {
    EXPECT_NE(summary.find(d), std::string::npos);
  }
}

TEST(Compare, ScenarioMismatchFails) {
  TempDir tmp;
  ScenarioFile f = pair_scenario();
  run_baseline_cmd(f, tmp / "a", 1, "base");
  f.scenario.traffic.lambda = 1000.0;
  run_baseline_cmd(f, tmp / "b", 1, "other");
  RunOptions c;
  c.out_dir = tmp / "cmp";
  c.inputs = {tmp / "a/metrics.csv", tmp / "b/metrics.csv"};
  try {
    cmd_compare(c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("scenario mismatch"), std::string::npos);
  }
  c.inputs = {tmp / "a/metrics.csv"};
  EXPECT_THROW(cmd_compare(c), ConfigError);
}

// ---------------------------------------------------------------------------
// replay

TEST(Replay, EveryCommandIsByteIdentical) {
  TempDir tmp;
  std::ostringstream log;
  ScenarioFile f = pair_scenario();
  RunOptions t = options("train", f, tmp / "train");
  t.iters = 3;
  cmd_train(t, log);
  RunOptions e = options("eval", f, tmp / "eval");
  e.policy_dir = tmp / "train";
  e.episodes = 2;
  cmd_eval(e);
  run_baseline_cmd(f, tmp / "base", 3, "");
  RunOptions c;
  c.out_dir = tmp / "cmp";
  c.inputs = {tmp / "base/metrics.csv", tmp / "eval/metrics.csv"};
  cmd_compare(c);

  const std::pair<const char*, std::vector<const char*>> runs[] = {
      {"train", {"curve.csv", "policy_0.net", "policy_1.net"}},
      {"eval", {"metrics.csv"}},
      {"base", {"metrics.csv"}},
      {"cmp", {"summary.csv", "long.csv"}}};
  for (const auto& [dir, files] : runs) {
    const std::string again = tmp / (std::string(dir) + "-replay");
    cmd_replay(tmp / (std::string(dir) + "/manifest.json"), again, log);
    for (const char* file : files) {
      EXPECT_EQ(slurp(tmp / (std::string(dir) + "/" + file)), slurp(again + "/" + file)) << dir << "/" << file;
    }
    EXPECT_EQ(read_manifest(again + "/manifest.json")["command"], read_manifest(tmp / (std::string(dir) + "/manifest.json"))["command"]);
  }
}
