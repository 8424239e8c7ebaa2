#pragma once

// Command implementations behind the CLI: train, eval, baseline, compare and
// replay. Every command writes its outputs plus a manifest.json into one
// directory; a manifest alone is enough to rerun the command.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "nrumac/baseline.hpp"
#include "nrumac/compare.hpp"
#include "nrumac/ppo.hpp"
#include "nrumac/scenario_io.hpp"

namespace nrumac {

namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Learner settings from JSON

inline PpoConfig ppo_from_json(const Json& j, PpoConfig c = {}) {
  using detail::read_key;
  read_key(j, "gamma", c.gamma, "ppo");
  read_key(j, "clip_epsilon", c.clip_epsilon, "ppo");
  read_key(j, "entropy_coeff", c.entropy_coeff, "ppo");
  read_key(j, "minibatch_size", c.minibatch_size, "ppo");
  read_key(j, "epochs", c.epochs, "ppo");
  read_key(j, "lr", c.lr, "ppo");
  read_key(j, "iterations", c.iterations, "ppo");
  read_key(j, "hidden", c.hidden, "ppo");
  read_key(j, "layers", c.layers, "ppo");
  read_key(j, "seq_len", c.seq_len, "ppo");
  read_key(j, "standardize_advantages", c.standardize_advantages, "ppo");
  c.validate();
  return c;
}

inline Json ppo_to_json(const PpoConfig& c) {
  return {{"gamma", c.gamma},         {"clip_epsilon", c.clip_epsilon}, {"entropy_coeff", c.entropy_coeff},
          {"minibatch_size", c.minibatch_size}, {"epochs", c.epochs},   {"lr", c.lr},
          {"iterations", c.iterations}, {"hidden", c.hidden},           {"layers", c.layers},
          {"seq_len", c.seq_len},     {"standardize_advantages", c.standardize_advantages}};
}

inline Algo parse_algo(const std::string& s) {
  if (s == "dtde") return Algo::dtde;
  if (s == "ctce") return Algo::ctce;
  throw ConfigError("algo: must be dtde or ctce");
}

// ---------------------------------------------------------------------------
// Options and manifest

struct RunOptions {
  std::string command;  // train | eval | baseline | compare
  std::string scenario_path;
  ScenarioFile scenario;
  std::uint64_t seed = 1;
  Algo algo = Algo::dtde;
  int iters = -1;  // -1: from the scenario's ppo block or the default
  int episodes = 10;
  int checkpoint_every = 10;
  bool resume = false;
  std::string policy_dir;
  std::vector<std::string> inputs;
  std::string label;
  std::string out_dir;
};

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_text_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << text;
    if (!out) throw ConfigError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Json manifest_json(const RunOptions& o, const Json& extra, const std::string& started,
                          const std::string& finished) {
  Json m;
  m["tool"] = "nrumac";
  m["version"] = kToolVersion;
  m["command"] = o.command;
  m["label"] = o.label;
  m["out_dir"] = o.out_dir;
  m["started_utc"] = started;
  m["finished_utc"] = finished.empty() ? Json() : Json(finished);
  if (o.command != "compare") {
    m["scenario_path"] = o.scenario_path;
    m["scenario"] = scenario_to_json(o.scenario.scenario, o.scenario.ppo);
    m["seed"] = o.seed;
  }
  if (o.command == "train") {
    m["algo"] = to_string(o.algo);
    m["iters"] = o.iters;
    m["checkpoint_every"] = o.checkpoint_every;
  }
  if (o.command == "eval") m["policy_dir"] = o.policy_dir;
  if (o.command == "eval" || o.command == "baseline") m["episodes"] = o.episodes;
  if (o.command == "compare") m["inputs"] = o.inputs;
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  return m;
}

inline void write_manifest(const RunOptions& o, const Json& extra, const std::string& started,
                           const std::string& finished = "") {
  write_text_atomic(fs::path(o.out_dir) / "manifest.json", manifest_json(o, extra, started, finished).dump(2) + "\n");
}

inline Json read_manifest(const fs::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": malformed manifest: " + e.what());
  }
}

/// Rebuilds the options of a recorded run. The scenario comes from the
/// manifest itself, not from the original file.
inline RunOptions options_from_manifest(const Json& m) {
  RunOptions o;
  try {
    o.command = m.at("command").get<std::string>();
    o.label = m.value("label", std::string());
    if (o.command != "compare") {
      o.scenario_path = m.value("scenario_path", std::string());
      o.scenario = scenario_from_json(m.at("scenario"));
      o.seed = m.at("seed").get<std::uint64_t>();
    }
    if (o.command == "train") {
      o.algo = parse_algo(m.at("algo").get<std::string>());
      o.iters = m.at("iters").get<int>();
      o.checkpoint_every = m.value("checkpoint_every", 10);
    } else if (o.command == "eval") {
      o.policy_dir = m.at("policy_dir").get<std::string>();
      o.episodes = m.at("episodes").get<int>();
    } else if (o.command == "baseline") {
      o.episodes = m.at("episodes").get<int>();
    } else if (o.command == "compare") {
      o.inputs = m.at("inputs").get<std::vector<std::string>>();
    } else {
      throw ConfigError("manifest: unknown command '" + o.command + "'");
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
  return o;
}

inline void prepare_out_dir(const RunOptions& o) {
  if (o.out_dir.empty()) throw ConfigError("--out: output directory required");
  fs::create_directories(o.out_dir);
}

// ---------------------------------------------------------------------------
// train

inline fs::path policy_file(const fs::path& dir, std::size_t i) { return dir / ("policy_" + std::to_string(i) + ".net"); }

inline constexpr const char* kCurveHeader = "iteration,agent_id,mean_reward,policy_loss,value_loss,entropy";

inline std::string curve_line(const CurveRow& r) {
  return std::to_string(r.iteration) + ',' + std::to_string(r.agent_id) + ',' + format_double(r.mean_reward) + ',' +
         format_double(r.policy_loss) + ',' + format_double(r.value_loss) + ',' + format_double(r.entropy) + '\n';
}

inline PpoConfig effective_ppo(const RunOptions& o) {
  PpoConfig c = ppo_from_json(o.scenario.ppo);
  if (o.iters >= 0) c.iterations = o.iters;
  c.validate();
  return c;
}

inline void save_policies(const Trainer& tr, const fs::path& dir) {
  for (std::size_t i = 0; i < tr.learners().size(); ++i) {
    std::ostringstream s;
    save_net(s, tr.learners()[i].policy());
    write_text_atomic(policy_file(dir, i), s.str());
  }
}

inline void save_checkpoint(const Trainer& tr, const fs::path& dir) {
  std::ostringstream s;
  tr.save(s);
  write_text_atomic(dir / "checkpoint.txt", s.str());
}

/// Curve lines written before the checkpoint's iteration.
inline std::string curve_prefix(const fs::path& path, int iteration) {
  std::ifstream in(path);
  std::string out = std::string(kCurveHeader) + "\n", line;
  if (!in) return out;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (std::stoi(line.substr(0, line.find(','))) < iteration) out += line + "\n";
  }
  return out;
}

inline void cmd_train(RunOptions o, std::ostream& log = std::cerr) {
  o.command = "train";
  prepare_out_dir(o);
  if (o.label.empty()) o.label = to_string(o.algo);
  if (o.checkpoint_every < 1) throw ConfigError("checkpoint_every: must be >= 1");
  const PpoConfig cfg = effective_ppo(o);
  if (o.iters < 0) o.iters = cfg.iterations;
  const fs::path dir(o.out_dir);
  const std::string started = utc_now();
  const Json extra = {{"ppo", ppo_to_json(cfg)}};

  Trainer tr(o.scenario.scenario, cfg, o.algo, o.seed);
  std::string curve = std::string(kCurveHeader) + "\n";
  if (o.resume) {
    const fs::path cp = dir / "checkpoint.txt";
    if (!fs::exists(cp)) throw ConfigError("--resume: no checkpoint in " + o.out_dir);
    std::ifstream in(cp);
    tr.load(in);
    curve = curve_prefix(dir / "curve.csv", tr.iteration());
    log << "resuming at iteration " << tr.iteration() << "\n";
  }
  write_manifest(o, extra, started);
  write_text_atomic(dir / "curve.csv", curve);
  std::ofstream curve_out(dir / "curve.csv", std::ios::app | std::ios::binary);
  bool warned = false;
  while (tr.iteration() < cfg.iterations) {
    const auto rows = tr.run_iteration();
    if (tr.warned_full_batch() && !warned) {
      log << "warning: episode shorter than minibatch_size; using one full-batch update per epoch\n";
      warned = true;
    }
    double mr = 0.0;
    for (const auto& r : rows) {
      curve_out << curve_line(r);
      mr += r.mean_reward;
    }
    curve_out.flush();
    log << "iteration " << rows.front().iteration << " mean_reward " << mr / static_cast<double>(rows.size()) << "\n";
    if (tr.iteration() % o.checkpoint_every == 0 || tr.iteration() == cfg.iterations) {
      save_checkpoint(tr, dir);
      save_policies(tr, dir);
    }
  }
  if (cfg.iterations == 0) {
    save_checkpoint(tr, dir);
    save_policies(tr, dir);
  }
  write_manifest(o, extra, started, utc_now());
}

// ---------------------------------------------------------------------------
// eval

/// Greedy execution of saved policies.
class PolicyController final : public Controller {
 public:
  PolicyController(std::vector<Net> nets, AgentLayout layout) : layout_(layout) {
    for (auto& n : nets) actors_.emplace_back(std::move(n));
  }

  void begin_episode() override {
    for (auto& a : actors_) a.reset();
  }

  std::vector<ActionTuple> act(const std::vector<Observation>& obs) override {
    const auto in = layout_.inputs(obs);
    std::vector<std::vector<int>> acts;
    for (std::size_t i = 0; i < actors_.size(); ++i) acts.push_back(actors_[i].act(in[i], nullptr));
    return layout_.actions(acts);
  }

 private:
  AgentLayout layout_;
  std::vector<Actor> actors_;
};

struct LoadedPolicies {
  std::vector<Net> nets;
  AgentLayout layout;
};

/// Loads policy_<i>.net files and works out the agent layout from their shapes.
inline LoadedPolicies load_policies(const fs::path& dir, int gnbs) {
  LoadedPolicies p;
  for (std::size_t i = 0; fs::exists(policy_file(dir, i)); ++i) {
    std::ifstream in(policy_file(dir, i));
    p.nets.push_back(load_net(in));
  }
  if (p.nets.empty()) throw ConfigError("no policy files in " + dir.string());
  const auto agents_in = [](const Net& n) { return n.spec().input / kObsDim; };
  const auto& s0 = p.nets.front().spec();
  const bool per_gnb = std::all_of(p.nets.begin(), p.nets.end(), [](const Net& n) {
    return n.spec().input == kObsDim && n.spec().heads == action_heads(1);
  });
  if (per_gnb && static_cast<int>(p.nets.size()) == gnbs) {
    p.layout = {Algo::dtde, gnbs};
  } else if (p.nets.size() == 1 && s0.input == kObsDim * gnbs && s0.heads == action_heads(gnbs)) {
    p.layout = {Algo::ctce, gnbs};
  } else {
    const int agents = p.nets.size() == 1 ? agents_in(p.nets.front()) : static_cast<int>(p.nets.size());
    throw ConfigError("policy/scenario agent-count mismatch: policies in " + dir.string() + " control " +
                      std::to_string(agents) + " gNB(s), scenario has " + std::to_string(gnbs));
  }
  return p;
}

inline void cmd_eval(RunOptions o) {
  o.command = "eval";
  prepare_out_dir(o);
  const std::string started = utc_now();
  LoadedPolicies p = load_policies(o.policy_dir, o.scenario.scenario.num_gnbs);
  if (o.label.empty()) {
    const fs::path pm = fs::path(o.policy_dir) / "manifest.json";
    o.label = fs::exists(pm) ? read_manifest(pm).value("label", std::string(to_string(p.layout.algo)))
                             : std::string(to_string(p.layout.algo));
  }
  write_manifest(o, {}, started);
  PolicyController ctl(std::move(p.nets), p.layout);
  const auto rows = run_episodes(o.scenario.scenario, o.episodes, o.seed, ctl);
  std::ostringstream s;
  write_metrics_csv(s, rows);
  write_text_atomic(fs::path(o.out_dir) / "metrics.csv", s.str());
  write_manifest(o, {}, started, utc_now());
}

// ---------------------------------------------------------------------------
// baseline

inline void cmd_baseline(RunOptions o) {
  o.command = "baseline";
  prepare_out_dir(o);
  if (o.label.empty()) o.label = "baseline";
  const std::string started = utc_now();
  write_manifest(o, {}, started);
  const auto rows = run_baseline(o.scenario.scenario, o.episodes, o.seed);
  std::ostringstream s;
  write_metrics_csv(s, rows);
  write_text_atomic(fs::path(o.out_dir) / "metrics.csv", s.str());
  write_manifest(o, {}, started, utc_now());
}

// ---------------------------------------------------------------------------
// compare

/// Reads a metrics CSV and the manifest next to it.
inline CompareInput load_compare_input(const std::string& csv) {
  const fs::path mpath = fs::path(csv).parent_path() / "manifest.json";
  if (!fs::exists(mpath)) throw ConfigError(csv + ": no manifest.json beside it; cannot identify the scenario");
  const Json m = read_manifest(mpath);
  CompareInput in;
  try {
    Json sc = m.at("scenario");
    sc.erase("ppo");
    in.scenario = sc.at("name").get<std::string>();
    in.scenario_key = sc.dump();
    in.label = m.value("label", std::string());
    if (in.label.empty()) in.label = m.value("command", std::string("system"));
    in.reference = m.value("command", std::string()) == "baseline";
  } catch (const Json::exception& e) {
    throw ConfigError(mpath.string() + ": " + e.what());
  }
  in.rows = read_metrics_csv(csv);
  return in;
}

inline CompareResult cmd_compare(RunOptions o) {
  o.command = "compare";
  prepare_out_dir(o);
  if (o.label.empty()) o.label = "compare";
  const std::string started = utc_now();
  std::vector<CompareInput> inputs;
  for (const auto& path : o.inputs) inputs.push_back(load_compare_input(path));
  // Distinct labels within a scenario.
  std::vector<std::string> given;
  for (const auto& in : inputs) given.push_back(in.label);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    int dup = 1;
    for (std::size_t j = 0; j < i; ++j) dup += inputs[j].scenario == inputs[i].scenario && given[j] == given[i];
    if (dup > 1) inputs[i].label += "#" + std::to_string(dup);
  }
  write_manifest(o, {}, started);
  CompareResult r = compare_systems(inputs);
  std::ostringstream s, l;
  write_summary_csv(s, r.summary);
  write_long_csv(l, inputs);
  write_text_atomic(fs::path(o.out_dir) / "summary.csv", s.str());
  write_text_atomic(fs::path(o.out_dir) / "long.csv", l.str());
  write_manifest(o, {}, started, utc_now());
  return r;
}

// ---------------------------------------------------------------------------
// replay

inline void run_command(const RunOptions& o, std::ostream& log = std::cerr) {
  if (o.command == "train") {
    cmd_train(o, log);
  } else if (o.command == "eval") {
    cmd_eval(o);
  } else if (o.command == "baseline") {
    cmd_baseline(o);
  } else if (o.command == "compare") {
    cmd_compare(o);
  } else {
    throw ConfigError("unknown command '" + o.command + "'");
  }
}

/// Reruns the command recorded in `manifest_path`, writing into `out_dir`.
inline void cmd_replay(const std::string& manifest_path, const std::string& out_dir, std::ostream& log = std::cerr) {
  RunOptions o = options_from_manifest(read_manifest(manifest_path));
  o.out_dir = out_dir;
  o.resume = false;
  run_command(o, log);
}

}  // namespace nrumac
