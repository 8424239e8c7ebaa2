#include <filesystem>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "nrumac/harness.hpp"

using namespace nrumac;

namespace {

struct ScenarioArgs {
  std::string path;
  std::string preset;
};

void add_scenario_args(CLI::App* cmd, ScenarioArgs& a) {
  auto* s = cmd->add_option("--scenario", a.path, "scenario JSON file")->check(CLI::ExistingFile);
  auto* p = cmd->add_option("--preset", a.preset, "built-in scenario (see `presets --list`)");
  s->excludes(p);
  p->excludes(s);
}

void resolve_scenario(const ScenarioArgs& a, RunOptions& o) {
  if (!a.path.empty()) {
    o.scenario_path = a.path;
    o.scenario = parse_scenario(a.path);
  } else if (!a.preset.empty()) {
    o.scenario_path = "preset:" + a.preset;
    o.scenario = find_preset(a.preset).file;
  } else {
    throw ConfigError("one of --scenario or --preset is required");
  }
}

void print_summary(const CompareResult& r) {
  std::cout << std::left << std::setw(20) << "scenario" << std::setw(14) << "system" << std::setw(16) << "metric"
            << std::right << std::setw(14) << "mean" << std::setw(14) << "median" << std::setw(14) << "q1"
            << std::setw(14) << "q3" << std::setw(12) << "improv%" << "\n";
  for (const auto& s : r.summary) {
    std::cout << std::left << std::setw(20) << s.scenario << std::setw(14) << s.system << std::setw(16) << s.metric
              << std::right << std::setw(14) << std::setprecision(6) << s.mean << std::setw(14) << s.median
              << std::setw(14) << s.q1 << std::setw(14) << s.q3 << std::setw(12) << std::fixed << std::setprecision(2)
              << s.improvement_pct << std::defaultfloat << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NR-U listen-before-talk simulator and multi-agent PPO trainer"};
  app.require_subcommand(1);

  RunOptions o;
  ScenarioArgs sa;
  std::string algo = "dtde";

  auto* train = app.add_subcommand("train", "train DTDE or CTCE policies");
  add_scenario_args(train, sa);
  train->add_option("--algo", algo, "dtde or ctce")->check(CLI::IsMember({"dtde", "ctce"}));
  train->add_option("--seed", o.seed, "training seed");
  train->add_option("--iters", o.iters, "training iterations (one episode each)");
  train->add_option("--checkpoint-every", o.checkpoint_every, "iterations between snapshots");
  train->add_flag("--resume", o.resume, "continue from the snapshot in --out");
  train->add_option("--label", o.label, "system name used by compare");
  train->add_option("--out", o.out_dir, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "run trained policies greedily");
  eval->add_option("--policy", o.policy_dir, "directory written by train")->required()->check(CLI::ExistingDirectory);
  add_scenario_args(eval, sa);
  eval->add_option("--episodes", o.episodes, "evaluation episodes");
  eval->add_option("--seed", o.seed, "evaluation seed");
  eval->add_option("--label", o.label, "system name used by compare");
  eval->add_option("--out", o.out_dir, "output directory")->required();

  auto* base = app.add_subcommand("baseline", "run the standard LBT configuration");
  add_scenario_args(base, sa);
  base->add_option("--episodes", o.episodes, "evaluation episodes");
  base->add_option("--seed", o.seed, "evaluation seed");
  base->add_option("--label", o.label, "system name used by compare");
  base->add_option("--out", o.out_dir, "output directory")->required();

  auto* cmp = app.add_subcommand("compare", "summarize metrics.csv files from several systems");
  cmp->add_option("csv", o.inputs, "metrics.csv files")->required()->check(CLI::ExistingFile);
  cmp->add_option("--out", o.out_dir, "output directory")->required();

  bool list = false;
  std::string show, write_dir;
  auto* presets = app.add_subcommand("presets", "built-in scenarios");
  presets->add_flag("--list", list, "list preset names");
  presets->add_option("--show", show, "print one preset as JSON");
  presets->add_option("--write", write_dir, "write every preset as <name>.json into a directory");

  std::string manifest;
  auto* replay = app.add_subcommand("replay", "rerun a command from its manifest");
  replay->add_option("manifest", manifest, "manifest.json of a previous run")->required()->check(CLI::ExistingFile);
  replay->add_option("--out", o.out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      resolve_scenario(sa, o);
      o.algo = parse_algo(algo);
      cmd_train(o);
    } else if (eval->parsed()) {
      resolve_scenario(sa, o);
      cmd_eval(o);
    } else if (base->parsed()) {
      resolve_scenario(sa, o);
      cmd_baseline(o);
    } else if (cmp->parsed()) {
      print_summary(cmd_compare(o));
    } else if (presets->parsed()) {
      if (!show.empty()) {
        const Preset p = find_preset(show);
        std::cout << scenario_to_json(p.file.scenario, p.file.ppo).dump(2) << "\n";
      } else if (!write_dir.empty()) {
        std::filesystem::create_directories(write_dir);
        for (const auto& p : scenario_presets()) {
          write_text_atomic(std::filesystem::path(write_dir) / (p.name + ".json"),
                            scenario_to_json(p.file.scenario, p.file.ppo).dump(2) + "\n");
        }
      } else {
        (void)list;
        for (const auto& p : scenario_presets()) std::cout << std::left << std::setw(20) << p.name << p.description << "\n";
      }
    } else if (replay->parsed()) {
      cmd_replay(manifest, o.out_dir);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
