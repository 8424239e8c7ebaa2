#pragma once

// Standard LBT baseline: every gNB keeps the standard configuration for the
// whole episode.

#include "nrumac/rollout.hpp"

namespace nrumac {

inline std::vector<EpisodeRow> run_baseline(const ScenarioConfig& scenario, int episodes, std::uint64_t seed) {
  KeepController keep;
  return run_episodes(scenario, episodes, seed, keep);
}

}  // namespace nrumac
