#pragma once

// Drives one planner through one episode and records what happened.

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipp/episode.hpp"
#include "ipp/planners.hpp"

namespace ipp {

struct StepRecord {
  int action = -1;
  Cell cell_after;
  int node_after = 0;
  double budget_left = 0.0;
  RewardBreakdown reward;
  double entropy = 0.0;
  std::size_t found = 0;
};

struct EpisodeRecord {
  Cell start;
  int start_node = 0;
  double initial_entropy = 0.0;
  std::vector<StepRecord> steps;
  EpisodeMetrics metrics;
};

/// Planner randomness (CMA-ES seeds) is drawn from its own stream so that the
/// sensor stream inside the state matches across planners.
inline EpisodeRecord run_episode(const EpisodeEngine& engine, Planner& planner, const WorldMap& world,
                                 std::span<const double> prior, std::uint64_t seed,
                                 const CellMask* obstacles = nullptr) {
  EpisodeState s = engine.reset(world, prior, seed, obstacles);
  Rng planner_rng(derive_seed(seed, 1));
  planner.reset();
  EpisodeRecord rec;
  rec.start = s.agent_cell;
  rec.start_node = s.node;
  rec.initial_entropy = s.initial_entropy();
  Observation obs = engine.build_observation(s);
  while (!s.done) {
    const auto mask = engine.valid_actions(s);
    const int a = planner.next_action(engine, s, obs, mask, planner_rng);
    if (a < 0 || static_cast<std::size_t>(a) >= mask.size() || !mask[a]) {
      throw std::logic_error("planner " + planner.name() + " chose invalid action " + std::to_string(a) +
                             " at step " + std::to_string(s.t));
    }
    auto r = engine.step(s, a);
    rec.steps.push_back({a, s.agent_cell, s.node, s.budget_left, r.reward, s.entropy(), s.found_count()});
    obs = std::move(r.obs);
  }
  rec.metrics = engine.metrics(s);
  return rec;
}

}  // namespace ipp
