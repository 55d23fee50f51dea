#pragma once

// Baseline planners over the primitive graph: greedy, receding-horizon DP,
// CMA-ES sequence search, coverage and prioritized coverage.

#include <algorithm>
#include <deque>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ipp/cmaes.hpp"
#include "ipp/episode.hpp"

namespace ipp {

struct PlannerOptions {
  double f1 = 0.5;
  double f2 = 0.5;
  int dp_horizon = 3;
  int cmaes_horizon = 6;
  long cmaes_max_evals = 2000;
  int cmaes_population = 0;
  double cmaes_sigma = 0.5;
};

inline void require_some_valid(std::span<const std::uint8_t> mask, const char* who) {
  if (std::none_of(mask.begin(), mask.end(), [](std::uint8_t v) { return v != 0; })) {
    throw std::invalid_argument(std::string(who) + ": no valid action");
  }
}

/// Sum over the edge's sensed cells of f1 * posterior + f2 * H(posterior).
inline double info_utility(const EpisodeEngine& engine, const OccupancyGrid& belief, Cell at, int node, int edge,
                           double f1, double f2) {
  double u = 0.0;
  for (const Cell c : engine.sensed_cells(at, node, edge)) {
    const double p = belief.posterior(c);
    u += f1 * p + f2 * binary_entropy(p);
  }
  return u;
}

inline double info_utility(const EpisodeEngine& engine, const EpisodeState& s, int edge, double f1, double f2) {
  return info_utility(engine, s.belief, s.agent_cell, s.node, edge, f1, f2);
}

/// Argmax of a per-edge score over valid edges; ties go to the lowest index.
template <class Score>
int argmax_valid(std::span<const std::uint8_t> mask, Score&& score) {
  int best = -1;
  double best_v = -std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < mask.size(); ++e) {
    if (!mask[e]) continue;
    const double v = score(static_cast<int>(e));
    if (best < 0 || v > best_v) {
      best = static_cast<int>(e);
      best_v = v;
    }
  }
  return best;
}

inline int greedy_plan(const EpisodeEngine& engine, const EpisodeState& s, std::span<const std::uint8_t> mask,
                       double f1, double f2) {
  require_some_valid(mask, "greedy_plan");
  return argmax_valid(mask, [&](int e) { return info_utility(engine, s, e, f1, f2); });
}

/// Maximum-likelihood lookahead update: each cell receives the measurement it
/// most likely produces (z=1 when posterior >= 0.5).
inline void simulate_ml_update(OccupancyGrid& belief, std::span<const Cell> cells, const SensorModel& sensor) {
  const double acc = accuracy(sensor);
  for (const Cell c : cells) belief.update({c, belief.posterior(c) >= 0.5 ? 1 : 0, acc});
}

namespace detail {

/// Scratch belief with an undo log so lookahead never copies the full grid per node.
class LookaheadBelief {
public:
  explicit LookaheadBelief(const OccupancyGrid& g) : grid_(g) {}
  const OccupancyGrid& grid() const noexcept { return grid_; }
  std::size_t mark() const noexcept { return undo_.size(); }
  void apply_ml(std::span<const Cell> cells, double acc) {
    for (const Cell c : cells) {
      const std::size_t i = grid_.dims().index(c);
      const double l = grid_.log_odds_at(i);
      undo_.push_back({i, l});
      grid_.set_log_odds_at(i, l + measurement_log_ratio(logistic(l) >= 0.5 ? 1 : 0, acc));
    }
  }
  void rewind(std::size_t mark) {
    while (undo_.size() > mark) {
      grid_.set_log_odds_at(undo_.back().first, undo_.back().second);
      undo_.pop_back();
    }
  }

private:
  OccupancyGrid grid_;
  std::vector<std::pair<std::size_t, double>> undo_;
};

}  // namespace detail

/// Exhaustive depth-h search over valid primitive sequences; returns the first
/// edge of the best-scoring sequence (lexicographically smallest on ties).
inline int dp_plan(const EpisodeEngine& engine, const EpisodeState& s, std::span<const std::uint8_t> mask, int horizon,
                   double f1, double f2) {
  require_some_valid(mask, "dp_plan");
  if (horizon < 1) throw std::invalid_argument("dp_plan: horizon must be >= 1");
  detail::LookaheadBelief belief(s.belief);
  const double acc = accuracy(engine.config().sensor);
  double best = -std::numeric_limits<double>::infinity();
  int best_first = -1;

  auto dfs = [&](auto&& self, Cell at, int node, double budget, int depth, double acc_score, int first) -> void {
    bool any = false;
    for (std::size_t e = 0; e < engine.edge_count(node); ++e) {
      const int edge = static_cast<int>(e);
      if (depth == 0 ? !mask[e] : !engine.edge_valid(s, at, node, edge, budget)) continue;
      any = true;
      const auto cells = engine.sensed_cells(at, node, edge);
      double u = 0.0;
      for (const Cell c : cells) {
        const double p = belief.grid().posterior(c);
        u += f1 * p + f2 * binary_entropy(p);
      }
      const int head = depth == 0 ? edge : first;
      if (depth + 1 == horizon) {
        if (acc_score + u > best) {
          best = acc_score + u;
          best_first = head;
        }
        continue;
      }
      const auto& prim = engine.primitive(node, edge);
      const std::size_t m = belief.mark();
      belief.apply_ml(cells, acc);
      self(self, at + prim.displacement, prim.end_node, budget - prim.cost, depth + 1, acc_score + u, head);
      belief.rewind(m);
    }
    if (!any && depth > 0 && acc_score > best) {
      best = acc_score;
      best_first = first;
    }
  };
  dfs(dfs, s.agent_cell, s.node, s.budget_left, 0, 0.0, -1);
  return best_first;
}

namespace detail {

/// Decodes a CMA-ES decision vector into a primitive sequence and scores it.
struct SequenceDecoder {
  const EpisodeEngine& engine;
  const EpisodeState& state;
  int horizon;
  double f1, f2;

  double rollout(const std::vector<double>& x, std::vector<int>* seq, LookaheadBelief& belief) const {
    const std::size_t A = engine.action_count();
    const double acc = accuracy(engine.config().sensor);
    const std::size_t m = belief.mark();
    Cell at = state.agent_cell;
    int node = state.node;
    double budget = state.budget_left;
    double score = 0.0;
    for (int step = 0; step < horizon; ++step) {
      const auto mask = engine.valid_actions_at(state, at, node, budget);
      const int edge = argmax_valid(mask, [&](int e) { return x[step * A + e]; });
      if (edge < 0) break;
      const auto cells = engine.sensed_cells(at, node, edge);
      for (const Cell c : cells) {
        const double p = belief.grid().posterior(c);
        score += f1 * p + f2 * binary_entropy(p);
      }
      belief.apply_ml(cells, acc);
      if (seq) seq->push_back(edge);
      const auto& prim = engine.primitive(node, edge);
      at = at + prim.displacement;
      node = prim.end_node;
      budget -= prim.cost;
    }
    belief.rewind(m);
    return score;
  }
};

}  // namespace detail

/// Optimizes a horizon-long primitive sequence with CMA-ES over per-step edge
/// preference scores. Returns the whole decoded sequence.
inline std::vector<int> cmaes_plan(const EpisodeEngine& engine, const EpisodeState& s,
                                   std::span<const std::uint8_t> mask, int horizon, const PlannerOptions& opts,
                                   std::uint64_t seed) {
  require_some_valid(mask, "cmaes_plan");
  if (horizon < 1) throw std::invalid_argument("cmaes_plan: horizon must be >= 1");
  detail::LookaheadBelief belief(s.belief);
  const detail::SequenceDecoder decoder{engine, s, horizon, opts.f1, opts.f2};
  CmaesOptions co;
  co.dimension = horizon * static_cast<int>(engine.action_count());
  co.population = opts.cmaes_population;
  co.sigma0 = opts.cmaes_sigma;
  co.max_evals = opts.cmaes_max_evals;
  co.seed = seed;
  const auto objective = [&](const std::vector<double>& x) { return -decoder.rollout(x, nullptr, belief); };
  std::vector<double> best_x(static_cast<std::size_t>(co.dimension), 0.0);
  double best_f = objective(best_x);
  const auto res = cma_es_minimize(objective, co);
  if (res.best_f < best_f) best_x = res.best_x;
  std::vector<int> seq;
  decoder.rollout(best_x, &seq, belief);
  return seq;
}

inline int coverage_plan(const EpisodeEngine& engine, const EpisodeState& s, std::span<const std::uint8_t> mask) {
  require_some_valid(mask, "coverage_plan");
  return argmax_valid(mask, [&](int e) {
    double n = 0.0;
    for (const Cell c : engine.sensed_cells(s.agent_cell, s.node, e)) n += s.coverage.get(c) ? 0.0 : 1.0;
    return n;
  });
}

inline int prioritized_coverage_plan(const EpisodeEngine& engine, const EpisodeState& s,
                                     std::span<const std::uint8_t> mask) {
  require_some_valid(mask, "prioritized_coverage_plan");
  return argmax_valid(mask, [&](int e) {
    double w = 0.0;
    for (const Cell c : engine.sensed_cells(s.agent_cell, s.node, e)) {
      if (!s.coverage.get(c)) w += s.belief.posterior(c);
    }
    return w;
  });
}

class Planner {
public:
  virtual ~Planner() = default;
  virtual std::string name() const = 0;
  /// Clears per-episode memory (queued plans).
  virtual void reset() {}
  virtual int next_action(const EpisodeEngine& engine, const EpisodeState& s, const Observation& obs,
                          const ActionMask& mask, Rng& rng) = 0;
};

class GreedyPlanner final : public Planner {
public:
  explicit GreedyPlanner(PlannerOptions o) : o_(o) {}
  std::string name() const override { return "greedy"; }
  int next_action(const EpisodeEngine& e, const EpisodeState& s, const Observation&, const ActionMask& m,
                  Rng&) override {
    return greedy_plan(e, s, m, o_.f1, o_.f2);
  }

private:
  PlannerOptions o_;
};

class DpPlanner final : public Planner {
public:
  explicit DpPlanner(PlannerOptions o) : o_(o) {}
  std::string name() const override { return "dp"; }
  int next_action(const EpisodeEngine& e, const EpisodeState& s, const Observation&, const ActionMask& m,
                  Rng&) override {
    return dp_plan(e, s, m, o_.dp_horizon, o_.f1, o_.f2);
  }

private:
  PlannerOptions o_;
};

/// Executes each optimized sequence in full before replanning.
class CmaesPlanner final : public Planner {
public:
  explicit CmaesPlanner(PlannerOptions o) : o_(o) {}
  std::string name() const override { return "cmaes"; }
  void reset() override { queue_.clear(); }
  int next_action(const EpisodeEngine& e, const EpisodeState& s, const Observation&, const ActionMask& m,
                  Rng& rng) override {
    if (!queue_.empty() && !m[queue_.front()]) queue_.clear();
    if (queue_.empty()) {
      const auto seq = cmaes_plan(e, s, m, o_.cmaes_horizon, o_, rng());
      queue_.assign(seq.begin(), seq.end());
    }
    const int a = queue_.front();
    queue_.pop_front();
    return a;
  }

private:
  PlannerOptions o_;
  std::deque<int> queue_;
};

class CoveragePlanner final : public Planner {
public:
  std::string name() const override { return "coverage"; }
  int next_action(const EpisodeEngine& e, const EpisodeState& s, const Observation&, const ActionMask& m,
                  Rng&) override {
    return coverage_plan(e, s, m);
  }
};

class PrioritizedCoveragePlanner final : public Planner {
public:
  std::string name() const override { return "pcoverage"; }
  int next_action(const EpisodeEngine& e, const EpisodeState& s, const Observation&, const ActionMask& m,
                  Rng&) override {
    return prioritized_coverage_plan(e, s, m);
  }
};

inline const std::vector<std::string>& baseline_planner_names() {
  static const std::vector<std::string> names{"greedy", "dp", "cmaes", "coverage", "pcoverage"};
  return names;
}

/// Baselines by registered name; "rl" is built by the learning layer.
inline std::unique_ptr<Planner> make_baseline_planner(std::string_view name, const PlannerOptions& o) {
  if (name == "greedy") return std::make_unique<GreedyPlanner>(o);
  if (name == "dp") return std::make_unique<DpPlanner>(o);
  if (name == "cmaes") return std::make_unique<CmaesPlanner>(o);
  if (name == "coverage") return std::make_unique<CoveragePlanner>();
  if (name == "pcoverage") return std::make_unique<PrioritizedCoveragePlanner>();
  throw std::invalid_argument("unknown planner '" + std::string(name) + "'");
}

}  // namespace ipp
