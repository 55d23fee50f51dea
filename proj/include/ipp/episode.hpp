#pragma once

// Episode engine: owns the POMDP state, action validity, primitive execution
// with in-flight sensing, the four-part reward, observations and metrics.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipp/grid.hpp"
#include "ipp/primitives.hpp"
#include "ipp/rng.hpp"
#include "ipp/sensor.hpp"

namespace ipp {

using ActionMask = std::vector<std::uint8_t>;

struct RewardWeights {
  double entropy = 1.0;
  double coverage = 1.0;
  double target = 1.0;
  double cost = 0.01;
};

struct EpisodeConfig {
  GridDims dims{32, 32, 1.0};
  SensorModel sensor;
  std::shared_ptr<const PrimitiveGraph> graph;
  double budget = 0.0;
  RewardWeights weights;
  double target_bonus_total = 100.0;
  double found_threshold = kDefaultFoundThreshold;
  int obs_window = 11;
  std::vector<int> obs_scales{1, 2, 4};
  int sense_points = 3;
  std::optional<Cell> start_cell;
  // Also require the edge's end state to be viable: from it the vehicle can
  // keep flying in bounds and clear of obstacles until it reaches hover.
  bool require_viable = true;

  void validate() const {
    dims.validate();
    sensor.validate();
    if (!graph) throw std::invalid_argument("episode config has no primitive graph");
    graph->validate();
    if (!(budget > 0.0)) throw std::invalid_argument("episode budget must be positive");
    if (obs_window < 1 || obs_window % 2 == 0) throw std::invalid_argument("obs_window must be odd and >= 1");
    if (obs_scales.empty()) throw std::invalid_argument("obs_scales must be non-empty");
    for (std::size_t i = 0; i < obs_scales.size(); ++i) {
      if (obs_scales[i] < 1 || (i > 0 && obs_scales[i] <= obs_scales[i - 1])) {
        throw std::invalid_argument("obs_scales must be positive and strictly ascending");
      }
    }
    if (sense_points < 1) throw std::invalid_argument("sense_points must be >= 1");
    if (!(found_threshold > 0.5 && found_threshold < 1.0)) throw std::invalid_argument("found_threshold outside (0.5,1)");
  }
};

/// Cell-relative shape of one primitive, independent of where it is executed.
struct EdgeGeometry {
  Offset end;
  std::vector<Offset> path;          // swept cells at 20 samples, consecutive duplicates removed
  std::vector<Offset> sense_points;  // K evenly spaced points, t = T*k/K
  std::vector<Offset> sensed;        // union of footprints at the sense points, row-major
};

struct RewardBreakdown {
  double entropy = 0.0;
  double coverage = 0.0;
  double target = 0.0;
  double cost = 0.0;
  double total = 0.0;
};

struct Observation {
  std::vector<double> ego;  // [scale][channel][row][col]
  std::array<double, 2> pos_norm{};
  std::vector<double> last_action;
  std::vector<double> node;
  double budget_frac = 0.0;

  std::vector<double> flatten() const {
    std::vector<double> f;
    f.reserve(ego.size() + 3 + last_action.size() + node.size());
    f.insert(f.end(), ego.begin(), ego.end());
    f.push_back(pos_norm[0]);
    f.push_back(pos_norm[1]);
    f.insert(f.end(), last_action.begin(), last_action.end());
    f.insert(f.end(), node.begin(), node.end());
    f.push_back(budget_frac);
    return f;
  }
};

struct EpisodeState {
  Cell agent_cell;
  int node = 0;
  OccupancyGrid belief{GridDims{}};
  CellMask coverage;
  CellMask obstacles;
  WorldMap world{GridDims{}};
  double budget_left = 0.0;
  int t = 0;
  std::vector<Cell> targets;
  std::vector<std::uint8_t> found;
  int last_action = -1;
  std::int64_t initial_entropy_q = 0;
  std::int64_t entropy_q = 0;
  bool done = false;
  std::uint64_t seed = 0;
  Rng rng;
  std::shared_ptr<const std::vector<std::uint8_t>> viable;  // [cell][node], empty when not required

  double initial_entropy() const { return quanta_to_nats(initial_entropy_q); }
  double entropy() const { return quanta_to_nats(entropy_q); }
  std::size_t found_count() const {
    return static_cast<std::size_t>(std::count(found.begin(), found.end(), std::uint8_t{1}));
  }
};

struct StepResult {
  Observation obs;
  RewardBreakdown reward;
  bool done = false;
};

struct EpisodeMetrics {
  double coverage_pct = 0.0;
  double entropy_reduction_pct = 0.0;
  double search_eff_pct = 0.0;
};

inline constexpr int kPathSamples = 20;

inline Offset offset_of(Vec2 p, double cell_size) {
  return {static_cast<int>(std::floor(p.x / cell_size + 0.5)), static_cast<int>(std::floor(p.y / cell_size + 0.5))};
}

inline Cell operator+(Cell c, Offset o) { return {c.x + o.dx, c.y + o.dy}; }

inline EdgeGeometry make_edge_geometry(const Primitive& prim, int footprint_half_width, int sense_points,
                                       double cell_size) {
  EdgeGeometry g;
  g.end = prim.displacement;
  for (int i = 0; i < kPathSamples; ++i) {
    const double t = prim.traj.duration * i / (kPathSamples - 1);
    const Offset o = offset_of(prim.traj.position(t), cell_size);
    if (g.path.empty() || !(g.path.back() == o)) g.path.push_back(o);
  }
  auto cmp = [](const Offset& a, const Offset& b) { return a.dy != b.dy ? a.dy < b.dy : a.dx < b.dx; };
  std::set<Offset, decltype(cmp)> cells(cmp);
  for (int k = 1; k <= sense_points; ++k) {
    const double t = prim.traj.duration * k / sense_points;
    const Offset c = k == sense_points ? prim.displacement : offset_of(prim.traj.position(t), cell_size);
    g.sense_points.push_back(c);
    for (int dy = -footprint_half_width; dy <= footprint_half_width; ++dy) {
      for (int dx = -footprint_half_width; dx <= footprint_half_width; ++dx) cells.insert({c.dx + dx, c.dy + dy});
    }
  }
  g.sensed.assign(cells.begin(), cells.end());
  return g;
}

class EpisodeEngine {
public:
  explicit EpisodeEngine(EpisodeConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const auto& g = *cfg_.graph;
    const int hw = footprint_half_width(cfg_.sensor, cfg_.dims.cell_size);
    geometry_.resize(g.nodes.size());
    for (std::size_t u = 0; u < g.nodes.size(); ++u) {
      for (const auto& e : g.edges[u]) {
        geometry_[u].push_back(make_edge_geometry(e, hw, cfg_.sense_points, cfg_.dims.cell_size));
      }
    }
    action_count_ = g.max_out_degree();
    if (cfg_.require_viable) open_viable_ = std::make_shared<const std::vector<std::uint8_t>>(viability(CellMask(cfg_.dims)));
  }

  const EpisodeConfig& config() const noexcept { return cfg_; }
  const PrimitiveGraph& graph() const noexcept { return *cfg_.graph; }
  const GridDims& dims() const noexcept { return cfg_.dims; }
  std::size_t action_count() const noexcept { return action_count_; }
  const EdgeGeometry& geometry(int node, int edge) const { return geometry_.at(node).at(edge); }
  const Primitive& primitive(int node, int edge) const { return cfg_.graph->edges.at(node).at(edge); }
  std::size_t edge_count(int node) const { return cfg_.graph->edges.at(node).size(); }

  std::size_t ego_size() const {
    return cfg_.obs_scales.size() * 3 * static_cast<std::size_t>(cfg_.obs_window) * cfg_.obs_window;
  }
  std::size_t feature_size() const { return ego_size() + 2 + action_count_ + cfg_.graph->nodes.size() + 1; }

  Cell default_start() const {
    const int hw = footprint_half_width(cfg_.sensor, cfg_.dims.cell_size);
    return {std::min(hw, cfg_.dims.width - 1), std::min(hw, cfg_.dims.height - 1)};
  }

  EpisodeState reset(const WorldMap& world, std::span<const double> prior, std::uint64_t seed,
                     const CellMask* obstacles = nullptr) const {
    if (!(world.dims() == cfg_.dims)) throw std::invalid_argument("reset: world dims mismatch");
    if (world.target_count() == 0) throw std::invalid_argument("reset: world has no targets");
    EpisodeState s;
    s.belief = OccupancyGrid::from_probabilities(cfg_.dims, prior);
    s.coverage = CellMask(cfg_.dims);
    s.obstacles = obstacles ? *obstacles : CellMask(cfg_.dims);
    if (!(s.obstacles.dims() == cfg_.dims)) throw std::invalid_argument("reset: obstacle dims mismatch");
    if (cfg_.require_viable) {
      s.viable = s.obstacles.count() == 0 ? open_viable_
                                          : std::make_shared<const std::vector<std::uint8_t>>(viability(s.obstacles));
    }
    s.world = world;
    s.agent_cell = cfg_.start_cell.value_or(default_start());
    if (!cfg_.dims.contains(s.agent_cell)) throw std::invalid_argument("reset: start cell outside grid");
    if (s.obstacles.get(s.agent_cell)) throw std::invalid_argument("reset: start cell is an obstacle");
    s.node = cfg_.graph->nearest_node({0.0, 0.0});
    s.budget_left = cfg_.budget;
    s.targets = world.targets();
    s.found.assign(s.targets.size(), 0);
    s.initial_entropy_q = quantized_total_entropy(s.belief);
    s.entropy_q = s.initial_entropy_q;
    s.seed = seed;
    s.rng.seed(seed);
    s.done = !any_valid(s);
    return s;
  }

  /// In bounds at the end and along the swept path, and clear of obstacles.
  bool path_clear(const CellMask& obstacles, Cell at, int node, int edge) const {
    const auto& geo = geometry(node, edge);
    if (!cfg_.dims.contains(at + geo.end)) return false;
    for (const Offset o : geo.path) {
      const Cell c = at + o;
      if (!cfg_.dims.contains(c) || obstacles.get(c)) return false;
    }
    return true;
  }

  bool edge_valid(const EpisodeState& s, Cell at, int node, int edge, double budget_left) const {
    const auto& prim = primitive(node, edge);
    if (prim.cost > budget_left) return false;
    if (!path_clear(s.obstacles, at, node, edge)) return false;
    if (s.viable) {
      const Cell end = at + prim.displacement;
      return (*s.viable)[viable_index(end, prim.end_node)] != 0;
    }
    return true;
  }

  /// Greatest set of (cell, node) states from which some sequence of clear
  /// edges reaches a hover node (zero velocity). Budget is not considered.
  std::vector<std::uint8_t> viability(const CellMask& obstacles) const {
    const auto& g = *cfg_.graph;
    const std::size_t N = g.nodes.size();
    std::vector<std::uint8_t> v(cfg_.dims.cell_count() * N, 0);
    for (int y = 0; y < cfg_.dims.height; ++y) {
      for (int x = 0; x < cfg_.dims.width; ++x) {
        if (obstacles.get({x, y})) continue;
        for (std::size_t n = 0; n < N; ++n) v[viable_index({x, y}, static_cast<int>(n))] = 1;
      }
    }
    for (bool changed = true; changed;) {
      changed = false;
      for (int y = 0; y < cfg_.dims.height; ++y) {
        for (int x = 0; x < cfg_.dims.width; ++x) {
          for (std::size_t n = 0; n < N; ++n) {
            const Cell c{x, y};
            auto& cur = v[viable_index(c, static_cast<int>(n))];
            if (!cur || g.nodes[n] == Vec2{}) continue;
            bool ok = false;
            for (std::size_t e = 0; e < g.edges[n].size() && !ok; ++e) {
              const auto& prim = g.edges[n][e];
              ok = path_clear(obstacles, c, static_cast<int>(n), static_cast<int>(e)) &&
                   v[viable_index(c + prim.displacement, prim.end_node)];
            }
            if (!ok) {
              cur = 0;
              changed = true;
            }
          }
        }
      }
    }
    return v;
  }

  /// Mask over the node's outgoing edges, padded with false up to action_count().
  ActionMask valid_actions_at(const EpisodeState& s, Cell at, int node, double budget_left) const {
    ActionMask mask(action_count_, 0);
    for (std::size_t e = 0; e < edge_count(node); ++e) {
      mask[e] = edge_valid(s, at, node, static_cast<int>(e), budget_left) ? 1 : 0;
    }
    return mask;
  }

  ActionMask valid_actions(const EpisodeState& s) const {
    return valid_actions_at(s, s.agent_cell, s.node, s.budget_left);
  }

  bool any_valid(const EpisodeState& s) const {
    for (std::size_t e = 0; e < edge_count(s.node); ++e) {
      if (edge_valid(s, s.agent_cell, s.node, static_cast<int>(e), s.budget_left)) return true;
    }
    return false;
  }

  /// Cells the camera sees while executing the edge from `at`, clipped, row-major.
  std::vector<Cell> sensed_cells(Cell at, int node, int edge) const {
    std::vector<Cell> out;
    for (const Offset o : geometry(node, edge).sensed) {
      const Cell c = at + o;
      if (cfg_.dims.contains(c)) out.push_back(c);
    }
    return out;
  }

  StepResult step(EpisodeState& s, int edge) const {
    if (s.done) throw std::logic_error("step: episode already done");
    if (edge < 0 || static_cast<std::size_t>(edge) >= edge_count(s.node) ||
        !edge_valid(s, s.agent_cell, s.node, edge, s.budget_left)) {
      throw std::invalid_argument("step: edge " + std::to_string(edge) + " is not valid at node " +
                                  std::to_string(s.node));
    }
    const auto& prim = primitive(s.node, edge);
    const auto cells = sensed_cells(s.agent_cell, s.node, edge);

    RewardBreakdown r;
    for (const Cell c : cells) {
      if (!s.coverage.get(c)) r.coverage += s.belief.posterior(c);
    }
    observe_cells(cfg_.sensor, s.belief, s.coverage, s.world, cells, s.rng);

    const std::int64_t before = s.entropy_q;
    s.entropy_q = quantized_total_entropy(s.belief);
    r.entropy = quanta_to_nats(before - s.entropy_q);

    const double bonus = cfg_.target_bonus_total / static_cast<double>(s.targets.size());
    for (std::size_t k = 0; k < s.targets.size(); ++k) {
      if (!s.found[k] && s.belief.posterior(s.targets[k]) > cfg_.found_threshold) {
        s.found[k] = 1;
        r.target += bonus;
      }
    }
    r.cost = prim.cost;
    r.total = cfg_.weights.entropy * r.entropy + cfg_.weights.coverage * r.coverage +
              cfg_.weights.target * r.target - cfg_.weights.cost * r.cost;

    s.budget_left = std::max(0.0, s.budget_left - prim.cost);
    s.agent_cell = s.agent_cell + prim.displacement;
    s.node = prim.end_node;
    s.last_action = edge;
    ++s.t;
    s.done = s.found_count() == s.targets.size() || !any_valid(s);
    return {build_observation(s), r, s.done};
  }

  Observation build_observation(const EpisodeState& s) const {
    const auto& d = cfg_.dims;
    const int W = cfg_.obs_window;
    std::vector<double> post(d.cell_count()), ent(d.cell_count());
    for (std::size_t i = 0; i < d.cell_count(); ++i) {
      post[i] = s.belief.posterior_at(i);
      ent[i] = binary_entropy(post[i]);
    }
    Observation o;
    o.ego.reserve(ego_size());
    const double pad_entropy = std::numbers::ln2;
    for (const int scale : cfg_.obs_scales) {
      const int origin_x = s.agent_cell.x - (W * scale) / 2;
      const int origin_y = s.agent_cell.y - (W * scale) / 2;
      std::vector<double> chan(3 * static_cast<std::size_t>(W) * W, 0.0);
      const double inv = 1.0 / (scale * scale);
      for (int j = 0; j < W; ++j) {
        for (int i = 0; i < W; ++i) {
          double sp = 0.0, se = 0.0, sc = 0.0;
          for (int by = 0; by < scale; ++by) {
            for (int bx = 0; bx < scale; ++bx) {
              const Cell c{origin_x + i * scale + bx, origin_y + j * scale + by};
              if (d.contains(c)) {
                const std::size_t k = d.index(c);
                sp += post[k];
                se += ent[k];
                sc += s.coverage.get_at(k) ? 1.0 : 0.0;
              } else {
                sp += 0.5;
                se += pad_entropy;
              }
            }
          }
          const std::size_t cell = static_cast<std::size_t>(j) * W + i;
          chan[cell] = sp * inv;
          chan[static_cast<std::size_t>(W) * W + cell] = se * inv;
          chan[2 * static_cast<std::size_t>(W) * W + cell] = sc * inv;
        }
      }
      o.ego.insert(o.ego.end(), chan.begin(), chan.end());
    }
    o.pos_norm = {static_cast<double>(s.agent_cell.x) / d.width, static_cast<double>(s.agent_cell.y) / d.height};
    o.last_action.assign(action_count_, 0.0);
    if (s.last_action >= 0) o.last_action[s.last_action] = 1.0;
    o.node.assign(cfg_.graph->nodes.size(), 0.0);
    o.node[s.node] = 1.0;
    o.budget_frac = s.budget_left / cfg_.budget;
    return o;
  }

  EpisodeMetrics metrics(const EpisodeState& s) const {
    if (!s.done) throw std::logic_error("metrics: episode not done");
    EpisodeMetrics m;
    m.coverage_pct = 100.0 * static_cast<double>(s.coverage.count()) / static_cast<double>(cfg_.dims.cell_count());
    m.entropy_reduction_pct =
        s.initial_entropy_q > 0
            ? 100.0 * static_cast<double>(s.initial_entropy_q - s.entropy_q) / static_cast<double>(s.initial_entropy_q)
            : 0.0;
    m.search_eff_pct = 100.0 * static_cast<double>(s.found_count()) / static_cast<double>(s.targets.size());
    return m;
  }

private:
  std::size_t viable_index(Cell c, int node) const {
    return (static_cast<std::size_t>(c.y) * cfg_.dims.width + c.x) * cfg_.graph->nodes.size() + node;
  }

  EpisodeConfig cfg_;
  std::vector<std::vector<EdgeGeometry>> geometry_;
  std::size_t action_count_ = 0;
  std::shared_ptr<const std::vector<std::uint8_t>> open_viable_;
};

/// Mean primitive cost over all edges; budgets are commonly sized as a multiple of it.
inline double mean_edge_cost(const PrimitiveGraph& g) {
  double s = 0.0;
  for (const auto& es : g.edges) {
    for (const auto& e : es) s += e.cost;
  }
  return s / static_cast<double>(g.edge_count());
}

}  // namespace ipp
