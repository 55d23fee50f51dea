#pragma once

// Motion-primitive library: minimum-jerk quintics between velocity states,
// dispersion-minimizing vertex selection and lattice graph construction.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ipp {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) noexcept { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) noexcept { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) noexcept { return {s * a.x, s * a.y}; }
  friend constexpr bool operator==(const Vec2&, const Vec2&) = default;
  double norm_inf() const noexcept { return std::max(std::abs(x), std::abs(y)); }
  double squared_norm() const noexcept { return x * x + y * y; }
};

/// Integer lattice offset in cells.
struct Offset {
  int dx = 0;
  int dy = 0;
  friend constexpr bool operator==(const Offset&, const Offset&) = default;
};

/// Degree-5 polynomial, coefficients in ascending powers of t.
struct Quintic {
  std::array<double, 6> c{};

  double position(double t) const noexcept {
    return c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5]))));
  }
  double velocity(double t) const noexcept {
    return c[1] + t * (2 * c[2] + t * (3 * c[3] + t * (4 * c[4] + t * 5 * c[5])));
  }
  double acceleration(double t) const noexcept {
    return 2 * c[2] + t * (6 * c[3] + t * (12 * c[4] + t * 20 * c[5]));
  }
  double jerk(double t) const noexcept { return 6 * c[3] + t * (24 * c[4] + t * 60 * c[5]); }

  /// Closed form of the integral of jerk(t)^2 over [0, T].
  double jerk_squared_integral(double T) const noexcept {
    const double a = 6 * c[3], b = 24 * c[4], q = 60 * c[5];
    const double T2 = T * T, T3 = T2 * T, T4 = T3 * T, T5 = T4 * T;
    return a * a * T + a * b * T2 + (b * b + 2 * a * q) * T3 / 3.0 + b * q * T4 / 2.0 + q * q * T5 / 5.0;
  }
  friend bool operator==(const Quintic&, const Quintic&) = default;
};

/// Unique quintic with the given end positions/velocities and zero end accelerations.
inline Quintic solve_min_jerk(double p0, double v0, double p1, double v1, double T) {
  if (!(T > 0.0)) throw std::invalid_argument("solve_min_jerk: duration must be positive");
  const double h = p1 - p0;
  const double T2 = T * T, T3 = T2 * T, T4 = T3 * T, T5 = T4 * T;
  Quintic q;
  q.c[0] = p0;
  q.c[1] = v0;
  q.c[2] = 0.0;
  q.c[3] = (20.0 * h - (8.0 * v1 + 12.0 * v0) * T) / (2.0 * T3);
  q.c[4] = (-30.0 * h + (14.0 * v1 + 16.0 * v0) * T) / (2.0 * T4);
  q.c[5] = (12.0 * h - 6.0 * (v1 + v0) * T) / (2.0 * T5);
  return q;
}

/// Planar trajectory: one quintic per axis over [0, duration].
struct Trajectory {
  std::array<Quintic, 2> axis{};
  double duration = 0.0;

  Vec2 position(double t) const noexcept { return {axis[0].position(t), axis[1].position(t)}; }
  Vec2 velocity(double t) const noexcept { return {axis[0].velocity(t), axis[1].velocity(t)}; }
  Vec2 acceleration(double t) const noexcept { return {axis[0].acceleration(t), axis[1].acceleration(t)}; }
  double jerk_cost() const noexcept {
    return axis[0].jerk_squared_integral(duration) + axis[1].jerk_squared_integral(duration);
  }
};

inline Trajectory solve_min_jerk(Vec2 p0, Vec2 v0, Vec2 p1, Vec2 v1, double T) {
  return {{solve_min_jerk(p0.x, v0.x, p1.x, v1.x, T), solve_min_jerk(p0.y, v0.y, p1.y, v1.y, T)}, T};
}

/// Energy + time: integral of |jerk|^2 plus rho * T.
inline double primitive_cost(const Trajectory& traj, double rho) {
  return traj.jerk_cost() + rho * traj.duration;
}

struct FullState {
  Vec2 pos;
  Vec2 vel;
};

inline void require_durations(std::span<const double> durations) {
  if (durations.empty()) throw std::invalid_argument("duration grid is empty");
  for (double T : durations) {
    if (!(T > 0.0)) throw std::invalid_argument("duration grid entries must be positive");
  }
}

/// Cheapest min-jerk connection a -> b over the candidate durations.
inline double pairwise_cost(const FullState& a, const FullState& b, std::span<const double> durations,
                            double rho) {
  require_durations(durations);
  double best = std::numeric_limits<double>::infinity();
  for (double T : durations) {
    best = std::min(best, primitive_cost(solve_min_jerk(a.pos, a.vel, b.pos, b.vel, T), rho));
  }
  return best;
}

/// Connection cost between velocity states with position factored out: the end
/// position is free, whose optimum is the mean-velocity displacement (v0+v1)T/2.
inline double velocity_pair_cost(Vec2 from, Vec2 to, std::span<const double> durations, double rho) {
  require_durations(durations);
  double best = std::numeric_limits<double>::infinity();
  for (double T : durations) {
    const Vec2 end = (0.5 * T) * (from + to);
    best = std::min(best, primitive_cost(solve_min_jerk(Vec2{}, from, end, to, T), rho));
  }
  return best;
}

/// Symmetric-max cost table, rows = samples, cols = vertices.
inline std::vector<std::vector<double>> dispersion_costs(std::span<const Vec2> vertices,
                                                         std::span<const Vec2> samples,
                                                         std::span<const double> durations, double rho) {
  std::vector<std::vector<double>> table(samples.size(), std::vector<double>(vertices.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t j = 0; j < vertices.size(); ++j) {
      table[i][j] = std::max(velocity_pair_cost(samples[i], vertices[j], durations, rho),
                             velocity_pair_cost(vertices[j], samples[i], durations, rho));
    }
  }
  return table;
}

/// sup over samples of min over vertices of max(J(x,v), J(v,x)).
inline double dispersion(std::span<const Vec2> vertices, std::span<const Vec2> samples,
                         std::span<const double> durations, double rho) {
  if (vertices.empty() || samples.empty()) throw std::invalid_argument("dispersion: empty vertex or sample set");
  const auto table = dispersion_costs(vertices, samples, durations, rho);
  double d = 0.0;
  for (const auto& row : table) d = std::max(d, *std::min_element(row.begin(), row.end()));
  return d;
}

/// Greedy dispersion reduction. Returns candidate indices in selection order.
/// Each round takes the candidate minimizing the resulting dispersion; ties go to
/// the smaller summed nearest-vertex cost, then the lowest index.
inline std::vector<std::size_t> select_vertex_indices(std::span<const Vec2> candidates,
                                                      std::span<const Vec2> samples, std::size_t n,
                                                      std::span<const double> durations, double rho) {
  if (n > candidates.size()) throw std::invalid_argument("select_vertices: n exceeds candidate count");
  if (samples.empty()) throw std::invalid_argument("select_vertices: empty sample set");
  const auto table = dispersion_costs(candidates, samples, durations, rho);
  std::vector<double> nearest(samples.size(), std::numeric_limits<double>::infinity());
  std::vector<char> taken(candidates.size(), 0);
  std::vector<std::size_t> chosen;
  chosen.reserve(n);
  for (std::size_t round = 0; round < n; ++round) {
    std::size_t best = candidates.size();
    double best_disp = std::numeric_limits<double>::infinity();
    double best_sum = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (taken[c]) continue;
      double disp = 0.0, sum = 0.0;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const double v = std::min(nearest[i], table[i][c]);
        disp = std::max(disp, v);
        sum += v;
      }
      if (best == candidates.size() || disp < best_disp || (disp == best_disp && sum < best_sum)) {
        best = c;
        best_disp = disp;
        best_sum = sum;
      }
    }
    taken[best] = 1;
    chosen.push_back(best);
    for (std::size_t i = 0; i < samples.size(); ++i) nearest[i] = std::min(nearest[i], table[i][best]);
  }
  return chosen;
}

inline std::vector<Vec2> select_vertices(std::span<const Vec2> candidates, std::span<const Vec2> samples,
                                         std::size_t n, std::span<const double> durations, double rho) {
  std::vector<Vec2> out;
  for (std::size_t i : select_vertex_indices(candidates, samples, n, durations, rho)) out.push_back(candidates[i]);
  return out;
}

/// Uniform per-axis grid over [-v_max, v_max]^2, row-major in (vy, vx).
inline std::vector<Vec2> velocity_grid(double v_max, int per_axis) {
  if (per_axis < 1) throw std::invalid_argument("velocity_grid: per_axis must be >= 1");
  std::vector<Vec2> out;
  for (int j = 0; j < per_axis; ++j) {
    for (int i = 0; i < per_axis; ++i) {
      const double fx = per_axis == 1 ? 0.5 : static_cast<double>(i) / (per_axis - 1);
      const double fy = per_axis == 1 ? 0.5 : static_cast<double>(j) / (per_axis - 1);
      out.push_back({-v_max + 2 * v_max * fx, -v_max + 2 * v_max * fy});
    }
  }
  return out;
}

struct Primitive {
  Trajectory traj;
  int start_node = 0;
  int end_node = 0;
  Offset displacement;
  double cost = 0.0;
};

struct PrimitiveGraph {
  std::vector<Vec2> nodes;
  std::vector<std::vector<Primitive>> edges;  // outgoing edges per node
  double v_max = 0.0;
  double cell_size = 1.0;
  int stride = 1;

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& e : edges) n += e.size();
    return n;
  }
  std::size_t max_out_degree() const {
    std::size_t n = 0;
    for (const auto& e : edges) n = std::max(n, e.size());
    return n;
  }
  int nearest_node(Vec2 v) const {
    int best = 0;
    for (std::size_t i = 1; i < nodes.size(); ++i) {
      if ((nodes[i] - v).squared_norm() < (nodes[best] - v).squared_norm()) best = static_cast<int>(i);
    }
    return best;
  }
  void validate() const {
    if (nodes.empty()) throw std::invalid_argument("graph has no nodes");
    if (edges.size() != nodes.size()) throw std::invalid_argument("graph edge table size mismatch");
    for (std::size_t u = 0; u < edges.size(); ++u) {
      if (edges[u].empty()) throw std::invalid_argument("graph node " + std::to_string(u) + " has no edges");
      for (const auto& e : edges[u]) {
        if (e.start_node != static_cast<int>(u)) throw std::invalid_argument("edge start_node mismatch");
        if (e.end_node < 0 || e.end_node >= static_cast<int>(nodes.size())) {
          throw std::invalid_argument("edge end_node out of range");
        }
        if (!(e.cost > 0.0)) throw std::invalid_argument("edge cost must be positive");
      }
    }
  }
};

inline constexpr int kVelocityCheckSamples = 20;

inline bool respects_velocity_bound(const Trajectory& traj, double v_max) {
  for (int i = 0; i < kVelocityCheckSamples; ++i) {
    const double t = traj.duration * i / (kVelocityCheckSamples - 1);
    if (traj.velocity(t).norm_inf() > v_max + 1e-9) return false;
  }
  return true;
}

/// Lattice graph: for every node pair (u, w) and displacement d, the cheapest
/// duration whose sampled velocity stays within v_max becomes an edge of u.
inline PrimitiveGraph build_graph(std::span<const Vec2> nodes, std::span<const Offset> displacements,
                                  std::span<const double> durations, double rho, double v_max,
                                  double cell_size = 1.0, int stride = 1) {
  if (displacements.empty()) throw std::invalid_argument("build_graph: displacement set is empty");
  for (const auto& d : displacements) {
    if (d.dx == 0 && d.dy == 0) throw std::invalid_argument("build_graph: zero displacement not allowed");
  }
  require_durations(durations);
  PrimitiveGraph g;
  g.nodes.assign(nodes.begin(), nodes.end());
  g.edges.resize(nodes.size());
  g.v_max = v_max;
  g.cell_size = cell_size;
  g.stride = stride;
  for (std::size_t u = 0; u < nodes.size(); ++u) {
    for (std::size_t w = 0; w < nodes.size(); ++w) {
      for (const Offset d : displacements) {
        const Vec2 end{d.dx * cell_size, d.dy * cell_size};
        Primitive best;
        bool found = false;
        for (double T : durations) {
          Trajectory traj = solve_min_jerk(Vec2{}, nodes[u], end, nodes[w], T);
          if (!respects_velocity_bound(traj, v_max)) continue;
          const double cost = primitive_cost(traj, rho);
          if (!found || cost < best.cost) {
            best = {traj, static_cast<int>(u), static_cast<int>(w), d, cost};
            found = true;
          }
        }
        if (found) g.edges[u].push_back(best);
      }
    }
    if (g.edges[u].empty()) {
      throw std::runtime_error("build_graph: node " + std::to_string(u) + " (v=" + std::to_string(nodes[u].x) +
                               "," + std::to_string(nodes[u].y) + ") has no feasible edges");
    }
  }
  return g;
}

/// Moves a primitive by a whole-cell offset; only the constant terms change.
inline Primitive translate(const Primitive& p, Offset cell_offset, double cell_size = 1.0) {
  Primitive out = p;
  out.traj.axis[0].c[0] += cell_offset.dx * cell_size;
  out.traj.axis[1].c[0] += cell_offset.dy * cell_size;
  return out;
}

/// 8-connected unit offsets scaled by stride.
inline std::vector<Offset> king_displacements(int stride) {
  std::vector<Offset> out;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      if (dx != 0 || dy != 0) out.push_back({dx * stride, dy * stride});
    }
  }
  return out;
}

struct GraphConfig {
  int candidates_per_axis = 5;
  int node_count = 5;
  int samples_per_axis = 21;
  double v_max = 2.0;
  int stride = 3;
  std::vector<double> durations{0.5, 1.0, 1.5, 2.0, 3.0};
  double rho = 10.0;
  double cell_size = 1.0;
};

/// Full offline pipeline: candidate grid -> greedy dispersion selection -> lattice graph.
inline PrimitiveGraph build_default_graph(const GraphConfig& cfg) {
  const auto candidates = velocity_grid(cfg.v_max, cfg.candidates_per_axis);
  const auto samples = velocity_grid(cfg.v_max, cfg.samples_per_axis);
  const auto nodes = select_vertices(candidates, samples, static_cast<std::size_t>(cfg.node_count),
                                     cfg.durations, cfg.rho);
  const auto disp = king_displacements(cfg.stride);
  return build_graph(nodes, disp, cfg.durations, cfg.rho, cfg.v_max, cfg.cell_size, cfg.stride);
}

}  // namespace ipp
