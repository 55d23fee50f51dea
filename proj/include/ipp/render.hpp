#pragma once

// SVG trajectory rendering. The log is replayed through the engine so the heat
// layer shows the belief at the snapshot, not just the path.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ipp/episode.hpp"
#include "ipp/episode_log.hpp"

namespace ipp {

inline constexpr int kPathSamplesPerEdge = 10;

struct ReplayResult {
  EpisodeState state;        // after `steps` steps
  std::vector<Vec2> path;    // metres, start point first
  std::size_t steps = 0;
};

inline Vec2 cell_center(Cell c, double cell_size) { return {(c.x + 0.5) * cell_size, (c.y + 0.5) * cell_size}; }

/// Steps kept in a snapshot taken when `fraction` of the budget remains.
inline std::size_t snapshot_steps(const EpisodeLog& log, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw std::invalid_argument("snapshot fraction outside [0,1]");
  const double limit = fraction * log.header.budget;
  std::size_t n = 0;
  while (n < log.steps.size() && log.steps[n].budget_left >= limit) ++n;
  return n;
}

/// Re-executes the first max_steps logged actions. Any disagreement between
/// the log and the engine is reported with the log line that caused it.
inline ReplayResult replay_log(const EpisodeEngine& engine, const WorldMap& world, std::span<const double> prior,
                               const EpisodeLog& log, std::size_t max_steps) {
  const auto& h = log.header;
  if (h.width != engine.dims().width || h.height != engine.dims().height) {
    throw LogParseError(1, "grid size does not match the configuration");
  }
  ReplayResult r;
  r.state = engine.reset(world, prior, h.seed);
  if (!(r.state.agent_cell == h.start) || r.state.node != h.start_node) {
    throw LogParseError(1, "start does not match the configuration");
  }
  const double cs = engine.dims().cell_size;
  r.path.push_back(cell_center(r.state.agent_cell, cs));
  const std::size_t n = std::min(max_steps, log.steps.size());
  for (std::size_t t = 0; t < n; ++t) {
    const auto& s = log.steps[t];
    const std::size_t line = t + 2;
    if (r.state.done) throw LogParseError(line, "step after the episode ended");
    if (s.node != r.state.node) throw LogParseError(line, "node does not replay");
    const auto mask = engine.valid_actions(r.state);
    if (static_cast<std::size_t>(s.edge) >= mask.size() || !mask[s.edge]) {
      throw LogParseError(line, "edge " + std::to_string(s.edge) + " is not valid here");
    }
    const Vec2 origin = cell_center(r.state.agent_cell, cs);
    const auto& traj = engine.primitive(r.state.node, s.edge).traj;
    for (int k = 1; k <= kPathSamplesPerEdge; ++k) {
      r.path.push_back(origin + traj.position(traj.duration * k / kPathSamplesPerEdge));
    }
    engine.step(r.state, s.edge);
    if (!(r.state.agent_cell == s.agent_cell)) throw LogParseError(line, "agent cell does not replay");
    if (std::abs(r.state.budget_left - s.budget_left) > 1e-9 * std::max(1.0, h.budget)) {
      throw LogParseError(line, "budget does not replay");
    }
  }
  r.steps = n;
  return r;
}

struct RenderOptions {
  double fraction = 0.0;     // remaining-budget fraction of the snapshot
  int pixels_per_cell = 16;
  bool show_prior = false;   // heat layer from the prior instead of the posterior
};

namespace detail {

inline std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace detail

inline std::string render_svg(const EpisodeEngine& engine, const WorldMap& world, std::span<const double> prior,
                              const EpisodeLog& log, const RenderOptions& o = {}) {
  if (o.pixels_per_cell < 1) throw std::invalid_argument("pixels_per_cell must be >= 1");
  const auto rep = replay_log(engine, world, prior, log, snapshot_steps(log, o.fraction));
  const auto& d = engine.dims();
  const double px = o.pixels_per_cell, per_m = px / d.cell_size;
  using detail::fmt3;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << d.width * o.pixels_per_cell << "\" height=\""
      << d.height * o.pixels_per_cell << "\" viewBox=\"0 0 " << d.width * o.pixels_per_cell << ' '
      << d.height * o.pixels_per_cell << "\">\n";
  svg << "<g id=\"heat\" shape-rendering=\"crispEdges\">\n";
  const auto post = rep.state.belief.posteriors();
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * d.width + x;
      const double p = o.show_prior ? prior[i] : post[i];
      const int v = static_cast<int>(std::lround(255.0 * (1.0 - std::clamp(p, 0.0, 1.0))));
      svg << "<rect x=\"" << x * o.pixels_per_cell << "\" y=\"" << y * o.pixels_per_cell << "\" width=\""
          << o.pixels_per_cell << "\" height=\"" << o.pixels_per_cell << "\" fill=\"rgb(" << v << ',' << v
          << ",255)\"/>\n";
    }
  }
  svg << "</g>\n<g id=\"targets\">\n";
  for (std::size_t k = 0; k < rep.state.targets.size(); ++k) {
    const Vec2 c = cell_center(rep.state.targets[k], d.cell_size);
    svg << "<circle cx=\"" << fmt3(c.x * per_m) << "\" cy=\"" << fmt3(c.y * per_m) << "\" r=\"" << fmt3(0.3 * px)
        << "\" fill=\"" << (rep.state.found[k] ? "gold" : "none") << "\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
  }
  svg << "</g>\n<polyline id=\"path\" fill=\"none\" stroke=\"#222\" stroke-width=\"2\" points=\"";
  for (std::size_t k = 0; k < rep.path.size(); ++k) {
    if (k) svg << ' ';
    svg << fmt3(rep.path[k].x * per_m) << ',' << fmt3(rep.path[k].y * per_m);
  }
  svg << "\"/>\n";
  const Vec2 a = rep.path.front(), b = rep.path.back();
  svg << "<circle id=\"start\" cx=\"" << fmt3(a.x * per_m) << "\" cy=\"" << fmt3(a.y * per_m) << "\" r=\""
      << fmt3(0.35 * px) << "\" fill=\"green\"/>\n";
  svg << "<circle id=\"end\" cx=\"" << fmt3(b.x * per_m) << "\" cy=\"" << fmt3(b.y * per_m) << "\" r=\""
      << fmt3(0.35 * px) << "\" fill=\"red\"/>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace ipp
