#pragma once

#include <memory>
#include <vector>

#include "ipp/episode.hpp"
#include "ipp/primitives.hpp"

namespace ipp::testing {

inline std::shared_ptr<const PrimitiveGraph> default_graph() {
  static const auto g = std::make_shared<const PrimitiveGraph>(build_default_graph(GraphConfig{}));
  return g;
}

inline SensorModel perfect_sensor() {
  SensorModel s;
  s.accuracy_at_zero = 1.0;
  s.accuracy_slope = 0.0;
  return s;
}

inline EpisodeConfig small_config(int w = 16, int h = 16, double budget_edges = 20.0) {
  EpisodeConfig c;
  c.dims = {w, h, 1.0};
  c.graph = default_graph();
  c.budget = budget_edges * mean_edge_cost(*c.graph);
  c.obs_window = 5;
  c.obs_scales = {1, 2};
  return c;
}

inline WorldMap world_with(const GridDims& d, std::initializer_list<Cell> cells) {
  WorldMap w(d);
  for (const Cell c : cells) w.set_occupied(c);
  return w;
}

inline std::vector<double> uniform_prior(const GridDims& d, double p = 0.5) {
  return std::vector<double>(d.cell_count(), p);
}

}  // namespace ipp::testing
