#pragma once

// Downward-looking binary camera: square footprint and altitude-dependent accuracy.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "ipp/grid.hpp"
#include "ipp/rng.hpp"

namespace ipp {

struct SensorModel {
  double altitude = 3.0;          // m
  double fov_half_angle = 0.5;    // rad
  double accuracy_at_zero = 0.95;
  double accuracy_slope = 0.01;   // per metre
  double accuracy_floor = 0.6;

  void validate() const {
    if (!(altitude >= 0.0)) throw std::invalid_argument("sensor altitude must be >= 0");
    if (!(fov_half_angle > 0.0 && fov_half_angle < std::numbers::pi / 2)) {
      throw std::invalid_argument("sensor fov_half_angle must lie in (0, pi/2)");
    }
    if (!(accuracy_floor > 0.5 && accuracy_floor <= accuracy_at_zero && accuracy_at_zero <= 1.0)) {
      throw std::invalid_argument("sensor accuracies must satisfy 0.5 < floor <= a0 <= 1");
    }
    if (!(accuracy_slope >= 0.0)) throw std::invalid_argument("sensor accuracy_slope must be >= 0");
  }
};

/// Symmetric: p(z=1|occupied) = p(z=0|free) = accuracy.
inline double accuracy(const SensorModel& m, double altitude) {
  return std::max(m.accuracy_floor, m.accuracy_at_zero - m.accuracy_slope * altitude);
}

inline double accuracy(const SensorModel& m) { return accuracy(m, m.altitude); }

inline int footprint_half_width(const SensorModel& m, double cell_size) {
  // The epsilon keeps e.g. 3*tan(pi/4) from flooring to 2.
  return static_cast<int>(std::floor(m.altitude * std::tan(m.fov_half_angle) / cell_size + 1e-9));
}

/// Cells under the camera, row-major, clipped to the grid.
inline std::vector<Cell> footprint(const SensorModel& m, Cell agent, const GridDims& dims) {
  if (!dims.contains(agent)) throw std::out_of_range("footprint: agent cell outside grid");
  const int hw = footprint_half_width(m, dims.cell_size);
  std::vector<Cell> cells;
  for (int y = std::max(0, agent.y - hw); y <= std::min(dims.height - 1, agent.y + hw); ++y) {
    for (int x = std::max(0, agent.x - hw); x <= std::min(dims.width - 1, agent.x + hw); ++x) {
      cells.push_back({x, y});
    }
  }
  return cells;
}

inline BinaryMeasurement sample_measurement(const SensorModel& m, const WorldMap& world, Cell cell, Rng& rng) {
  const double acc = accuracy(m);
  const bool truth = world.occupied(cell);
  const bool correct = uniform01(rng) < acc;
  return {cell, (truth == correct) ? 1 : 0, acc};
}

/// Measures each listed cell once, folds it into the belief, marks coverage.
inline std::vector<BinaryMeasurement> observe_cells(const SensorModel& m, OccupancyGrid& grid,
                                                    CellMask& coverage, const WorldMap& world,
                                                    const std::vector<Cell>& cells, Rng& rng) {
  std::vector<BinaryMeasurement> out;
  out.reserve(cells.size());
  for (const Cell c : cells) {
    auto meas = sample_measurement(m, world, c, rng);
    grid.update(meas);
    coverage.set(c);
    out.push_back(meas);
  }
  return out;
}

inline std::vector<BinaryMeasurement> observe(const SensorModel& m, OccupancyGrid& grid, CellMask& coverage,
                                              const WorldMap& world, Cell agent, Rng& rng) {
  return observe_cells(m, grid, coverage, world, footprint(m, agent, grid.dims()), rng);
}

}  // namespace ipp
