#pragma once

// Versioned binary graph file ("IPPG") and a CSV dump for inspection.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "ipp/binary_io.hpp"
#include "ipp/grid_io.hpp"
#include "ipp/primitives.hpp"

namespace ipp {

inline constexpr std::uint32_t kGraphFileVersion = 1;

/// Layout: magic, version, node count (u32), edge count (u64), stride (i32),
/// v_max, cell_size, nodes as (vx, vy), then edges grouped by start node:
/// start, end (u32), dx, dy (i32), duration, cost, x coefficients, y coefficients.
inline void write_graph(std::ostream& out, const PrimitiveGraph& g) {
  g.validate();
  io::write_magic(out, "IPPG");
  io::write_u32_le(out, kGraphFileVersion);
  io::write_u32_le(out, static_cast<std::uint32_t>(g.nodes.size()));
  io::write_u64_le(out, g.edge_count());
  io::write_i32_le(out, g.stride);
  io::write_f64_le(out, g.v_max);
  io::write_f64_le(out, g.cell_size);
  for (const auto& n : g.nodes) {
    io::write_f64_le(out, n.x);
    io::write_f64_le(out, n.y);
  }
  for (const auto& row : g.edges) {
    for (const auto& e : row) {
      io::write_u32_le(out, static_cast<std::uint32_t>(e.start_node));
      io::write_u32_le(out, static_cast<std::uint32_t>(e.end_node));
      io::write_i32_le(out, e.displacement.dx);
      io::write_i32_le(out, e.displacement.dy);
      io::write_f64_le(out, e.traj.duration);
      io::write_f64_le(out, e.cost);
      for (const auto& q : e.traj.axis) {
        for (double c : q.c) io::write_f64_le(out, c);
      }
    }
  }
}

inline PrimitiveGraph read_graph(std::istream& in) {
  io::expect_magic(in, "IPPG");
  const auto version = io::read_u32_le(in);
  if (version != kGraphFileVersion) throw io::FormatError("unsupported graph version " + std::to_string(version));
  const auto n_nodes = io::read_u32_le(in);
  const auto n_edges = io::read_u64_le(in);
  if (n_nodes == 0 || n_nodes > (1u << 16) || n_edges > (1ull << 24)) {
    throw io::FormatError("graph header has implausible counts");
  }
  PrimitiveGraph g;
  g.stride = io::read_i32_le(in);
  g.v_max = io::read_f64_le(in);
  g.cell_size = io::read_f64_le(in);
  if (!(g.cell_size > 0.0) || !std::isfinite(g.v_max)) throw io::FormatError("graph header has invalid scalars");
  g.nodes.resize(n_nodes);
  for (auto& n : g.nodes) {
    n.x = io::read_f64_le(in);
    n.y = io::read_f64_le(in);
  }
  g.edges.resize(n_nodes);
  int last_start = 0;
  for (std::uint64_t k = 0; k < n_edges; ++k) {
    Primitive e;
    e.start_node = static_cast<int>(io::read_u32_le(in));
    e.end_node = static_cast<int>(io::read_u32_le(in));
    e.displacement.dx = io::read_i32_le(in);
    e.displacement.dy = io::read_i32_le(in);
    e.traj.duration = io::read_f64_le(in);
    e.cost = io::read_f64_le(in);
    for (auto& q : e.traj.axis) {
      for (double& c : q.c) c = io::read_f64_le(in);
    }
    if (e.start_node < last_start || e.start_node >= static_cast<int>(n_nodes)) {
      throw io::FormatError("graph edge " + std::to_string(k) + " is out of order");
    }
    last_start = e.start_node;
    g.edges[static_cast<std::size_t>(e.start_node)].push_back(e);
  }
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw io::FormatError(std::string("graph file is inconsistent: ") + e.what());
  }
  return g;
}

inline void save_graph(const std::string& path, const PrimitiveGraph& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_graph(out, g);
  if (!out) throw std::runtime_error("failed writing " + path);
}

inline PrimitiveGraph load_graph(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open graph " + path);
  return read_graph(in);
}

inline void write_graph_csv(std::ostream& out, const PrimitiveGraph& g) {
  out << "start_node,end_node,v0x,v0y,v1x,v1y,dx,dy,duration,cost\n";
  for (const auto& row : g.edges) {
    for (const auto& e : row) {
      const Vec2 a = g.nodes[static_cast<std::size_t>(e.start_node)];
      const Vec2 b = g.nodes[static_cast<std::size_t>(e.end_node)];
      out << e.start_node << ',' << e.end_node << ',' << format_double(a.x) << ',' << format_double(a.y) << ','
          << format_double(b.x) << ',' << format_double(b.y) << ',' << e.displacement.dx << ','
          << e.displacement.dy << ',' << format_double(e.traj.duration) << ',' << format_double(e.cost) << '\n';
    }
  }
}

}  // namespace ipp
