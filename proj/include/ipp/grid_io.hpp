#pragma once

// Grid serialization: row-major posteriors as CSV, or as a binary block of
// little-endian f64 prefixed by u32 width and height.

#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ipp/binary_io.hpp"
#include "ipp/grid.hpp"

namespace ipp {

/// Shortest text that round-trips a double; used everywhere text output must be byte-stable.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct FieldBlock {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<double> values;
};

inline void write_field_csv(std::ostream& out, int width, int height, std::span<const double> values) {
  if (values.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw std::invalid_argument("write_field_csv: size mismatch");
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (x) out << ',';
      out << format_double(values[static_cast<std::size_t>(y) * width + x]);
    }
    out << '\n';
  }
}

inline void write_grid_csv(std::ostream& out, const OccupancyGrid& grid) {
  const auto post = grid.posteriors();
  write_field_csv(out, grid.dims().width, grid.dims().height, post);
}

inline void write_field_binary(std::ostream& out, int width, int height, std::span<const double> values) {
  if (values.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw std::invalid_argument("write_field_binary: size mismatch");
  }
  io::write_u32_le(out, static_cast<std::uint32_t>(width));
  io::write_u32_le(out, static_cast<std::uint32_t>(height));
  for (double v : values) io::write_f64_le(out, v);
}

inline void write_grid_binary(std::ostream& out, const OccupancyGrid& grid) {
  const auto post = grid.posteriors();
  write_field_binary(out, grid.dims().width, grid.dims().height, post);
}

inline FieldBlock read_field_binary(std::istream& in) {
  FieldBlock b;
  b.width = io::read_u32_le(in);
  b.height = io::read_u32_le(in);
  const std::size_t n = static_cast<std::size_t>(b.width) * b.height;
  if (b.width == 0 || b.height == 0 || n > (std::size_t{1} << 28)) {
    throw io::FormatError("field block has implausible dimensions");
  }
  b.values.resize(n);
  for (auto& v : b.values) v = io::read_f64_le(in);
  return b;
}

}  // namespace ipp
