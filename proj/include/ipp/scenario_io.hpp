#pragma once

// Scenario dumps: a JSON description plus the prior as a binary field block.

#include <filesystem>
#include <fstream>
#include <string>
#include <variant>

#include "json.hpp"

#include "ipp/env_gen.hpp"
#include "ipp/grid_io.hpp"

namespace ipp {

inline nlohmann::ordered_json gmm_to_json(const GmmSpec& g) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : g.components) {
    arr.push_back({{"weight", c.weight}, {"mean", {c.mean.x, c.mean.y}}, {"var", {c.var.x, c.var.y}}});
  }
  return arr;
}

inline nlohmann::ordered_json scenario_to_json(const Scenario& s, const std::string& prior_file) {
  using nlohmann::ordered_json;
  ordered_json perts = ordered_json::array();
  for (const auto& p : s.perturbations) {
    if (const auto* a = std::get_if<ShiftCenters>(&p)) {
      perts.push_back({{"kind", "shift_centers"}, {"delta", a->delta}});
    } else if (const auto* b = std::get_if<MixNoise>(&p)) {
      perts.push_back({{"kind", "mix_noise"}, {"weight", b->weight}, {"noise", gmm_to_json(b->noise)}});
    } else if (const auto* c = std::get_if<CellNoise>(&p)) {
      perts.push_back({{"kind", "cell_noise"}, {"sigma", c->sigma}});
    }
  }
  ordered_json targets = ordered_json::array();
  for (const Cell c : s.world.targets()) targets.push_back({c.x, c.y});
  return {{"seed", s.seed},
          {"width", s.world.dims().width},
          {"height", s.world.dims().height},
          {"cell_size", s.world.dims().cell_size},
          {"truth", gmm_to_json(s.truth)},
          {"perturbations", perts},
          {"targets", targets},
          {"kl", s.kl},
          {"prior_file", prior_file}};
}

/// Writes <stem>.json and <stem>_prior.bin into dir.
inline void write_scenario(const std::filesystem::path& dir, const std::string& stem, const Scenario& s) {
  const std::string prior_name = stem + "_prior.bin";
  {
    std::ofstream out(dir / (stem + ".json"), std::ios::binary);
    if (!out) throw std::runtime_error("cannot write scenario " + stem);
    out << scenario_to_json(s, prior_name).dump(2) << '\n';
  }
  std::ofstream bin(dir / prior_name, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write scenario prior " + prior_name);
  write_field_binary(bin, s.world.dims().width, s.world.dims().height, s.prior);
}

}  // namespace ipp
