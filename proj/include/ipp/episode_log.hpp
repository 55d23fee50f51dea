#pragma once

// JSON-lines episode logs: one header record, one record per step, one
// summary record.

#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ipp/binary_io.hpp"
#include "ipp/runner.hpp"

namespace ipp {

struct LogHeader {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;  // episode seed passed to reset
  std::uint64_t scenario_seed = 0;
  std::string planner;
  int width = 0;
  int height = 0;
  double budget = 0.0;
  Cell start;
  int start_node = 0;
  double initial_entropy = 0.0;
};

struct LogStep {
  int t = 0;
  int node = 0;  // node the edge departs from
  int edge = 0;
  Cell agent_cell;  // after the step
  RewardBreakdown reward;
  double budget_left = 0.0;
  double entropy = 0.0;
  std::size_t found = 0;
};

struct EpisodeLog {
  LogHeader header;
  std::vector<LogStep> steps;
  EpisodeMetrics metrics;
};

class LogParseError : public io::FormatError {
public:
  LogParseError(std::size_t line, const std::string& what)
      : io::FormatError("episode log line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline EpisodeLog make_log(const LogHeader& header, const EpisodeRecord& rec) {
  EpisodeLog log;
  log.header = header;
  log.header.start = rec.start;
  log.header.start_node = rec.start_node;
  log.header.initial_entropy = rec.initial_entropy;
  int node = rec.start_node;
  for (std::size_t t = 0; t < rec.steps.size(); ++t) {
    const auto& s = rec.steps[t];
    log.steps.push_back({static_cast<int>(t), node, s.action, s.cell_after, s.reward, s.budget_left, s.entropy, s.found});
    node = s.node_after;
  }
  log.metrics = rec.metrics;
  return log;
}

inline void write_log(std::ostream& out, const EpisodeLog& log) {
  using nlohmann::ordered_json;
  const auto& h = log.header;
  ordered_json head{{"type", "header"},
                    {"config_hash", hex64(h.config_hash)},
                    {"seed", h.seed},
                    {"scenario_seed", h.scenario_seed},
                    {"planner", h.planner},
                    {"width", h.width},
                    {"height", h.height},
                    {"budget", h.budget},
                    {"start", {h.start.x, h.start.y}},
                    {"start_node", h.start_node},
                    {"initial_entropy", h.initial_entropy}};
  out << head.dump() << '\n';
  for (const auto& s : log.steps) {
    ordered_json j{{"type", "step"},
                   {"t", s.t},
                   {"node", s.node},
                   {"edge", s.edge},
                   {"agent_cell", {s.agent_cell.x, s.agent_cell.y}},
                   {"reward",
                    {{"entropy", s.reward.entropy},
                     {"coverage", s.reward.coverage},
                     {"target", s.reward.target},
                     {"cost", s.reward.cost},
                     {"total", s.reward.total}}},
                   {"budget_left", s.budget_left},
                   {"entropy", s.entropy},
                   {"found", s.found}};
    out << j.dump() << '\n';
  }
  ordered_json tail{{"type", "summary"},
                    {"steps", log.steps.size()},
                    {"coverage_pct", log.metrics.coverage_pct},
                    {"entropy_reduction_pct", log.metrics.entropy_reduction_pct},
                    {"search_eff_pct", log.metrics.search_eff_pct}};
  out << tail.dump() << '\n';
}

namespace detail {

inline Cell cell_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("cell must be a two-element array");
  return {j.at(0).get<int>(), j.at(1).get<int>()};
}

}  // namespace detail

/// Strict reader: every record must be well formed, steps must be numbered
/// 0, 1, ... and the summary must come last.
inline EpisodeLog read_log(std::istream& in) {
  EpisodeLog log;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false, have_summary = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (have_summary) throw LogParseError(lineno, "record after summary");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw LogParseError(lineno, std::string("malformed JSON: ") + e.what());
    }
    try {
      const auto type = j.at("type").get<std::string>();
      if (type == "header") {
        if (have_header) throw std::invalid_argument("duplicate header");
        auto& h = log.header;
        h.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
        h.seed = j.at("seed").get<std::uint64_t>();
        h.scenario_seed = j.at("scenario_seed").get<std::uint64_t>();
        h.planner = j.at("planner").get<std::string>();
        h.width = j.at("width").get<int>();
        h.height = j.at("height").get<int>();
        h.budget = j.at("budget").get<double>();
        h.start = detail::cell_from(j.at("start"));
        h.start_node = j.at("start_node").get<int>();
        h.initial_entropy = j.at("initial_entropy").get<double>();
        if (h.width < 1 || h.height < 1) throw std::invalid_argument("non-positive grid size");
        have_header = true;
      } else if (type == "step") {
        if (!have_header) throw std::invalid_argument("step before header");
        LogStep s;
        s.t = j.at("t").get<int>();
        if (s.t != static_cast<int>(log.steps.size())) throw std::invalid_argument("step index out of sequence");
        s.node = j.at("node").get<int>();
        s.edge = j.at("edge").get<int>();
        s.agent_cell = detail::cell_from(j.at("agent_cell"));
        const auto& r = j.at("reward");
        s.reward = {r.at("entropy").get<double>(), r.at("coverage").get<double>(), r.at("target").get<double>(),
                    r.at("cost").get<double>(), r.at("total").get<double>()};
        s.budget_left = j.at("budget_left").get<double>();
        s.entropy = j.at("entropy").get<double>();
        s.found = j.at("found").get<std::size_t>();
        if (s.node < 0 || s.edge < 0) throw std::invalid_argument("negative node or edge");
        log.steps.push_back(s);
      } else if (type == "summary") {
        if (!have_header) throw std::invalid_argument("summary before header");
        if (j.at("steps").get<std::size_t>() != log.steps.size()) throw std::invalid_argument("step count mismatch");
        log.metrics = {j.at("coverage_pct").get<double>(), j.at("entropy_reduction_pct").get<double>(),
                       j.at("search_eff_pct").get<double>()};
        have_summary = true;
      } else {
        throw std::invalid_argument("unknown record type '" + type + "'");
      }
    } catch (const LogParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw LogParseError(lineno, e.what());
    }
  }
  if (!have_header) throw LogParseError(lineno + 1, "missing header record");
  if (!have_summary) throw LogParseError(lineno + 1, "missing summary record");
  return log;
}

inline EpisodeLog parse_log(const std::string& text) {
  std::istringstream in(text);
  return read_log(in);
}

}  // namespace ipp
