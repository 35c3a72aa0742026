#pragma once

#include "vvord/grid.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vvord {

struct ScenarioSet {
    std::vector<Scenario> scenarios;
    std::string provenance;  // "file:<path>" or "synthetic(seed=..., ...)"

    std::size_t size() const { return scenarios.size(); }
    std::span<const Scenario> view() const { return scenarios; }
};

/// Parses scenario CSV text. An optional non-numeric header row is skipped.
/// Rows of width n are v_tilde directly; rows of width 2n hold (p, q_load)
/// and are mapped through grid_conditions().
ScenarioSet parse_scenarios_csv(std::string_view text, const FeederModel& feeder, std::string provenance);
ScenarioSet load_scenarios(const std::filesystem::path& path, const FeederModel& feeder);

/// One row per scenario, header "node0,node1,...".
std::string scenarios_to_csv(const ScenarioSet& set);

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

/// Draws per-node active load and solar generation uniformly from the given
/// ranges (load first, then solar, node by node; scenario s uses stream s),
/// sets p = solar - load and q_load = reactive_ratio * load, and maps them
/// through grid_conditions().
ScenarioSet generate_synthetic(const FeederModel& feeder, int count, Range load, Range solar, std::uint64_t seed,
                               double reactive_ratio = 0.2);

}  // namespace vvord
