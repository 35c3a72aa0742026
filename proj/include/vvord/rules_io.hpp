#pragma once

#include "vvord/grid.hpp"
#include "vvord/rules.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace vvord {

/// Contents of a rule parameter file. Exactly one member is set: entries with
/// "alpha"/"delta" give the physical form, "alpha_t"/"delta_t" the
/// transformed one.
struct RulesFile {
    std::optional<RuleParams> physical;
    std::optional<TransformedParams> transformed;

    TransformedParams as_transformed(double mu) const;
    RuleParams as_physical(double mu) const;
};

/// JSON array with one object per DER node:
///   {"node", "v_ref", "delta", "alpha", "q_max", "sigma"?}   or
///   {"node", "v_ref", "delta_t", "alpha_t", "q_max"}.
/// Every DER must appear exactly once; nodes without a DER stay uncontrolled.
RulesFile rules_from_json(std::string_view text, const FeederModel& feeder);
RulesFile load_rules(const std::filesystem::path& path, const FeederModel& feeder);

std::string rules_to_json(const TransformedParams& zt, const FeederModel& feeder);
std::string rules_to_json(const RuleParams& z, const FeederModel& feeder);

}  // namespace vvord
