#include "vvord/rules_io.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace vvord {

namespace {

using nlohmann::json;

constexpr double kRatingSlack = 1e-12;

double field(const json& entry, const char* key) {
    if (!entry.contains(key)) throw ValidationError(std::string("rules: entry is missing '") + key + "'");
    const double v = entry.at(key).get<double>();
    if (!std::isfinite(v)) throw ValidationError(std::string("rules: '") + key + "' must be finite");
    return v;
}

void check_common(int node, double v_ref, double q_max, double rating) {
    const std::string where = "rules: node " + std::to_string(node) + ": ";
    if (v_ref < 0.95 || v_ref > 1.05) throw ValidationError(where + "v_ref outside [0.95, 1.05]");
    if (q_max < 0.0) throw ValidationError(where + "q_max must be nonnegative");
    if (q_max > rating + kRatingSlack) throw ValidationError(where + "q_max exceeds the DER rating");
}

}  // namespace

TransformedParams RulesFile::as_transformed(double mu) const {
    if (transformed) return *transformed;
    return to_transformed(*physical, mu);
}

RuleParams RulesFile::as_physical(double mu) const {
    if (physical) return *physical;
    return from_transformed(*transformed, mu);
}

RulesFile rules_from_json(std::string_view text, const FeederModel& feeder) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("rules: parse error: ") + e.what());
    }
    if (!doc.is_array() || doc.empty()) throw ValidationError("rules: expected a non-empty JSON array");
    const bool transformed = doc.front().contains("alpha_t");
    const int n = feeder.n_nodes();
    const Vector ratings = feeder.node_ratings();
    const std::set<int> ders(feeder.der_nodes.begin(), feeder.der_nodes.end());
    std::set<int> seen;

    RulesFile out;
    auto zt = TransformedParams::uncontrolled(n);
    auto z = RuleParams::uncontrolled(n);
    try {
        for (const json& entry : doc) {
            const int node = entry.at("node").get<int>();
            if (!ders.count(node)) throw ValidationError("rules: node " + std::to_string(node) + " hosts no DER");
            if (!seen.insert(node).second) throw ValidationError("rules: node " + std::to_string(node) + " repeated");
            if (entry.contains("alpha_t") != transformed) {
                throw ValidationError("rules: entries mix physical and transformed parameters");
            }
            const double v_ref = field(entry, "v_ref");
            const double q_max = field(entry, "q_max");
            check_common(node, v_ref, q_max, ratings(node));
            const std::string where = "rules: node " + std::to_string(node) + ": ";
            if (transformed) {
                const double delta_t = field(entry, "delta_t");
                const double alpha_t = field(entry, "alpha_t");
                if (delta_t < 0.0) throw ValidationError(where + "delta_t must be nonnegative");
                if (alpha_t < 0.0 || alpha_t > 1.0) throw ValidationError(where + "alpha_t outside [0, 1]");
                zt.set_node(node, {v_ref, delta_t, alpha_t, q_max});
            } else {
                NodeRule r;
                r.v_ref = v_ref;
                r.deadband = field(entry, "delta");
                r.slope = field(entry, "alpha");
                r.q_max = q_max;
                if (r.deadband < 0.0) throw ValidationError(where + "delta must be nonnegative");
                if (!(r.slope > 0.0)) throw ValidationError(where + "alpha must be positive");
                r.sigma = r.deadband + r.q_max / r.slope;
                if (entry.contains("sigma") && !entry.at("sigma").is_null()) {
                    const double sigma = field(entry, "sigma");
                    if (std::abs(sigma - r.sigma) > 1e-9 * std::max(1.0, std::abs(sigma))) {
                        throw ValidationError(where + "sigma is inconsistent with alpha = q_max/(sigma - delta)");
                    }
                    r.sigma = sigma;
                }
                z.set_node(node, r);
            }
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("rules: ") + e.what());
    }
    for (int node : feeder.der_nodes) {
        if (!seen.count(node)) throw ValidationError("rules: no entry for DER node " + std::to_string(node));
    }
    if (transformed) {
        out.transformed = std::move(zt);
    } else {
        out.physical = std::move(z);
    }
    return out;
}

RulesFile load_rules(const std::filesystem::path& path, const FeederModel& feeder) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open rules file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return rules_from_json(buf.str(), feeder);
}

std::string rules_to_json(const TransformedParams& zt, const FeederModel& feeder) {
    json doc = json::array();
    for (int node : feeder.der_nodes) {
        doc.push_back({{"node", node},
                       {"v_ref", zt.v_ref(node)},
                       {"delta_t", zt.delta_t(node)},
                       {"alpha_t", zt.alpha_t(node)},
                       {"q_max", zt.q_max(node)}});
    }
    return doc.dump(2) + "\n";
}

std::string rules_to_json(const RuleParams& z, const FeederModel& feeder) {
    json doc = json::array();
    for (int node : feeder.der_nodes) {
        doc.push_back({{"node", node},
                       {"v_ref", z.v_ref(node)},
                       {"delta", z.deadband(node)},
                       {"alpha", z.slope(node)},
                       {"q_max", z.q_max(node)},
                       {"sigma", z.sigma(node)}});
    }
    return doc.dump(2) + "\n";
}

}  // namespace vvord
