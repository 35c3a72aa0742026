#pragma once

#include "vvord/common.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vvord {

enum class PhaseLayout { single, multi };

/// Linearized feeder v = X q + v_tilde. Indices are flattened bus (or
/// bus-phase) nodes; the substation is not part of the index set.
struct FeederModel {
    Matrix x;  // reactance sensitivities
    Matrix r;  // resistance sensitivities
    double v0 = 1.0;
    PhaseLayout layout = PhaseLayout::single;
    std::vector<int> der_nodes;  // ascending, unique
    Vector q_rating;             // one entry per der_nodes element

    int n_nodes() const { return static_cast<int>(x.rows()); }
    bool single_phase() const { return layout == PhaseLayout::single; }

    /// Ratings spread over all nodes, zero where no DER is installed.
    Vector node_ratings() const;
    /// 1.0 on DER nodes, 0.0 elsewhere.
    Vector der_mask() const;
};

/// Grid conditions v_tilde for one loading scenario.
struct Scenario {
    Vector v_tilde;
};

/// A line segment of a radial feeder. Node 0 is the substation; the other
/// nodes must be numbered 1..N.
struct Branch {
    int from = 0;
    int to = 0;
    double r = 0.0;
    double x = 0.0;
};

/// Throws ValidationError when a feeder breaks its structural invariants.
/// Single-phase feeders additionally need a symmetric, positive definite X
/// with nonnegative entries and a symmetric R.
void validate_feeder(const FeederModel& feeder);

FeederModel feeder_from_json(std::string_view text);
FeederModel load_feeder(const std::filesystem::path& path);
std::string feeder_to_json(const FeederModel& feeder);

/// LinDistFlow sensitivities of a radial network: X(i, j) is twice the sum
/// of reactances on the shared part of the substation paths to i and j (R
/// likewise). The returned feeder has no DERs; see with_ders().
FeederModel build_radial_feeder(std::span<const Branch> branches, double v0);

/// Copy of the feeder with DERs installed at the given nodes.
FeederModel with_ders(FeederModel feeder, std::vector<int> nodes, const Vector& ratings);

/// v_tilde = R p - X q_load + v0 1.
Scenario grid_conditions(const FeederModel& feeder, const Vector& p, const Vector& q_load);

/// v = X q + v_tilde. Every simulation path goes through this function.
Vector grid_voltages(const FeederModel& feeder, const Vector& q, const Scenario& scenario);

/// Largest singular value by power iteration on m^T m.
double spectral_norm(const Matrix& m);

struct EigenExtremes {
    double min = 0.0;
    double max = 0.0;
};

bool is_symmetric(const Matrix& m, double tol = kSymmetryTol);
EigenExtremes symmetric_eig_extremes(const Matrix& m);
double condition_number(const Matrix& m);

}  // namespace vvord
