#pragma once

#include "vvord/dynamics.hpp"
#include "vvord/grid.hpp"
#include "vvord/rules.hpp"

#include <span>
#include <vector>

namespace vvord {

/// Equilibrium setpoints and voltages for one scenario.
struct EquilibriumResult {
    Vector q_star;
    Vector v_star;
    double kkt_residual = 0.0;  // largest coordinate-map residual at q_star
    int iterations = 0;         // sweeps (oracle) or rule updates (simulation)
};

/// Minimizes
///   1/2 q'Xq + q'(v_tilde - v_ref) + 1/2 q' diag(1/slope) q + deadband'|q|
/// over |q| <= q_max by cyclic exact coordinate minimization in ascending
/// node order. Single-phase feeders only.
EquilibriumResult solve_inner(const RuleParams& z, const FeederModel& feeder, const Scenario& scenario,
                              double tol = 1e-12, int max_sweeps = 1'000'000);

/// Same problem for transformed parameters (alpha_t = 1 is an infinite slope,
/// alpha_t = 0 freezes the DER at q = 0).
EquilibriumResult solve_inner(const TransformedParams& zt, double mu, const FeederModel& feeder,
                              const Scenario& scenario, double tol = 1e-12, int max_sweeps = 1'000'000);

/// v* = X q* + v_tilde.
Vector equilibrium_voltages(const EquilibriumResult& result, const FeederModel& feeder, const Scenario& scenario);

/// Equilibrium of the incremental rule for any feeder: the oracle on
/// single-phase feeders, the fixed point reached from q = 0 otherwise.
/// Throws NumericalError when no equilibrium is reached.
EquilibriumResult find_equilibrium(const TransformedParams& zt, double mu, const FeederModel& feeder,
                                   const Scenario& scenario);

std::vector<EquilibriumResult> find_equilibria(const TransformedParams& zt, double mu, const FeederModel& feeder,
                                               std::span<const Scenario> scenarios);

/// Mean squared deviation ||v - 1||^2 of equilibrium voltages over scenarios.
double objective_F(const TransformedParams& zt, double mu, const FeederModel& feeder,
                   std::span<const Scenario> scenarios);
double objective_F(const RuleParams& z, const FeederModel& feeder, std::span<const Scenario> scenarios);

/// Objective with all setpoints forced to zero: mean of ||v_tilde - 1||^2.
double baseline_objective(std::span<const Scenario> scenarios);

/// ||v - 1||^2.
double squared_deviation(const Vector& v);

}  // namespace vvord
