#include "vvord/equilibrium.hpp"

#include "vvord/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vvord {

namespace {

// Inner-problem data in a form shared by both parameterizations.
struct InnerProblem {
    Vector v_ref, deadband, inv_slope, q_max;
    std::vector<bool> active;
};

InnerProblem from_physical(const RuleParams& z) {
    const int n = z.size();
    InnerProblem p{z.v_ref, z.deadband, Vector::Zero(n), z.q_max, std::vector<bool>(static_cast<std::size_t>(n))};
    for (int i = 0; i < n; ++i) {
        const bool on = z.q_max(i) > 0.0 && z.slope(i) > 0.0;
        p.active[static_cast<std::size_t>(i)] = on;
        if (on) p.inv_slope(i) = std::isinf(z.slope(i)) ? 0.0 : 1.0 / z.slope(i);
        if (z.q_max(i) < 0.0 || z.deadband(i) < 0.0 || z.slope(i) < 0.0) {
            throw ValidationError("solve_inner: rule parameters must be nonnegative");
        }
    }
    return p;
}

InnerProblem from_transformed_params(const TransformedParams& zt, double mu) {
    if (!(mu > 0.0)) throw ValidationError("solve_inner: mu must be positive");
    const int n = zt.size();
    InnerProblem p{zt.v_ref, Vector::Zero(n), Vector::Zero(n), zt.q_max, std::vector<bool>(static_cast<std::size_t>(n))};
    for (int i = 0; i < n; ++i) {
        const bool on = zt.q_max(i) > 0.0 && zt.alpha_t(i) > 0.0;
        p.active[static_cast<std::size_t>(i)] = on;
        if (!on) continue;
        if (zt.alpha_t(i) > 1.0) throw ValidationError("solve_inner: alpha_t must not exceed 1");
        p.inv_slope(i) = (1.0 - zt.alpha_t(i)) / (mu * zt.alpha_t(i));
        p.deadband(i) = zt.delta_t(i) / zt.alpha_t(i);
    }
    return p;
}

double soft_threshold(double b, double t) {
    if (b > t) return b - t;
    if (b < -t) return b + t;
    return 0.0;
}

EquilibriumResult coordinate_descent(const InnerProblem& p, const FeederModel& feeder, const Scenario& scenario,
                                     double tol, int max_sweeps) {
    if (!feeder.single_phase()) {
        throw ValidationError("solve_inner: equilibria are minimizers only on single-phase feeders");
    }
    const int n = feeder.n_nodes();
    if (scenario.v_tilde.size() != n) throw ValidationError("solve_inner: scenario length mismatch");
    if (p.v_ref.size() != n) throw ValidationError("solve_inner: rule parameters do not match feeder size");
    const Matrix& x = feeder.x;
    for (int i = 0; i < n; ++i) {
        if (!(x(i, i) > 0.0)) throw ValidationError("solve_inner: X must be positive definite");
    }
    const Vector offset = scenario.v_tilde - p.v_ref;

    // Minimizer of 1/2 a q^2 + b q + d|q| over |q| <= q_max.
    auto coordinate_min = [&](int i, double b) {
        const double a = x(i, i) + p.inv_slope(i);
        const double q = -soft_threshold(b, p.deadband(i)) / a;
        return std::clamp(q, -p.q_max(i), p.q_max(i));
    };

    Vector q = Vector::Zero(n);
    Vector xq = Vector::Zero(n);
    EquilibriumResult result;
    bool converged = false;
    for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
        double largest_step = 0.0;
        for (int i = 0; i < n; ++i) {
            if (!p.active[static_cast<std::size_t>(i)]) continue;
            const double b = offset(i) + xq(i) - x(i, i) * q(i);
            const double step = coordinate_min(i, b) - q(i);
            if (step != 0.0) {
                q(i) += step;
                xq += x.col(i) * step;
            }
            largest_step = std::max(largest_step, std::abs(step));
        }
        result.iterations = sweep;
        if (sweep % 64 == 0) xq = x * q;
        if (largest_step <= tol) {
            converged = true;
            break;
        }
    }

    xq = x * q;
    double residual = 0.0;
    for (int i = 0; i < n; ++i) {
        if (!p.active[static_cast<std::size_t>(i)]) continue;
        const double b = offset(i) + xq(i) - x(i, i) * q(i);
        residual = std::max(residual, std::abs(coordinate_min(i, b) - q(i)));
    }
    if (!converged) {
        throw NumericalError("solve_inner: tolerance not reached after " + std::to_string(max_sweeps) + " sweeps");
    }
    result.kkt_residual = residual;
    result.q_star = std::move(q);
    result.v_star = grid_voltages(feeder, result.q_star, scenario);
    return result;
}

}  // namespace

EquilibriumResult solve_inner(const RuleParams& z, const FeederModel& feeder, const Scenario& scenario, double tol,
                              int max_sweeps) {
    return coordinate_descent(from_physical(z), feeder, scenario, tol, max_sweeps);
}

EquilibriumResult solve_inner(const TransformedParams& zt, double mu, const FeederModel& feeder,
                              const Scenario& scenario, double tol, int max_sweeps) {
    return coordinate_descent(from_transformed_params(zt, mu), feeder, scenario, tol, max_sweeps);
}

Vector equilibrium_voltages(const EquilibriumResult& result, const FeederModel& feeder, const Scenario& scenario) {
    if (result.q_star.size() != feeder.n_nodes() || scenario.v_tilde.size() != feeder.n_nodes()) {
        throw ValidationError("equilibrium_voltages: length mismatch");
    }
    return grid_voltages(feeder, result.q_star, scenario);
}

EquilibriumResult find_equilibrium(const TransformedParams& zt, double mu, const FeederModel& feeder,
                                   const Scenario& scenario) {
    if (feeder.single_phase()) return solve_inner(zt, mu, feeder, scenario);
    const auto trace = simulate_incremental(zt, mu, false, feeder, scenario, StopRule::tolerance(1e-12, 1'000'000));
    if (!trace.converged) throw NumericalError("incremental dynamics did not reach an equilibrium");
    EquilibriumResult result;
    result.q_star = trace.q_history.back();
    result.v_star = trace.v_history.back();
    result.kkt_residual = trace.final_residual;
    result.iterations = trace.iterations_used;
    return result;
}

std::vector<EquilibriumResult> find_equilibria(const TransformedParams& zt, double mu, const FeederModel& feeder,
                                               std::span<const Scenario> scenarios) {
    std::vector<EquilibriumResult> out(scenarios.size());
    parallel_for(scenarios.size(), [&](std::size_t s) { out[s] = find_equilibrium(zt, mu, feeder, scenarios[s]); });
    return out;
}

double squared_deviation(const Vector& v) { return (v.array() - 1.0).square().sum(); }

double objective_F(const TransformedParams& zt, double mu, const FeederModel& feeder,
                   std::span<const Scenario> scenarios) {
    if (scenarios.empty()) throw ValidationError("objective_F: no scenarios");
    const auto eq = find_equilibria(zt, mu, feeder, scenarios);
    std::vector<double> terms(eq.size());
    for (std::size_t s = 0; s < eq.size(); ++s) terms[s] = squared_deviation(eq[s].v_star);
    return pairwise_sum(terms) / static_cast<double>(terms.size());
}

double objective_F(const RuleParams& z, const FeederModel& feeder, std::span<const Scenario> scenarios) {
    if (scenarios.empty()) throw ValidationError("objective_F: no scenarios");
    if (!feeder.single_phase()) {
        const double mu = default_step_size(feeder);
        return objective_F(to_transformed(z, mu), mu, feeder, scenarios);
    }
    std::vector<double> terms(scenarios.size());
    parallel_for(scenarios.size(), [&](std::size_t s) {
        terms[s] = squared_deviation(solve_inner(z, feeder, scenarios[s]).v_star);
    });
    return pairwise_sum(terms) / static_cast<double>(terms.size());
}

double baseline_objective(std::span<const Scenario> scenarios) {
    if (scenarios.empty()) throw ValidationError("baseline_objective: no scenarios");
    std::vector<double> terms(scenarios.size());
    for (std::size_t s = 0; s < scenarios.size(); ++s) terms[s] = squared_deviation(scenarios[s].v_tilde);
    return pairwise_sum(terms) / static_cast<double>(terms.size());
}

}  // namespace vvord
