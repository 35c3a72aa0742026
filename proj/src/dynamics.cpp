#include "vvord/dynamics.hpp"

#include <cmath>
#include <string>

namespace vvord {

namespace {

constexpr double kDivergenceFactor = 1e3;

void check_scenario(const FeederModel& feeder, const Scenario& scenario) {
    if (scenario.v_tilde.size() != feeder.n_nodes()) {
        throw ValidationError("scenario length " + std::to_string(scenario.v_tilde.size()) +
                              " does not match feeder size " + std::to_string(feeder.n_nodes()));
    }
    if (!scenario.v_tilde.allFinite()) throw ValidationError("scenario has non-finite entries");
}

void check_stop(const StopRule& stop) {
    if (stop.max_steps < 1) throw ValidationError("stop rule: at least one step required");
    if (!(stop.tol >= 0.0)) throw ValidationError("stop rule: tolerance must be nonnegative");
}

// Shared driver; `update` maps (t, q, v) to q^{t}.
template <class Update>
SimulationTrace run_loop(const FeederModel& feeder, const Scenario& scenario, const StopRule& stop,
                         double divergence_limit, Update&& update) {
    check_scenario(feeder, scenario);
    check_stop(stop);
    SimulationTrace trace;
    Vector q = Vector::Zero(feeder.n_nodes());
    Vector v = grid_voltages(feeder, q, scenario);
    trace.q_history.push_back(q);
    trace.v_history.push_back(v);
    for (int t = 1; t <= stop.max_steps; ++t) {
        Vector q_next = update(t, q, v);
        trace.final_residual = (q_next - q).norm();
        q = std::move(q_next);
        v = grid_voltages(feeder, q, scenario);
        trace.q_history.push_back(q);
        trace.v_history.push_back(v);
        trace.iterations_used = t;
        trace.converged = trace.final_residual <= stop.tol;
        if (!q.allFinite() || q.norm() > divergence_limit) {
            trace.diverged = true;
            trace.converged = false;
            break;
        }
        if (stop.kind == StopRule::Kind::tolerance && trace.converged) break;
    }
    return trace;
}

double divergence_limit(const FeederModel& feeder) {
    const double rating = feeder.q_rating.size() ? feeder.q_rating.norm() : 0.0;
    return kDivergenceFactor * std::max(rating, 1e-12);
}

}  // namespace

StopRule StopRule::fixed(int steps, double report_tol) { return {Kind::fixed, steps, report_tol}; }

StopRule StopRule::tolerance(double tol, int max_steps) { return {Kind::tolerance, max_steps, tol}; }

RuleKind parse_rule_kind(std::string_view name) {
    if (name == "noninc") return RuleKind::nonincremental;
    if (name == "inc") return RuleKind::incremental;
    if (name == "acc") return RuleKind::accelerated;
    throw ValidationError("unknown rule kind '" + std::string(name) + "' (expected noninc, inc or acc)");
}

std::string_view to_string(RuleKind kind) {
    switch (kind) {
        case RuleKind::nonincremental: return "noninc";
        case RuleKind::incremental: return "inc";
        case RuleKind::accelerated: return "acc";
    }
    return "?";
}

SimulationTrace simulate_nonincremental(const RuleParams& z, const FeederModel& feeder, const Scenario& scenario,
                                        const StopRule& stop) {
    if (z.size() != feeder.n_nodes()) throw ValidationError("rule parameters do not match feeder size");
    return run_loop(feeder, scenario, stop, divergence_limit(feeder),
                    [&](int, const Vector&, const Vector& v) { return nonincremental_step(v, z); });
}

SimulationTrace simulate_incremental(const TransformedParams& zt, double mu, bool accelerated,
                                     const FeederModel& feeder, const Scenario& scenario, const StopRule& stop,
                                     const LayerObserver& observer) {
    if (zt.size() != feeder.n_nodes()) throw ValidationError("rule parameters do not match feeder size");
    if (!(mu > 0.0) || !std::isfinite(mu)) throw ValidationError("step size mu must be positive and finite");
    Vector y_prev = Vector::Zero(feeder.n_nodes());
    std::vector<ProxBranch> branches;
    return run_loop(feeder, scenario, stop, divergence_limit(feeder), [&](int t, const Vector& q, const Vector& v) {
        LayerOutput layer = incremental_layer(q, v, y_prev, t, zt, mu, accelerated, &branches);
        if (observer) observer(t, layer, branches);
        y_prev = std::move(layer.y);
        return std::move(layer.q_next);
    });
}

StabilityCheck check_stability_noninc(const RuleParams& z, const FeederModel& feeder) {
    if (z.size() != feeder.n_nodes()) throw ValidationError("rule parameters do not match feeder size");
    Vector alpha = Vector::Zero(feeder.n_nodes());
    for (int i = 0; i < z.size(); ++i) {
        if (z.q_max(i) > 0.0) alpha(i) = z.slope(i);
    }
    const double norm = spectral_norm(alpha.asDiagonal() * feeder.x);
    return {norm < 1.0, norm};
}

StabilityCheck check_stability_inc_single(double mu, const FeederModel& feeder) {
    if (!feeder.single_phase()) {
        throw ValidationError("check_stability_inc_single: multiphase feeder (use multiphase_step_bound)");
    }
    const auto ext = symmetric_eig_extremes(feeder.x);
    const double norm = std::max(std::abs(1.0 - mu * ext.min), std::abs(1.0 - mu * ext.max));
    return {mu > 0.0 && mu < 2.0 / ext.max, norm};
}

double multiphase_step_bound(const Matrix& x) {
    if (x.rows() != x.cols() || x.size() == 0) throw ValidationError("multiphase_step_bound: X must be square");
    const Matrix gram = x * x.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    if (eig.info() != Eigen::Success) throw NumericalError("multiphase_step_bound: eigensolver failed");
    const Vector& lambda = eig.eigenvalues();
    if (lambda.minCoeff() < 1e-12) throw NumericalError("multiphase_step_bound: X X^T is ill-conditioned");
    const Vector inv_sqrt = lambda.cwiseSqrt().cwiseInverse();
    const Matrix& u = eig.eigenvectors();
    Matrix m = inv_sqrt.asDiagonal() * (u.transpose() * (x + x.transpose()) * u) * inv_sqrt.asDiagonal();
    m = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig_m(m, Eigen::EigenvaluesOnly);
    return eig_m.eigenvalues()(0);
}

double multiphase_step_bound(const FeederModel& feeder) { return multiphase_step_bound(feeder.x); }

double default_step_size(const FeederModel& feeder, bool accelerated) {
    if (feeder.single_phase()) {
        const auto ext = symmetric_eig_extremes(feeder.x);
        return accelerated ? 1.0 / ext.max : 2.0 / (ext.max + ext.min);
    }
    const double bound = multiphase_step_bound(feeder);
    if (!(bound > 0.0)) throw NumericalError("no stabilizing step size exists for this multiphase feeder");
    return 0.9 * bound;
}

}  // namespace vvord
