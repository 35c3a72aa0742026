#include "vvord/analysis.hpp"

#include "vvord/dynamics.hpp"

#include <cmath>
#include <limits>

namespace vvord {

namespace {

// Real-valued bounds are rounded up; the slack keeps values such as
// 1.0000000000000002 (an exact integer up to rounding) from gaining a layer.
int ceil_with_slack(double value) {
    const double t = std::ceil(value - 1e-9);
    if (t > static_cast<double>(std::numeric_limits<int>::max())) {
        throw NumericalError("depth bound does not fit in an int");
    }
    return static_cast<int>(t);
}

void require_positive(double value, const char* what) {
    if (!(value > 0.0) || !std::isfinite(value)) throw ValidationError(std::string(what) + " must be positive");
}

}  // namespace

OptimalStep optimal_step_single(const FeederModel& feeder) {
    if (!feeder.single_phase()) throw ValidationError("optimal_step_single: multiphase feeder");
    const auto ext = symmetric_eig_extremes(feeder.x);
    if (ext.min <= 0.0) throw ValidationError("optimal_step_single: X is not positive definite");
    const double kappa = ext.max / ext.min;
    return {2.0 / (ext.max + ext.min), 1.0 - 2.0 / (kappa + 1.0)};
}

int depth_bound_single(double kappa, double x_norm, double q_norm, double eps1) {
    require_positive(x_norm, "depth_bound_single: ||X||");
    require_positive(q_norm, "depth_bound_single: ||q_hat||");
    require_positive(eps1, "depth_bound_single: eps1");
    if (!(kappa >= 1.0)) throw ValidationError("depth_bound_single: kappa must be >= 1");
    const double ratio = 2.0 * x_norm * q_norm / eps1;
    if (ratio <= 1.0) return 1;
    return std::max(1, ceil_with_slack(0.5 * (kappa - 1.0) * std::log(ratio)));
}

int depth_bound_contraction(double contraction, double x_norm, double q_norm, double eps1) {
    require_positive(x_norm, "depth_bound: ||X||");
    require_positive(q_norm, "depth_bound: ||q_hat||");
    require_positive(eps1, "depth_bound: eps1");
    if (!(contraction < 1.0)) throw ValidationError("depth_bound: ||I - mu X||_2 must be below 1");
    const double ratio = eps1 / (2.0 * x_norm * q_norm);
    if (ratio >= 1.0) return 1;
    if (contraction <= 0.0) return 1;
    return std::max(1, ceil_with_slack(std::log(ratio) / std::log(contraction)));
}

int depth_bound_multiphase(const FeederModel& feeder, double mu, double q_norm, double eps1) {
    const Matrix iteration = Matrix::Identity(feeder.n_nodes(), feeder.n_nodes()) - mu * feeder.x;
    return depth_bound_contraction(spectral_norm(iteration), spectral_norm(feeder.x), q_norm, eps1);
}

int pgd_iteration_estimate(double kappa, double eps) {
    if (!(eps > 0.0) || !(eps < 1.0)) throw ValidationError("iteration estimate: eps must lie in (0, 1)");
    if (!(kappa >= 1.0)) throw ValidationError("iteration estimate: kappa must be >= 1");
    return ceil_with_slack(-2.0 * std::log(eps) / std::log(2.0) * kappa);
}

int apgd_iteration_estimate(double kappa, double eps) {
    if (!(kappa >= 1.0)) throw ValidationError("iteration estimate: kappa must be >= 1");
    return pgd_iteration_estimate(std::sqrt(kappa), eps);
}

FeederAnalysis analyze_feeder(const FeederModel& feeder, double eps1, std::optional<double> mu) {
    FeederAnalysis a;
    a.single_phase = feeder.single_phase();
    a.eps1 = eps1;
    a.x_norm = spectral_norm(feeder.x);
    a.q_norm = feeder.q_rating.size() ? feeder.q_rating.norm() : 0.0;
    const Matrix identity = Matrix::Identity(feeder.n_nodes(), feeder.n_nodes());

    if (a.single_phase) {
        const auto ext = symmetric_eig_extremes(feeder.x);
        a.lambda_min = ext.min;
        a.lambda_max = ext.max;
        a.kappa = ext.max / ext.min;
        const auto step = optimal_step_single(feeder);
        a.mu0 = step.mu0;
        a.contraction = step.contraction;
        a.inc_stable_at_mu0 = check_stability_inc_single(step.mu0, feeder).stable;
        if (a.q_norm > 0.0) a.depth_single = depth_bound_single(*a.kappa, a.x_norm, a.q_norm, eps1);
        if (eps1 < 1.0) {
            a.pgd_iterations = pgd_iteration_estimate(*a.kappa, eps1);
            a.apgd_iterations = apgd_iteration_estimate(*a.kappa, eps1);
        }
    }

    try {
        a.mu_bound_multiphase = multiphase_step_bound(feeder);
    } catch (const NumericalError&) {
    }

    if (mu) {
        a.mu_multiphase = *mu;
    } else if (a.mu0) {
        a.mu_multiphase = *a.mu0;
    } else if (a.mu_bound_multiphase && *a.mu_bound_multiphase > 0.0) {
        a.mu_multiphase = 0.9 * *a.mu_bound_multiphase;
    }
    if (a.mu_multiphase) {
        a.contraction_multiphase = spectral_norm(identity - *a.mu_multiphase * feeder.x);
        a.inc_stable_at_mu_multiphase = *a.contraction_multiphase < 1.0;
        if (a.inc_stable_at_mu_multiphase && a.q_norm > 0.0) {
            a.depth_multiphase = depth_bound_contraction(*a.contraction_multiphase, a.x_norm, a.q_norm, eps1);
        }
    }
    return a;
}

}  // namespace vvord
