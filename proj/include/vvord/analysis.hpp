#pragma once

#include "vvord/grid.hpp"

#include <optional>

namespace vvord {

struct OptimalStep {
    double mu0 = 0.0;
    double contraction = 0.0;  // 1 - 2/(kappa + 1) = ||I - mu0 X||_2
};

/// mu0 = 2/(lambda_max + lambda_min) for a single-phase (symmetric PD) X.
OptimalStep optimal_step_single(const FeederModel& feeder);

/// Smallest integer T >= ((kappa - 1)/2) log(2 ||X|| ||q_hat|| / eps1), at least 1.
int depth_bound_single(double kappa, double x_norm, double q_norm, double eps1);

/// Smallest integer T >= log(eps1 / (2 ||X|| ||q_hat||)) / log(contraction), at least 1.
int depth_bound_contraction(double contraction, double x_norm, double q_norm, double eps1);

/// depth_bound_contraction with contraction = ||I - mu X||_2.
int depth_bound_multiphase(const FeederModel& feeder, double mu, double q_norm, double eps1);

/// Iterations for an eps-optimal cost: -(2 log eps / log 2) kappa for plain
/// proximal gradient, with sqrt(kappa) for the accelerated variant.
int pgd_iteration_estimate(double kappa, double eps);
int apgd_iteration_estimate(double kappa, double eps);

/// Everything the `analyze` subcommand reports. Single-phase-only fields are
/// empty on multiphase feeders; multiphase fields are empty when X X^T is
/// singular or no stabilizing step exists.
struct FeederAnalysis {
    bool single_phase = true;
    double x_norm = 0.0;
    double q_norm = 0.0;
    double eps1 = 0.0;
    std::optional<double> kappa;
    std::optional<double> lambda_min, lambda_max;
    std::optional<double> mu0;
    std::optional<double> contraction;
    std::optional<int> depth_single;
    std::optional<double> mu_bound_multiphase;
    std::optional<double> mu_multiphase;        // step used for depth_multiphase
    std::optional<double> contraction_multiphase;
    std::optional<int> depth_multiphase;
    std::optional<int> pgd_iterations;
    std::optional<int> apgd_iterations;
    bool inc_stable_at_mu0 = false;
    bool inc_stable_at_mu_multiphase = false;
};

/// mu overrides the step used for the multiphase depth bound (default: mu0 on
/// single-phase feeders, 0.9 x the multiphase bound otherwise).
FeederAnalysis analyze_feeder(const FeederModel& feeder, double eps1, std::optional<double> mu = std::nullopt);

}  // namespace vvord
