#pragma once

#include "vvord/grid.hpp"
#include "vvord/rules.hpp"

#include <functional>
#include <string_view>
#include <vector>

namespace vvord {

/// When to stop an unrolled recursion: after a fixed number of updates, or
/// once ||q^t - q^{t-1}||_2 <= tol (giving up after max_steps).
struct StopRule {
    enum class Kind { fixed, tolerance };
    Kind kind = Kind::tolerance;
    int max_steps = 10'000;
    double tol = 1e-8;

    static StopRule fixed(int steps, double report_tol = 1e-8);
    static StopRule tolerance(double tol = 1e-8, int max_steps = 10'000);
};

enum class RuleKind { nonincremental, incremental, accelerated };

RuleKind parse_rule_kind(std::string_view name);
std::string_view to_string(RuleKind kind);

/// Closed-loop trajectory starting from q^0 = 0. Entry t of each history is
/// the state after t updates.
struct SimulationTrace {
    std::vector<Vector> q_history;
    std::vector<Vector> v_history;
    bool converged = false;
    bool diverged = false;
    int iterations_used = 0;
    double final_residual = 0.0;
};

/// Observer for each incremental layer: (t, layer output, prox branches).
using LayerObserver = std::function<void(int, const LayerOutput&, const std::vector<ProxBranch>&)>;

SimulationTrace simulate_nonincremental(const RuleParams& z, const FeederModel& feeder, const Scenario& scenario,
                                        const StopRule& stop);

SimulationTrace simulate_incremental(const TransformedParams& zt, double mu, bool accelerated,
                                     const FeederModel& feeder, const Scenario& scenario, const StopRule& stop,
                                     const LayerObserver& observer = {});

struct StabilityCheck {
    bool stable = false;
    double norm = 0.0;
};

/// ||diag(alpha) X||_2 < 1, with alpha = 0 on nodes without control.
StabilityCheck check_stability_noninc(const RuleParams& z, const FeederModel& feeder);

/// ||I - mu X||_2 < 1 on a single-phase feeder (equivalently mu < 2/lambda_max).
StabilityCheck check_stability_inc_single(double mu, const FeederModel& feeder);

/// Largest step keeping ||I - mu X||_2 < 1 for a non-symmetric X: the
/// smallest eigenvalue of L^{-1/2} U^T (X + X^T) U L^{-1/2}, X X^T = U L U^T.
double multiphase_step_bound(const Matrix& x);
double multiphase_step_bound(const FeederModel& feeder);

/// mu_0 = 2/(lambda_max + lambda_min) on single-phase feeders (1/lambda_max for
/// the accelerated rule), 0.9 x multiphase_step_bound otherwise.
double default_step_size(const FeederModel& feeder, bool accelerated = false);

}  // namespace vvord
