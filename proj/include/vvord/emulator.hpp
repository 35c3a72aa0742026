#pragma once

#include "vvord/dynamics.hpp"
#include "vvord/grid.hpp"
#include "vvord/rules.hpp"

#include <span>
#include <vector>

namespace vvord {

/// Unrolled incremental (or accelerated) rule used as a differentiable
/// emulator of the closed-loop equilibrium.
struct UnrolledConfig {
    double mu = 1.0;
    bool accelerated = true;
    StopRule depth = StopRule::tolerance(1e-6, 5'000);
};

/// Everything the reverse pass needs from one forward unroll. Layer k
/// (1-based) maps (q[k-1], v[k-1]) to q[k]; y, y_extrapolated and branches
/// are stored at index k-1.
struct GradientTape {
    TransformedParams params;
    Scenario scenario;
    double mu = 1.0;
    bool accelerated = true;
    std::vector<Vector> q;
    std::vector<Vector> v;
    std::vector<Vector> y;
    std::vector<Vector> y_extrapolated;
    std::vector<std::vector<ProxBranch>> branches;
    bool truncated = false;  // dynamic depth hit its step cap

    int layers() const { return static_cast<int>(branches.size()); }
    const Vector& v_terminal() const { return v.back(); }
};

struct ForwardResult {
    Vector v_terminal;
    GradientTape tape;
};

ForwardResult forward(const TransformedParams& zt, const FeederModel& feeder, const Scenario& scenario,
                      const UnrolledConfig& config);

/// Re-runs the recorded unroll with the recorded depth; returns v^T.
Vector replay(const GradientTape& tape, const FeederModel& feeder);

/// Reverse pass for an arbitrary adjoint w of v^T: returns w' dv^T/dz_tilde.
/// Entries of nodes without a DER are zero.
TransformedParams vector_jacobian_product(const GradientTape& tape, const FeederModel& feeder,
                                          const Vector& v_adjoint);

/// Gradient of ||v^T - 1||^2 with respect to the transformed parameters.
TransformedParams backward(const GradientTape& tape, const FeederModel& feeder);

struct BatchLossGrad {
    double loss = 0.0;           // mean of ||v^T - 1||^2 over the batch
    TransformedParams grad;      // gradient of that mean
    int truncated = 0;           // scenarios whose dynamic depth hit the cap
    int max_layers = 0;
};

BatchLossGrad loss_and_grad_batch(const TransformedParams& zt, const FeederModel& feeder,
                                  std::span<const Scenario> batch, const UnrolledConfig& config);

/// Smallest distance between any extrapolated prox input on the tape and the
/// nearest prox breakpoint. Large margins mean the unroll is locally linear.
double breakpoint_margin(const GradientTape& tape);

/// 4 parameters per DER node, independent of the unroll depth.
int trainable_parameter_count(const FeederModel& feeder);

}  // namespace vvord
