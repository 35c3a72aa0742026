#pragma once

#include "vvord/emulator.hpp"
#include "vvord/grid.hpp"
#include "vvord/rules.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace vvord {

enum class OptimizerKind { sgd, adam };

OptimizerKind parse_optimizer(std::string_view name);
std::string_view to_string(OptimizerKind kind);

struct AdamSettings {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 8;
    int epochs = 200;
    OptimizerKind optimizer = OptimizerKind::adam;
    AdamSettings adam;
    std::uint64_t seed = 0;
    double mu = 1.0;
    bool accelerated = true;
    StopRule depth = StopRule::tolerance(1e-6, 5'000);
    std::optional<TransformedParams> init;  // preset_initialization() when empty
    int snapshot_every = 0;                 // epochs between parameter snapshots, 0 = none
};

struct ParamSnapshot {
    int epoch = 0;
    TransformedParams params;
};

struct TrainHistory {
    std::vector<double> epoch_objective;  // entry 0 is the initial point
    std::vector<double> step_loss;
    std::vector<int> step_max_layers;
    std::vector<int> step_truncated;
    std::vector<ParamSnapshot> snapshots;
    int best_epoch = 0;
    int steps_per_epoch = 0;
    double wall_seconds = 0.0;
};

struct TrainResult {
    TransformedParams params;  // best iterate seen at an epoch boundary
    TrainHistory history;
};

/// Clips onto the feasible box: v_ref in [0.95, 1.05], delta_t >= 0,
/// alpha_t in [0, 1], q_max in [0, rating] (rating 0 off DER nodes).
TransformedParams project_box(const TransformedParams& zt, const FeederModel& feeder);
bool in_box(const TransformedParams& zt, const FeederModel& feeder);

/// Starting point (v_ref, deadband, slope) = (0.95, 0.01, 1.5) with
/// q_max = min(0.3, rating), mapped to transformed form with step mu.
TransformedParams preset_initialization(const FeederModel& feeder, double mu);

/// Packs the trainable entries (DER nodes only) as
/// [v_ref..., delta_t..., alpha_t..., q_max...].
Vector pack_trainable(const TransformedParams& zt, const FeederModel& feeder);
TransformedParams unpack_trainable(const Vector& packed, const TransformedParams& base, const FeederModel& feeder);

/// Plain projected stochastic gradient step: params -= lr * grad.
class SgdOptimizer {
public:
    explicit SgdOptimizer(double learning_rate) : lr_(learning_rate) {}
    void step(Vector& params, const Vector& grad) const { params -= lr_ * grad; }

private:
    double lr_;
};

class AdamOptimizer {
public:
    AdamOptimizer(double learning_rate, AdamSettings settings, Eigen::Index size);
    void step(Vector& params, const Vector& grad);

private:
    double lr_;
    AdamSettings s_;
    Vector m_, v_;
    long t_ = 0;
};

/// Projected stochastic training of the transformed rule parameters. Each
/// step descends (1/2) x the gradient of the batch-mean ||v^T - 1||^2, i.e.
/// (lr/2B) x the gradient of the batch sum, then projects onto the box.
TrainResult train(const FeederModel& feeder, std::span<const Scenario> scenarios, const TrainConfig& config);

/// Mean emulator loss over all scenarios (the per-epoch objective).
double emulator_objective(const TransformedParams& zt, const FeederModel& feeder, std::span<const Scenario> scenarios,
                          const UnrolledConfig& config);

struct ScenarioReport {
    double objective = 0.0;          // ||v* - 1||^2
    double baseline = 0.0;           // ||v_tilde - 1||^2
    double worst_deviation = 0.0;    // max_n |v*_n - 1|
    int equilibrium_iterations = 0;
};

struct RulesReport {
    double objective = 0.0;
    double baseline = 0.0;
    std::vector<ScenarioReport> scenarios;
    double mu = 0.0;
    double inc_contraction = 0.0;           // ||I - mu X||_2
    std::optional<double> noninc_margin;    // ||diag(alpha) X||_2 when all slopes are finite
    TransformedParams transformed;
    std::vector<std::optional<NodeRule>> physical;  // per node; empty where no physical form exists
};

RulesReport evaluate_rules(const TransformedParams& zt, double mu, const FeederModel& feeder,
                           std::span<const Scenario> scenarios);
RulesReport evaluate_rules(const RuleParams& z, double mu, const FeederModel& feeder,
                           std::span<const Scenario> scenarios);

}  // namespace vvord
