#include "vvord/trainer.hpp"

#include "vvord/equilibrium.hpp"
#include "vvord/parallel.hpp"
#include "vvord/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

namespace vvord {

namespace {

constexpr double kVoltageRefMin = 0.95;
constexpr double kVoltageRefMax = 1.05;

void check_config(const TrainConfig& c) {
    if (!(c.learning_rate >= 0.0) || !std::isfinite(c.learning_rate)) {
        throw ValidationError("train: learning rate must be nonnegative");
    }
    if (c.batch_size < 1) throw ValidationError("train: batch size must be >= 1");
    if (c.epochs < 1) throw ValidationError("train: epochs must be >= 1");
    if (!(c.mu > 0.0)) throw ValidationError("train: mu must be positive");
    if (c.snapshot_every < 0) throw ValidationError("train: snapshot cadence must be >= 0");
}

}  // namespace

OptimizerKind parse_optimizer(std::string_view name) {
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "adam") return OptimizerKind::adam;
    throw ValidationError("unknown optimizer '" + std::string(name) + "' (expected sgd or adam)");
}

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adam"; }

TransformedParams project_box(const TransformedParams& zt, const FeederModel& feeder) {
    const int n = feeder.n_nodes();
    if (zt.size() != n) throw ValidationError("project_box: parameter size mismatch");
    const Vector ratings = feeder.node_ratings();
    TransformedParams out = zt;
    for (int i = 0; i < n; ++i) {
        out.v_ref(i) = std::clamp(zt.v_ref(i), kVoltageRefMin, kVoltageRefMax);
        out.delta_t(i) = std::max(zt.delta_t(i), 0.0);
        out.alpha_t(i) = std::clamp(zt.alpha_t(i), 0.0, 1.0);
        out.q_max(i) = std::clamp(zt.q_max(i), 0.0, ratings(i));
    }
    return out;
}

bool in_box(const TransformedParams& zt, const FeederModel& feeder) {
    const Vector ratings = feeder.node_ratings();
    for (int i = 0; i < zt.size(); ++i) {
        if (!(zt.v_ref(i) >= kVoltageRefMin && zt.v_ref(i) <= kVoltageRefMax)) return false;
        if (!(zt.delta_t(i) >= 0.0)) return false;
        if (!(zt.alpha_t(i) >= 0.0 && zt.alpha_t(i) <= 1.0)) return false;
        if (!(zt.q_max(i) >= 0.0 && zt.q_max(i) <= ratings(i))) return false;
    }
    return true;
}

TransformedParams preset_initialization(const FeederModel& feeder, double mu) {
    const int n = feeder.n_nodes();
    auto z = RuleParams::uncontrolled(n);
    const Vector ratings = feeder.node_ratings();
    for (int node : feeder.der_nodes) {
        NodeRule r;
        r.v_ref = 0.95;
        r.deadband = 0.01;
        r.slope = 1.5;
        r.q_max = std::min(0.3, ratings(node));
        r.sigma = r.deadband + r.q_max / r.slope;
        z.set_node(node, r);
    }
    return project_box(to_transformed(z, mu), feeder);
}

Vector pack_trainable(const TransformedParams& zt, const FeederModel& feeder) {
    const auto m = static_cast<Eigen::Index>(feeder.der_nodes.size());
    Vector packed(4 * m);
    for (Eigen::Index k = 0; k < m; ++k) {
        const int node = feeder.der_nodes[static_cast<std::size_t>(k)];
        packed(k) = zt.v_ref(node);
        packed(m + k) = zt.delta_t(node);
        packed(2 * m + k) = zt.alpha_t(node);
        packed(3 * m + k) = zt.q_max(node);
    }
    return packed;
}

TransformedParams unpack_trainable(const Vector& packed, const TransformedParams& base, const FeederModel& feeder) {
    const auto m = static_cast<Eigen::Index>(feeder.der_nodes.size());
    if (packed.size() != 4 * m) throw ValidationError("unpack_trainable: size mismatch");
    TransformedParams out = base;
    for (Eigen::Index k = 0; k < m; ++k) {
        const int node = feeder.der_nodes[static_cast<std::size_t>(k)];
        out.v_ref(node) = packed(k);
        out.delta_t(node) = packed(m + k);
        out.alpha_t(node) = packed(2 * m + k);
        out.q_max(node) = packed(3 * m + k);
    }
    return out;
}

AdamOptimizer::AdamOptimizer(double learning_rate, AdamSettings settings, Eigen::Index size)
    : lr_(learning_rate), s_(settings), m_(Vector::Zero(size)), v_(Vector::Zero(size)) {}

void AdamOptimizer::step(Vector& params, const Vector& grad) {
    ++t_;
    m_ = s_.beta1 * m_ + (1.0 - s_.beta1) * grad;
    v_ = s_.beta2 * v_ + (1.0 - s_.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(s_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(s_.beta2, static_cast<double>(t_));
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        const double m_hat = m_(i) / c1;
        const double v_hat = v_(i) / c2;
        params(i) -= lr_ * m_hat / (std::sqrt(v_hat) + s_.eps);
    }
}

double emulator_objective(const TransformedParams& zt, const FeederModel& feeder, std::span<const Scenario> scenarios,
                          const UnrolledConfig& config) {
    if (scenarios.empty()) throw ValidationError("emulator_objective: no scenarios");
    std::vector<double> terms(scenarios.size());
    parallel_for(scenarios.size(), [&](std::size_t s) {
        terms[s] = squared_deviation(forward(zt, feeder, scenarios[s], config).v_terminal);
    });
    return pairwise_sum(terms) / static_cast<double>(terms.size());
}

TrainResult train(const FeederModel& feeder, std::span<const Scenario> scenarios, const TrainConfig& config) {
    check_config(config);
    if (scenarios.empty()) throw ValidationError("train: no scenarios");
    const auto start = std::chrono::steady_clock::now();
    const UnrolledConfig unroll{config.mu, config.accelerated, config.depth};

    TransformedParams current =
        project_box(config.init ? *config.init : preset_initialization(feeder, config.mu), feeder);
    Vector packed = pack_trainable(current, feeder);

    SgdOptimizer sgd(config.learning_rate);
    AdamOptimizer adam(config.learning_rate, config.adam, packed.size());

    const std::size_t count = scenarios.size();
    const std::size_t batch = static_cast<std::size_t>(config.batch_size);
    const std::size_t steps_per_epoch = (count + batch - 1) / batch;

    TrainResult result;
    TrainHistory& h = result.history;
    h.steps_per_epoch = static_cast<int>(steps_per_epoch);
    double best = emulator_objective(current, feeder, scenarios, unroll);
    h.epoch_objective.push_back(best);
    result.params = current;
    if (config.snapshot_every > 0) h.snapshots.push_back({0, current});

    std::vector<std::size_t> order(count);
    std::vector<Scenario> members;
    long step_index = 0;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng(config.seed, static_cast<std::uint64_t>(epoch)).shuffle(order);
        for (std::size_t b = 0; b < steps_per_epoch; ++b, ++step_index) {
            members.clear();
            for (std::size_t k = b * batch; k < std::min(count, (b + 1) * batch); ++k) {
                members.push_back(scenarios[order[k]]);
            }
            BatchLossGrad lg;
            try {
                lg = loss_and_grad_batch(current, feeder, members, unroll);
            } catch (const ValidationError& e) {
                throw ValidationError("training step " + std::to_string(step_index) + ": " + e.what());
            } catch (const std::exception& e) {
                throw NumericalError("training step " + std::to_string(step_index) + ": " + e.what());
            }
            const Vector grad = 0.5 * pack_trainable(lg.grad, feeder);
            if (config.optimizer == OptimizerKind::sgd) {
                sgd.step(packed, grad);
            } else {
                adam.step(packed, grad);
            }
            current = project_box(unpack_trainable(packed, current, feeder), feeder);
            packed = pack_trainable(current, feeder);
            h.step_loss.push_back(lg.loss);
            h.step_max_layers.push_back(lg.max_layers);
            h.step_truncated.push_back(lg.truncated);
        }
        const double objective = emulator_objective(current, feeder, scenarios, unroll);
        h.epoch_objective.push_back(objective);
        if (objective < best) {
            best = objective;
            result.params = current;
            h.best_epoch = epoch;
        }
        if (config.snapshot_every > 0 && epoch % config.snapshot_every == 0) h.snapshots.push_back({epoch, current});
    }
    h.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

RulesReport evaluate_rules(const TransformedParams& zt, double mu, const FeederModel& feeder,
                           std::span<const Scenario> scenarios) {
    if (scenarios.empty()) throw ValidationError("evaluate_rules: no scenarios");
    if (zt.size() != feeder.n_nodes()) throw ValidationError("evaluate_rules: parameter size mismatch");
    RulesReport report;
    report.mu = mu;
    report.transformed = zt;
    const auto equilibria = find_equilibria(zt, mu, feeder, scenarios);
    std::vector<double> objective(scenarios.size()), baseline(scenarios.size());
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        ScenarioReport r;
        r.objective = squared_deviation(equilibria[s].v_star);
        r.baseline = squared_deviation(scenarios[s].v_tilde);
        r.worst_deviation = (equilibria[s].v_star.array() - 1.0).abs().maxCoeff();
        r.equilibrium_iterations = equilibria[s].iterations;
        objective[s] = r.objective;
        baseline[s] = r.baseline;
        report.scenarios.push_back(r);
    }
    report.objective = pairwise_sum(objective) / static_cast<double>(objective.size());
    report.baseline = pairwise_sum(baseline) / static_cast<double>(baseline.size());
    const int n = feeder.n_nodes();
    report.inc_contraction = spectral_norm(Matrix::Identity(n, n) - mu * feeder.x);

    bool all_physical = true;
    auto z = RuleParams::uncontrolled(n);
    for (int i = 0; i < n; ++i) {
        auto node = try_from_transformed(zt.node(i), mu);
        if (node) {
            z.set_node(i, *node);
        } else {
            all_physical = false;
        }
        report.physical.push_back(node);
    }
    if (all_physical) report.noninc_margin = check_stability_noninc(z, feeder).norm;
    return report;
}

RulesReport evaluate_rules(const RuleParams& z, double mu, const FeederModel& feeder,
                           std::span<const Scenario> scenarios) {
    return evaluate_rules(to_transformed(z, mu), mu, feeder, scenarios);
}

}  // namespace vvord
