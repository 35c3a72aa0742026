#include "vvord/emulator.hpp"

#include "vvord/equilibrium.hpp"
#include "vvord/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vvord {

ForwardResult forward(const TransformedParams& zt, const FeederModel& feeder, const Scenario& scenario,
                      const UnrolledConfig& config) {
    GradientTape tape;
    tape.params = zt;
    tape.scenario = scenario;
    tape.mu = config.mu;
    tape.accelerated = config.accelerated;
    const auto trace = simulate_incremental(
        zt, config.mu, config.accelerated, feeder, scenario, config.depth,
        [&](int, const LayerOutput& layer, const std::vector<ProxBranch>& branches) {
            tape.y.push_back(layer.y);
            tape.y_extrapolated.push_back(layer.y_extrapolated);
            tape.branches.push_back(branches);
        });
    tape.q = trace.q_history;
    tape.v = trace.v_history;
    tape.truncated = config.depth.kind == StopRule::Kind::tolerance && !trace.converged;
    ForwardResult out{tape.v.back(), std::move(tape)};
    return out;
}

Vector replay(const GradientTape& tape, const FeederModel& feeder) {
    const auto trace = simulate_incremental(tape.params, tape.mu, tape.accelerated, feeder, tape.scenario,
                                            StopRule::fixed(tape.layers()));
    return trace.v_history.back();
}

TransformedParams vector_jacobian_product(const GradientTape& tape, const FeederModel& feeder,
                                          const Vector& v_adjoint) {
    const int n = feeder.n_nodes();
    if (v_adjoint.size() != n) throw ValidationError("vector_jacobian_product: adjoint length mismatch");
    const TransformedParams& zt = tape.params;
    const double mu = tape.mu;
    const Matrix xt = feeder.x.transpose();

    auto grad = TransformedParams::zeros(n);
    Vector adj_q = xt * v_adjoint;      // adjoint of q^k, complete when layer k is processed
    Vector carry_y = Vector::Zero(n);   // momentum contribution to the adjoint of y^k
    for (int k = tape.layers(); k >= 1; --k) {
        const auto& branches = tape.branches[static_cast<std::size_t>(k - 1)];
        Vector adj_ye(n);
        for (int i = 0; i < n; ++i) {
            const ProxPartials d = prox_partials(branches[static_cast<std::size_t>(i)], mu);
            adj_ye(i) = d.dy * adj_q(i);
            grad.delta_t(i) += d.ddelta_t * adj_q(i);
            grad.q_max(i) += d.dq_max * adj_q(i);
        }
        Vector adj_y;
        if (tape.accelerated) {
            const double beta = extrapolation_weight(k);
            adj_y = (1.0 + beta) * adj_ye + carry_y;
            carry_y = -beta * adj_ye;
        } else {
            adj_y = adj_ye;
        }
        const Vector& q_prev = tape.q[static_cast<std::size_t>(k - 1)];
        const Vector& v_prev = tape.v[static_cast<std::size_t>(k - 1)];
        for (int i = 0; i < n; ++i) {
            grad.alpha_t(i) += adj_y(i) * (q_prev(i) - mu * (v_prev(i) - zt.v_ref(i)));
            grad.v_ref(i) += mu * zt.alpha_t(i) * adj_y(i);
        }
        const Vector adj_v_prev = -mu * zt.alpha_t.cwiseProduct(adj_y);
        adj_q = zt.alpha_t.cwiseProduct(adj_y) + xt * adj_v_prev;
    }

    const Vector mask = feeder.der_mask();
    grad.v_ref = grad.v_ref.cwiseProduct(mask);
    grad.delta_t = grad.delta_t.cwiseProduct(mask);
    grad.alpha_t = grad.alpha_t.cwiseProduct(mask);
    grad.q_max = grad.q_max.cwiseProduct(mask);
    return grad;
}

TransformedParams backward(const GradientTape& tape, const FeederModel& feeder) {
    const Vector adjoint = 2.0 * (tape.v_terminal().array() - 1.0).matrix();
    return vector_jacobian_product(tape, feeder, adjoint);
}

BatchLossGrad loss_and_grad_batch(const TransformedParams& zt, const FeederModel& feeder,
                                  std::span<const Scenario> batch, const UnrolledConfig& config) {
    if (batch.empty()) throw ValidationError("loss_and_grad_batch: empty batch");
    const std::size_t b = batch.size();
    std::vector<double> losses(b);
    std::vector<TransformedParams> grads(b);
    std::vector<int> layers(b);
    std::vector<char> truncated(b);
    parallel_for(b, [&](std::size_t s) {
        const ForwardResult fw = forward(zt, feeder, batch[s], config);
        losses[s] = squared_deviation(fw.v_terminal);
        grads[s] = backward(fw.tape, feeder);
        layers[s] = fw.tape.layers();
        truncated[s] = fw.tape.truncated ? 1 : 0;
    });

    BatchLossGrad out;
    const double scale = 1.0 / static_cast<double>(b);
    out.loss = pairwise_sum(losses) * scale;
    auto reduce = [&](auto member) {
        std::vector<Vector> parts;
        parts.reserve(b);
        for (const auto& g : grads) parts.push_back(g.*member);
        return Vector(pairwise_sum(parts) * scale);
    };
    out.grad.v_ref = reduce(&TransformedParams::v_ref);
    out.grad.delta_t = reduce(&TransformedParams::delta_t);
    out.grad.alpha_t = reduce(&TransformedParams::alpha_t);
    out.grad.q_max = reduce(&TransformedParams::q_max);
    for (std::size_t s = 0; s < b; ++s) {
        out.truncated += truncated[s];
        out.max_layers = std::max(out.max_layers, layers[s]);
    }
    return out;
}

double breakpoint_margin(const GradientTape& tape) {
    double margin = std::numeric_limits<double>::infinity();
    for (const Vector& ye : tape.y_extrapolated) {
        for (Eigen::Index i = 0; i < ye.size(); ++i) {
            if (tape.params.q_max(i) == 0.0) continue;
            const double threshold = tape.mu * tape.params.delta_t(i);
            const double knee = tape.params.q_max(i) + threshold;
            const double y = std::abs(ye(i));
            margin = std::min({margin, std::abs(y - threshold), std::abs(y - knee)});
        }
    }
    return margin;
}

int trainable_parameter_count(const FeederModel& feeder) { return 4 * static_cast<int>(feeder.der_nodes.size()); }

}  // namespace vvord
