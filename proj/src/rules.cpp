#include "vvord/rules.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace vvord {

namespace {

double relu(double x) { return x > 0.0 ? x : 0.0; }

double prox_value(ProxBranch b, double y, double threshold, double q_max) {
    switch (b) {
        case ProxBranch::saturated_pos: return q_max;
        case ProxBranch::linear_pos: return y - threshold;
        case ProxBranch::dead: return 0.0;
        case ProxBranch::linear_neg: return y + threshold;
        case ProxBranch::saturated_neg: return -q_max;
    }
    return 0.0;
}

void require_positive_step(double mu) {
    if (!(mu > 0.0) || !std::isfinite(mu)) throw ValidationError("step size mu must be positive and finite");
}

void require_same_size(Eigen::Index a, Eigen::Index b, const char* what) {
    if (a != b) throw ValidationError(std::string(what) + ": vector lengths differ");
}

}  // namespace

RuleParams RuleParams::uncontrolled(int n) {
    RuleParams z;
    z.v_ref = Vector::Ones(n);
    z.deadband = Vector::Zero(n);
    z.slope = Vector::Zero(n);
    z.q_max = Vector::Zero(n);
    z.sigma = Vector::Zero(n);
    return z;
}

NodeRule RuleParams::node(int i) const { return {v_ref(i), deadband(i), slope(i), q_max(i), sigma(i)}; }

void RuleParams::set_node(int i, const NodeRule& r) {
    v_ref(i) = r.v_ref;
    deadband(i) = r.deadband;
    slope(i) = r.slope;
    q_max(i) = r.q_max;
    sigma(i) = r.sigma;
}

TransformedParams TransformedParams::zeros(int n) {
    return {Vector::Zero(n), Vector::Zero(n), Vector::Zero(n), Vector::Zero(n)};
}

TransformedParams TransformedParams::uncontrolled(int n) {
    auto zt = zeros(n);
    zt.v_ref.setOnes();
    return zt;
}

NodeRuleT TransformedParams::node(int i) const { return {v_ref(i), delta_t(i), alpha_t(i), q_max(i)}; }

void TransformedParams::set_node(int i, const NodeRuleT& r) {
    v_ref(i) = r.v_ref;
    delta_t(i) = r.delta_t;
    alpha_t(i) = r.alpha_t;
    q_max(i) = r.q_max;
}

TransformedParams& TransformedParams::operator+=(const TransformedParams& o) {
    v_ref += o.v_ref;
    delta_t += o.delta_t;
    alpha_t += o.alpha_t;
    q_max += o.q_max;
    return *this;
}

TransformedParams& TransformedParams::operator*=(double s) {
    v_ref *= s;
    delta_t *= s;
    alpha_t *= s;
    q_max *= s;
    return *this;
}

double nonincremental_curve(double v, const NodeRule& rule) {
    if (rule.q_max == 0.0) return 0.0;
    if (!(rule.sigma > rule.deadband)) throw ValidationError("nonincremental_curve: sigma must exceed deadband");
    const double dev = v - rule.v_ref;
    const double mag = std::abs(dev);
    if (mag <= rule.deadband) return 0.0;
    const double sign = dev > 0.0 ? 1.0 : -1.0;
    if (mag <= rule.sigma) return -sign * rule.q_max * (mag - rule.deadband) / (rule.sigma - rule.deadband);
    return -sign * rule.q_max;
}

std::string_view to_string(ProxBranch b) {
    switch (b) {
        case ProxBranch::saturated_pos: return "sat+";
        case ProxBranch::linear_pos: return "linear+";
        case ProxBranch::dead: return "dead";
        case ProxBranch::linear_neg: return "linear-";
        case ProxBranch::saturated_neg: return "sat-";
    }
    return "?";
}

ProxBranch prox_branch(double y, double mu, double delta_t, double q_max) {
    const double threshold = mu * delta_t;
    const double knee = q_max + threshold;
    if (y > knee) return ProxBranch::saturated_pos;
    if (threshold < y) return ProxBranch::linear_pos;
    if (-threshold <= y) return ProxBranch::dead;
    if (-knee <= y) return ProxBranch::linear_neg;
    return ProxBranch::saturated_neg;
}

double prox_g(double y, double mu, double delta_t, double q_max) {
    return prox_value(prox_branch(y, mu, delta_t, q_max), y, mu * delta_t, q_max);
}

double prox_g_relu_form(double y, double mu, double delta_t, double q_max) {
    const double threshold = mu * delta_t;
    const double knee = q_max + threshold;
    return relu(y - threshold) - relu(y - knee) - relu(-y - threshold) + relu(-y - knee);
}

ProxPartials prox_partials(ProxBranch b, double mu) {
    switch (b) {
        case ProxBranch::saturated_pos: return {0.0, 0.0, 1.0};
        case ProxBranch::linear_pos: return {1.0, -mu, 0.0};
        case ProxBranch::dead: return {0.0, 0.0, 0.0};
        case ProxBranch::linear_neg: return {1.0, mu, 0.0};
        case ProxBranch::saturated_neg: return {0.0, 0.0, -1.0};
    }
    return {};
}

double extrapolation_weight(int t) {
    if (t < 1) throw ValidationError("accelerated rule: iteration index must be >= 1");
    return static_cast<double>(t - 1) / static_cast<double>(t + 2);
}

NodeRuleT to_transformed(const NodeRule& z, double mu) {
    require_positive_step(mu);
    if (z.q_max == 0.0) return {z.v_ref, 0.0, 0.0, 0.0};
    if (!(z.slope > 0.0)) throw ValidationError("to_transformed: slope must be positive on controlled nodes");
    // 1/(1 + mu/alpha) written as alpha/(alpha + mu): one rounding fewer.
    const double alpha_t = z.slope / (z.slope + mu);
    return {z.v_ref, z.deadband * alpha_t, alpha_t, z.q_max};
}

TransformedParams to_transformed(const RuleParams& z, double mu) {
    auto zt = TransformedParams::zeros(z.size());
    for (int i = 0; i < z.size(); ++i) zt.set_node(i, to_transformed(z.node(i), mu));
    return zt;
}

std::optional<NodeRule> try_from_transformed(const NodeRuleT& zt, double mu) {
    require_positive_step(mu);
    if (zt.q_max == 0.0) return NodeRule{zt.v_ref, 0.0, 0.0, 0.0, 0.0};
    if (!(zt.alpha_t > 0.0) || !(zt.alpha_t < 1.0)) return std::nullopt;
    NodeRule z;
    z.v_ref = zt.v_ref;
    z.slope = mu * zt.alpha_t / (1.0 - zt.alpha_t);
    z.deadband = zt.delta_t / zt.alpha_t;
    z.q_max = zt.q_max;
    z.sigma = z.deadband + z.q_max / z.slope;
    return z;
}

NodeRule from_transformed(const NodeRuleT& zt, double mu) {
    if (auto z = try_from_transformed(zt, mu)) return *z;
    if (zt.alpha_t >= 1.0) throw ValidationError("from_transformed: alpha_t >= 1 has no finite slope");
    throw ValidationError("from_transformed: alpha_t <= 0 has no deadband");
}

RuleParams from_transformed(const TransformedParams& zt, double mu) {
    auto z = RuleParams::uncontrolled(zt.size());
    for (int i = 0; i < zt.size(); ++i) z.set_node(i, from_transformed(zt.node(i), mu));
    return z;
}

Vector incremental_drive(const Vector& q, const Vector& v, const TransformedParams& zt, double mu) {
    require_same_size(q.size(), v.size(), "incremental_drive");
    require_same_size(q.size(), zt.size(), "incremental_drive");
    Vector y(q.size());
    for (Eigen::Index i = 0; i < q.size(); ++i) y(i) = zt.alpha_t(i) * (q(i) - mu * (v(i) - zt.v_ref(i)));
    return y;
}

LayerOutput incremental_layer(const Vector& q, const Vector& v, const Vector& y_prev, int t,
                              const TransformedParams& zt, double mu, bool accelerated,
                              std::vector<ProxBranch>* branches) {
    LayerOutput out;
    out.y = incremental_drive(q, v, zt, mu);
    if (accelerated) {
        require_same_size(y_prev.size(), q.size(), "incremental_layer");
        const double beta = extrapolation_weight(t);
        out.y_extrapolated = (1.0 + beta) * out.y - beta * y_prev;
    } else {
        out.y_extrapolated = out.y;
    }
    const auto n = q.size();
    out.q_next.resize(n);
    if (branches) branches->resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double ye = out.y_extrapolated(i);
        const ProxBranch b = prox_branch(ye, mu, zt.delta_t(i), zt.q_max(i));
        out.q_next(i) = prox_value(b, ye, mu * zt.delta_t(i), zt.q_max(i));
        if (branches) (*branches)[static_cast<std::size_t>(i)] = b;
    }
    return out;
}

Vector incremental_step(const Vector& q, const Vector& v, const TransformedParams& zt, double mu) {
    require_positive_step(mu);
    return incremental_layer(q, v, Vector(), 1, zt, mu, false).q_next;
}

AcceleratedStep accelerated_step(const Vector& y_t, const Vector& y_prev, int t, const TransformedParams& zt,
                                 double mu) {
    require_positive_step(mu);
    require_same_size(y_t.size(), y_prev.size(), "accelerated_step");
    require_same_size(y_t.size(), zt.size(), "accelerated_step");
    const double beta = extrapolation_weight(t);
    AcceleratedStep out;
    out.y_extrapolated = (1.0 + beta) * y_t - beta * y_prev;
    out.q_next.resize(y_t.size());
    for (Eigen::Index i = 0; i < y_t.size(); ++i) {
        out.q_next(i) = prox_g(out.y_extrapolated(i), mu, zt.delta_t(i), zt.q_max(i));
    }
    return out;
}

Vector nonincremental_step(const Vector& v, const RuleParams& z) {
    require_same_size(v.size(), z.size(), "nonincremental_step");
    Vector q(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) q(i) = nonincremental_curve(v(i), z.node(static_cast<int>(i)));
    return q;
}

}  // namespace vvord
