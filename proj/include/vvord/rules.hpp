#pragma once

#include "vvord/common.hpp"

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace vvord {

/// Rule parameters z of one node in their physical form.
struct NodeRule {
    double v_ref = 1.0;
    double deadband = 0.0;
    double slope = 0.0;
    double q_max = 0.0;
    double sigma = 0.0;  // saturation voltage offset; non-incremental curve only
};

/// Rule parameters of one node in the form consumed by the incremental rules.
struct NodeRuleT {
    double v_ref = 1.0;
    double delta_t = 0.0;
    double alpha_t = 0.0;
    double q_max = 0.0;
};

/// Per-node rule parameters z over all feeder nodes. Nodes without a DER
/// carry q_max = 0 and never inject.
struct RuleParams {
    Vector v_ref, deadband, slope, q_max, sigma;

    static RuleParams uncontrolled(int n);
    int size() const { return static_cast<int>(v_ref.size()); }
    NodeRule node(int i) const;
    void set_node(int i, const NodeRule& rule);
};

/// Per-node transformed parameters. The same layout doubles as the container
/// for gradients with respect to these parameters.
struct TransformedParams {
    Vector v_ref, delta_t, alpha_t, q_max;

    static TransformedParams zeros(int n);
    static TransformedParams uncontrolled(int n);
    int size() const { return static_cast<int>(v_ref.size()); }
    NodeRuleT node(int i) const;
    void set_node(int i, const NodeRuleT& rule);

    TransformedParams& operator+=(const TransformedParams& o);
    TransformedParams& operator*=(double s);
};

/// IEEE 1547 style piecewise-linear curve: zero in the deadband, slope
/// -q_max/(sigma - deadband) beyond it, saturated past sigma.
double nonincremental_curve(double v, const NodeRule& rule);

/// Segment of the proximal operator selected for an input, tested in the
/// order saturated+, linear+, dead, linear-, saturated-.
enum class ProxBranch : std::uint8_t { saturated_pos, linear_pos, dead, linear_neg, saturated_neg };

std::string_view to_string(ProxBranch b);

ProxBranch prox_branch(double y, double mu, double delta_t, double q_max);

/// Soft-threshold by mu*delta_t followed by a clip to [-q_max, q_max].
double prox_g(double y, double mu, double delta_t, double q_max);

/// The same map written as four shifted rectified linear units.
double prox_g_relu_form(double y, double mu, double delta_t, double q_max);

/// Local partial derivatives of prox_g on one branch.
struct ProxPartials {
    double dy = 0.0;
    double ddelta_t = 0.0;
    double dq_max = 0.0;
};
ProxPartials prox_partials(ProxBranch b, double mu);

/// Momentum weight (t - 1)/(t + 2) of the accelerated rule, t >= 1.
double extrapolation_weight(int t);

/// alpha_t = 1/(1 + mu/alpha), delta_t = deadband/(1 + mu/alpha). Nodes with
/// q_max = 0 map to all-zero controls.
NodeRuleT to_transformed(const NodeRule& z, double mu);
TransformedParams to_transformed(const RuleParams& z, double mu);

/// Inverse map: alpha = mu*alpha_t/(1 - alpha_t), deadband = delta_t/alpha_t,
/// sigma = deadband + q_max/alpha. Needs 0 < alpha_t < 1 on controlled nodes.
NodeRule from_transformed(const NodeRuleT& zt, double mu);
RuleParams from_transformed(const TransformedParams& zt, double mu);

/// Like from_transformed but returns nullopt where the physical form does not
/// exist (alpha_t = 1 means infinite slope, alpha_t = 0 a frozen DER).
std::optional<NodeRule> try_from_transformed(const NodeRuleT& zt, double mu);

/// y = alpha_t * (q - mu (v - v_ref)), elementwise.
Vector incremental_drive(const Vector& q, const Vector& v, const TransformedParams& zt, double mu);

/// q_next = g(incremental_drive(q, v)).
Vector incremental_step(const Vector& q, const Vector& v, const TransformedParams& zt, double mu);

struct AcceleratedStep {
    Vector q_next;
    Vector y_extrapolated;
};

/// y~ = (1 + beta_t) y_t - beta_t y_prev, q_next = g(y~).
AcceleratedStep accelerated_step(const Vector& y_t, const Vector& y_prev, int t, const TransformedParams& zt,
                                 double mu);

/// Output of one layer of the (accelerated) incremental recursion.
struct LayerOutput {
    Vector y;
    Vector y_extrapolated;
    Vector q_next;
};

/// One update t >= 1 of the incremental recursion; the plain rule ignores
/// y_prev. When branches is given it receives the prox branch of every node.
LayerOutput incremental_layer(const Vector& q, const Vector& v, const Vector& y_prev, int t,
                              const TransformedParams& zt, double mu, bool accelerated,
                              std::vector<ProxBranch>* branches = nullptr);

/// q = curve(v) on every node.
Vector nonincremental_step(const Vector& v, const RuleParams& z);

}  // namespace vvord
