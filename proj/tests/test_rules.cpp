#include <doctest.h>

#include "support.hpp"
#include "vvord/rules.hpp"

#include <cmath>
#include <limits>

using namespace vvord;
using doctest::Approx;

TEST_CASE("nonincremental curve") {
    const NodeRule rule{1.0, 0.01, 10.0, 0.2, 0.03};
    CHECK(nonincremental_curve(1.0, rule) == 0.0);
    CHECK(nonincremental_curve(1.005, rule) == 0.0);
    CHECK(nonincremental_curve(1.02, rule) == Approx(-0.1).epsilon(1e-12));
    CHECK(nonincremental_curve(0.98, rule) == Approx(0.1).epsilon(1e-12));
    CHECK(nonincremental_curve(1.10, rule) == Approx(-0.2));
    CHECK(nonincremental_curve(0.90, rule) == Approx(0.2));
    // Continuity at both corners.
    CHECK(nonincremental_curve(1.03, rule) == Approx(-0.2).epsilon(1e-12));
    CHECK(std::abs(nonincremental_curve(1.01 + 1e-12, rule)) < 1e-10);
    NodeRule bad = rule;
    bad.sigma = 0.01;
    CHECK_THROWS_AS(nonincremental_curve(1.02, bad), ValidationError);
}

TEST_CASE("prox_g examples") {
    CHECK(prox_g(0.05, 1.0, 0.1, 0.5) == 0.0);
    CHECK(prox_g(0.3, 1.0, 0.1, 0.5) == Approx(0.2).epsilon(1e-15));
    CHECK(prox_g(0.7, 1.0, 0.1, 0.5) == 0.5);
    CHECK(prox_g(-0.3, 1.0, 0.1, 0.5) == Approx(-0.2).epsilon(1e-15));
    CHECK(prox_branch(0.05, 1.0, 0.1, 0.5) == ProxBranch::dead);
    CHECK(prox_branch(0.3, 1.0, 0.1, 0.5) == ProxBranch::linear_pos);
    CHECK(prox_branch(0.7, 1.0, 0.1, 0.5) == ProxBranch::saturated_pos);
    CHECK(prox_branch(-0.3, 1.0, 0.1, 0.5) == ProxBranch::linear_neg);
    CHECK(prox_branch(-0.7, 1.0, 0.1, 0.5) == ProxBranch::saturated_neg);
    CHECK(to_string(ProxBranch::saturated_pos) == "sat+");
    CHECK(to_string(ProxBranch::dead) == "dead");
}

TEST_CASE("prox_g ReLU form") {
    CHECK(prox_g_relu_form(0.0, 1.0, 0.1, 0.5) == 0.0);
    CHECK(prox_g_relu_form(0.6, 1.0, 0.1, 0.5) == Approx(0.5).epsilon(1e-15));
    CHECK(prox_g(0.6, 1.0, 0.1, 0.5) == 0.5);
    Rng rng(3, 0);
    for (int draw = 0; draw < 3; ++draw) {
        const double mu = rng.uniform(0.1, 2.0), dt = rng.uniform(0.0, 0.3), qm = rng.uniform(0.05, 1.0);
        double worst = 0.0;
        for (int k = 0; k <= 10'000; ++k) {
            const double y = -2.0 + 4.0 * k / 10'000;
            worst = std::max(worst, std::abs(prox_g(y, mu, dt, qm) - prox_g_relu_form(y, mu, dt, qm)));
        }
        CHECK(worst <= 1e-15);
    }
}

TEST_CASE("prox_g properties") {
    Rng rng(99, 0);
    for (int trial = 0; trial < 5'000; ++trial) {
        const double mu = rng.uniform(0.05, 3.0), dt = rng.uniform(0.0, 0.2), qm = rng.uniform(0.01, 1.0);
        const double a = rng.uniform(-2.0, 2.0), b = rng.uniform(-2.0, 2.0);
        const double ga = prox_g(a, mu, dt, qm), gb = prox_g(b, mu, dt, qm);
        CHECK(std::abs(ga - gb) <= std::abs(a - b) + 1e-15);
        CHECK(prox_g(-a, mu, dt, qm) == -ga);
        CHECK(std::abs(ga) <= qm);
        if (a <= b) {
            CHECK(ga <= gb);
        } else {
            CHECK(ga >= gb);
        }
        CHECK(std::abs(prox_g_relu_form(a, mu, dt, qm) - ga) <= 1e-15);
    }
}

TEST_CASE("prox_g minimizes the per-node subproblem") {
    Rng rng(7, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const double mu = rng.uniform(0.1, 2.0);
        const double alpha_t = rng.uniform(0.05, 0.95);
        const double dt = rng.uniform(0.0, 0.1);
        const double qm = rng.uniform(0.05, 1.0);
        const double y = rng.uniform(-1.5, 1.5);
        const double alpha = mu * alpha_t / (1 - alpha_t);
        const double delta = dt / alpha_t;
        const double w = y / alpha_t;
        const double brute = testing::brute_force_scalar_min(alpha, delta, mu, w, qm);
        CHECK(std::abs(prox_g(y, mu, dt, qm) - brute) <= 1e-6);
    }
}

TEST_CASE("prox partial derivatives match finite differences") {
    Rng rng(8, 0);
    const double h = 1e-7;
    for (int trial = 0; trial < 200; ++trial) {
        const double mu = rng.uniform(0.2, 2.0), dt = rng.uniform(0.0, 0.1), qm = rng.uniform(0.1, 1.0);
        const double y = rng.uniform(-1.5, 1.5);
        const ProxBranch b = prox_branch(y, mu, dt, qm);
        // Stay away from breakpoints.
        const double a = mu * dt, c = qm + mu * dt;
        if (std::min({std::abs(std::abs(y) - a), std::abs(std::abs(y) - c)}) < 1e-4) continue;
        const ProxPartials p = prox_partials(b, mu);
        CHECK(p.dy == Approx((prox_g(y + h, mu, dt, qm) - prox_g(y - h, mu, dt, qm)) / (2 * h)).epsilon(1e-6));
        CHECK(p.ddelta_t ==
              Approx((prox_g(y, mu, dt + h, qm) - prox_g(y, mu, dt - h, qm)) / (2 * h)).epsilon(1e-6));
        CHECK(p.dq_max == Approx((prox_g(y, mu, dt, qm + h) - prox_g(y, mu, dt, qm - h)) / (2 * h)).epsilon(1e-6));
    }
}

TEST_CASE("parameter transform") {
    const NodeRuleT t = to_transformed(NodeRule{1.0, 0.04, 1.0, 0.3, 0.34}, 1.0);
    CHECK(t.alpha_t == Approx(0.5));
    CHECK(t.delta_t == Approx(0.02));
    CHECK(t.v_ref == 1.0);
    CHECK(t.q_max == 0.3);
    const NodeRuleT steep = to_transformed(NodeRule{1.0, 0.04, 1e12, 0.3, 0.04}, 1.0);
    CHECK(steep.alpha_t == Approx(1.0).epsilon(1e-11));
    CHECK(steep.delta_t == Approx(0.04).epsilon(1e-11));
    CHECK_THROWS_AS(to_transformed(NodeRule{1.0, 0.04, 0.0, 0.3, 0.04}, 1.0), ValidationError);

    const NodeRule z = from_transformed(NodeRuleT{1.0, 0.02, 0.5, 0.3}, 1.0);
    CHECK(z.slope == Approx(1.0));
    CHECK(z.deadband == Approx(0.04));
    CHECK(z.sigma == Approx(0.04 + 0.3));
    const NodeRule tiny = from_transformed(NodeRuleT{1.0, 0.0, 1e-9, 0.3}, 1.0);
    CHECK(tiny.slope < 1e-8);
    CHECK(tiny.slope > 0.0);
    CHECK_THROWS_AS(from_transformed(NodeRuleT{1.0, 0.0, 1.0, 0.3}, 1.0), ValidationError);
    CHECK_FALSE(try_from_transformed(NodeRuleT{1.0, 0.0, 1.0, 0.3}, 1.0).has_value());
    CHECK_FALSE(try_from_transformed(NodeRuleT{1.0, 0.0, 0.0, 0.3}, 1.0).has_value());
}

TEST_CASE("parameter transform round trip") {
    Rng rng(12, 0);
    for (int trial = 0; trial < 2'000; ++trial) {
        const double mu = rng.uniform(0.1, 3.0);
        const NodeRule z{rng.uniform(0.95, 1.05), rng.uniform(0.0, 0.05), rng.uniform(0.05, 20.0),
                         rng.uniform(0.01, 1.0), 0.0};
        const NodeRule back = from_transformed(to_transformed(z, mu), mu);
        CHECK(std::abs(back.v_ref - z.v_ref) <= 1e-14);
        CHECK(std::abs(back.deadband - z.deadband) <= 1e-14);
        // alpha = mu at/(1 - at) amplifies the rounding of at by (alpha + mu)/mu.
        const double cond = (z.slope + mu) / mu;
        CHECK(std::abs(back.slope - z.slope) <= 1e-15 * cond * z.slope);
        CHECK(back.q_max == z.q_max);

        const NodeRuleT zt{rng.uniform(0.95, 1.05), rng.uniform(0.0, 0.05), rng.uniform(0.01, 0.99),
                           rng.uniform(0.01, 1.0)};
        const NodeRuleT again = to_transformed(from_transformed(zt, mu), mu);
        CHECK(std::abs(again.alpha_t - zt.alpha_t) <= 1e-14);
        CHECK(std::abs(again.delta_t - zt.delta_t) <= 1e-14);
    }
}

TEST_CASE("incremental step") {
    TransformedParams zt = TransformedParams::uncontrolled(1);
    zt.set_node(0, {1.0, 0.0, 0.5, 1.0});
    const Vector zero = Vector::Zero(1);
    CHECK(incremental_step(zero, Vector::Ones(1), zt, 1.0)(0) == 0.0);
    CHECK(incremental_step(zero, Vector::Constant(1, 1.2), zt, 1.0)(0) == Approx(-0.1).epsilon(1e-14));
    zt.q_max(0) = 0.3;
    CHECK(incremental_step(zero, Vector::Constant(1, 11.0), zt, 1.0)(0) == -0.3);
    // Uncontrolled nodes stay at zero.
    const TransformedParams off = TransformedParams::uncontrolled(3);
    CHECK(incremental_step(Vector::Zero(3), Vector::Constant(3, 1.3), off, 1.0).isZero());
    CHECK_THROWS_AS(incremental_step(Vector::Zero(2), Vector::Ones(1), zt, 1.0), ValidationError);
}

TEST_CASE("accelerated step") {
    CHECK(extrapolation_weight(1) == 0.0);
    CHECK(extrapolation_weight(4) == 0.5);
    CHECK_THROWS_AS(extrapolation_weight(0), ValidationError);
    TransformedParams zt = TransformedParams::uncontrolled(1);
    zt.set_node(0, {1.0, 0.0, 0.5, 1.0});
    const Vector y = Vector::Constant(1, 0.2), y_prev = Vector::Constant(1, 0.1);
    CHECK(accelerated_step(y, y_prev, 1, zt, 1.0).y_extrapolated(0) == 0.2);
    const AcceleratedStep s = accelerated_step(y, y_prev, 4, zt, 1.0);
    CHECK(s.y_extrapolated(0) == Approx(0.25).epsilon(1e-15));
    CHECK(s.q_next(0) == Approx(0.25).epsilon(1e-15));
    for (int t = 1; t < 50; ++t) CHECK(accelerated_step(y, y, t, zt, 1.0).y_extrapolated(0) == Approx(0.2));
    CHECK_THROWS_AS(accelerated_step(y, y_prev, 0, zt, 1.0), ValidationError);
}

TEST_CASE("nonincremental step applies the curve per node") {
    RuleParams z = RuleParams::uncontrolled(2);
    z.set_node(1, {1.0, 0.01, 10.0, 0.2, 0.03});
    const Vector q = nonincremental_step(Vector::Constant(2, 1.02), z);
    CHECK(q(0) == 0.0);
    CHECK(q(1) == Approx(-0.1));
}
