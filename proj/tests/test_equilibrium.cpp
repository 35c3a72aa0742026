#include <doctest.h>

#include "support.hpp"
#include "vvord/dynamics.hpp"
#include "vvord/equilibrium.hpp"

using namespace vvord;
using doctest::Approx;

namespace {

RuleParams scalar_rule(double v_ref, double delta, double alpha, double q_max) {
    RuleParams z = RuleParams::uncontrolled(1);
    z.set_node(0, {v_ref, delta, alpha, q_max, delta + q_max / alpha});
    return z;
}

}  // namespace

TEST_CASE("solve_inner examples") {
    const FeederModel f = testing::scalar_feeder(0.5);
    const Scenario flat{Vector::Ones(1)};
    CHECK(solve_inner(scalar_rule(1.0, 0.0, 2.0, 1.0), f, flat).q_star(0) == 0.0);
    const Scenario high{Vector::Constant(1, 1.2)};
    const auto r = solve_inner(scalar_rule(1.0, 0.0, 2.0, 1.0), f, high);
    CHECK(r.q_star(0) == Approx(-0.2).epsilon(1e-12));
    CHECK(r.kkt_residual <= 1e-12);
    CHECK(solve_inner(scalar_rule(1.0, 0.0, 2.0, 0.1), f, high).q_star(0) == Approx(-0.1));
    CHECK(equilibrium_voltages(r, f, high)(0) == Approx(1.1).epsilon(1e-12));
    EquilibriumResult zero{Vector::Zero(1), Vector::Zero(1), 0.0, 0};
    CHECK(equilibrium_voltages(zero, f, high)(0) == 1.2);
}

TEST_CASE("solve_inner rejects multiphase feeders") {
    Matrix a(2, 2);
    a << 1, 0.4, -0.2, 1;
    const FeederModel f = testing::matrix_feeder(a, PhaseLayout::multi);
    CHECK_THROWS_AS(solve_inner(RuleParams::uncontrolled(2), f, Scenario{Vector::Ones(2)}), ValidationError);
}

TEST_CASE("oracle agrees with a long projected gradient run") {
    Rng rng(51, 0);
    for (int trial = 0; trial < 8; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(5));
        const FeederModel f = testing::random_radial(rng, n);
        const double mu = default_step_size(f);
        const TransformedParams zt = testing::random_transformed(rng, f);
        const Scenario s = testing::random_scenario(rng, n);
        const auto oracle = solve_inner(zt, mu, f, s);
        const auto pgd = simulate_incremental(zt, mu, false, f, s, StopRule::fixed(100'000));
        CHECK((pgd.q_history.back() - oracle.q_star).norm() <= 1e-6);
        CHECK((oracle.q_star.cwiseAbs() - zt.q_max).maxCoeff() <= 0.0);
        CHECK((oracle.v_star - (f.x * oracle.q_star + s.v_tilde)).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("equilibria are odd under a joint sign flip") {
    Rng rng(53, 0);
    for (int trial = 0; trial < 10; ++trial) {
        const FeederModel f = testing::random_radial(rng, 5);
        TransformedParams zt = testing::random_transformed(rng, f);
        const Scenario s = testing::random_scenario(rng, 5);
        // Flip v_tilde - v_ref by reflecting v_tilde around v_ref.
        Scenario flipped{2.0 * zt.v_ref - s.v_tilde};
        const auto a = solve_inner(zt, 1.0, f, s);
        const auto b = solve_inner(zt, 1.0, f, flipped);
        CHECK((a.q_star + b.q_star).norm() <= 1e-10);
    }
}

TEST_CASE("objective examples") {
    const FeederModel f = testing::scalar_feeder(0.5);
    const std::vector<Scenario> flat = {Scenario{Vector::Ones(1)}};
    CHECK(objective_F(scalar_rule(1.0, 0.0, 2.0, 1.0), f, flat) == 0.0);
    const std::vector<Scenario> high = {Scenario{Vector::Constant(1, 1.2)}};
    CHECK(objective_F(scalar_rule(1.0, 0.0, 2.0, 1.0), f, high) == Approx(0.01).epsilon(1e-12));
    const std::vector<Scenario> many = {Scenario{Vector::Constant(1, 1.2)}, Scenario{Vector::Constant(1, 0.9)}};
    CHECK(baseline_objective(many) == Approx((0.04 + 0.01) / 2));
    // Frozen DERs reproduce the baseline.
    CHECK(objective_F(TransformedParams::uncontrolled(1), 1.0, f, many) == Approx(baseline_objective(many)));
    CHECK_THROWS_AS(objective_F(TransformedParams::uncontrolled(1), 1.0, f, std::span<const Scenario>{}),
                    ValidationError);
}

TEST_CASE("multiphase equilibria come from the incremental fixed point") {
    Rng rng(57, 0);
    const Matrix x = testing::random_multiphase_x(rng, 4);
    const FeederModel f = testing::matrix_feeder(x, PhaseLayout::multi);
    const double mu = default_step_size(f);
    const TransformedParams zt = testing::random_transformed(rng, f);
    const Scenario s = testing::random_scenario(rng, 4);
    const auto eq = find_equilibrium(zt, mu, f, s);
    const auto trace = simulate_incremental(zt, mu, false, f, s, StopRule::tolerance(1e-12, 1'000'000));
    CHECK((eq.q_star - trace.q_history.back()).norm() <= 1e-10);
    // A fixed point of the update map.
    CHECK((incremental_step(eq.q_star, eq.v_star, zt, mu) - eq.q_star).norm() <= 1e-10);
}

TEST_CASE("find_equilibria preserves scenario order") {
    Rng rng(59, 0);
    const FeederModel f = testing::random_radial(rng, 5);
    const TransformedParams zt = testing::random_transformed(rng, f);
    std::vector<Scenario> set;
    for (int s = 0; s < 9; ++s) set.push_back(testing::random_scenario(rng, 5));
    const auto all = find_equilibria(zt, 1.0, f, set);
    for (std::size_t s = 0; s < set.size(); ++s) CHECK(all[s].q_star == find_equilibrium(zt, 1.0, f, set[s]).q_star);
}
