#include <doctest.h>

#include "support.hpp"
#include "vvord/equilibrium.hpp"
#include "vvord/random.hpp"
#include "vvord/scenarios.hpp"

#include <set>

using namespace vvord;
using doctest::Approx;

namespace {

FeederModel two_node() {
    Matrix x(2, 2);
    x << 0.2, 0.2, 0.2, 0.4;
    FeederModel f = testing::matrix_feeder(x);
    f.r = 0.5 * x;
    return f;
}

}  // namespace

TEST_CASE("scenario CSV with voltages") {
    const FeederModel f = two_node();
    std::string text = "node0,node1\n";
    for (int s = 0; s < 80; ++s) text += "1.01,0.99\n";
    const ScenarioSet set = parse_scenarios_csv(text, f, "test");
    CHECK(set.size() == 80);
    CHECK(set.scenarios[5].v_tilde(1) == 0.99);
    // Header row is optional.
    CHECK(parse_scenarios_csv("1.01,0.99\n1,1\n", f, "test").size() == 2);
}

TEST_CASE("scenario CSV with injections") {
    const FeederModel f = two_node();
    const ScenarioSet set = parse_scenarios_csv("0.5,0.0,0.1,0.0\n", f, "test");
    const Scenario expected = grid_conditions(f, (Vector(2) << 0.5, 0.0).finished(), (Vector(2) << 0.1, 0.0).finished());
    CHECK(set.scenarios[0].v_tilde == expected.v_tilde);
}

TEST_CASE("scenario CSV errors name the row") {
    const FeederModel f = two_node();
    CHECK_THROWS_WITH_AS(parse_scenarios_csv("1,1\n1,1,1\n", f, "t"), doctest::Contains("row 2"), ValidationError);
    CHECK_THROWS_WITH_AS(parse_scenarios_csv("1,1\n1,abc\n", f, "t"), doctest::Contains("column 2"),
                         ValidationError);
    CHECK_THROWS_AS(parse_scenarios_csv("1,1,1\n", f, "t"), ValidationError);
    CHECK_THROWS_AS(parse_scenarios_csv("", f, "t"), ValidationError);
    CHECK_THROWS_AS(parse_scenarios_csv("1,nan\n", f, "t"), ValidationError);
    CHECK_THROWS_AS(load_scenarios("/nonexistent.csv", f), ValidationError);
}

TEST_CASE("csv round trip is exact") {
    Rng rng(1, 2);
    const FeederModel f = two_node();
    const ScenarioSet set = generate_synthetic(f, 10, {0.0, 1.0}, {0.0, 2.0}, 3);
    const ScenarioSet back = parse_scenarios_csv(scenarios_to_csv(set), f, "rt");
    REQUIRE(back.size() == set.size());
    for (std::size_t s = 0; s < set.size(); ++s) CHECK(back.scenarios[s].v_tilde == set.scenarios[s].v_tilde);
}

TEST_CASE("synthetic generation") {
    const FeederModel f = two_node();
    const ScenarioSet flat = generate_synthetic(f, 5, {0.0, 0.0}, {0.0, 0.0}, 1);
    for (const auto& s : flat.scenarios) CHECK(s.v_tilde == Vector::Ones(2));
    const ScenarioSet a = generate_synthetic(f, 80, {0.0, 1.0}, {0.0, 1.5}, 42);
    const ScenarioSet b = generate_synthetic(f, 80, {0.0, 1.0}, {0.0, 1.5}, 42);
    const ScenarioSet c = generate_synthetic(f, 80, {0.0, 1.0}, {0.0, 1.5}, 43);
    CHECK(a.size() == 80);
    for (std::size_t s = 0; s < 80; ++s) CHECK(a.scenarios[s].v_tilde == b.scenarios[s].v_tilde);
    CHECK(a.scenarios[0].v_tilde != c.scenarios[0].v_tilde);
    CHECK(baseline_objective(a.view()) > 0.0);
    CHECK(a.provenance.find("seed=42") != std::string::npos);
    CHECK_THROWS_AS(generate_synthetic(f, 0, {0.0, 1.0}, {0.0, 1.0}, 1), ValidationError);
    CHECK_THROWS_AS(generate_synthetic(f, 3, {1.0, 0.0}, {0.0, 1.0}, 1), ValidationError);
}

TEST_CASE("random streams") {
    Rng a(5, 0), b(5, 0), c(5, 1);
    CHECK(a.next() == b.next());
    CHECK(Rng(5, 0).next() != c.next());
    Rng r(9, 9);
    for (int k = 0; k < 1000; ++k) {
        const double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(r.below(7) < 7u);
    }
    std::vector<int> items = {0, 1, 2, 3, 4, 5, 6, 7};
    Rng(3, 3).shuffle(items);
    CHECK(std::set<int>(items.begin(), items.end()).size() == 8u);
    // Fixed by the algorithm, independent of the platform.
    CHECK(splitmix64(0) == 0xE220A8397B1DCDAFull);
}
