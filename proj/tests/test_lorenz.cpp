#include "kooplab/lorenz.hpp"

#include <cmath>

#include "doctest.h"
#include "kooplab/errors.hpp"

using namespace kooplab;

namespace {
double max_abs3(const State3& s) {
    return std::max({std::abs(s.x), std::abs(s.y), std::abs(s.z)});
}
}  // namespace

TEST_CASE("lorenz_deriv at the fixed points") {
    LorenzParams p;
    CHECK(max_abs3(lorenz_deriv({0, 0, 0}, p)) == 0.0);

    State3 cp = equilibrium_c_plus(p);
    CHECK(cp.x == doctest::Approx(std::sqrt(72.0)).epsilon(1e-15));
    CHECK(cp.z == doctest::Approx(27.0));
    CHECK(max_abs3(lorenz_deriv(cp, p)) < 1e-12);
    CHECK(max_abs3(lorenz_deriv(equilibrium_c_minus(p), p)) < 1e-12);
}

TEST_CASE("lorenz_deriv hand-evaluated point") {
    State3 d = lorenz_deriv({1, 2, 3}, LorenzParams{});
    CHECK(d.x == doctest::Approx(10.0).epsilon(1e-15));
    CHECK(d.y == doctest::Approx(23.0).epsilon(1e-15));
    CHECK(d.z == doctest::Approx(-6.0).epsilon(1e-15));
}

TEST_CASE("integrate holds fixed points stationary") {
    IntegratorConfig cfg;
    LorenzParams p;

    Trajectory origin = integrate({0, 0, 0}, 100, cfg, p);
    REQUIRE(origin.states.size() == 101);
    for (const auto& s : origin.states) CHECK(max_abs3(s) == 0.0);

    State3 cp = equilibrium_c_plus(p);
    Trajectory tc = integrate(cp, 100, cfg, p);
    double dev = 0.0;
    for (const auto& s : tc.states) dev = std::max(dev, max_abs3(s - cp));
    CHECK(dev < 1e-6);
}

TEST_CASE("integrate stays bounded near the attractor") {
    IntegratorConfig cfg;
    Trajectory t = integrate({1, 1, 1}, 1024, cfg, LorenzParams{});
    REQUIRE(t.states.size() == 1025);
    double mx = 0.0;
    for (const auto& s : t.states) mx = std::max(mx, max_abs3(s));
    CHECK(mx < 100.0);
    for (const auto& s : t.states) CHECK(s.finite());
}

TEST_CASE("integrate is deterministic") {
    IntegratorConfig cfg;
    Trajectory a = integrate({1, 1, 1}, 64, cfg, LorenzParams{});
    Trajectory b = integrate({1, 1, 1}, 64, cfg, LorenzParams{});
    for (std::size_t i = 0; i < a.states.size(); ++i) {
        CHECK(a.states[i].x == b.states[i].x);
        CHECK(a.states[i].y == b.states[i].y);
        CHECK(a.states[i].z == b.states[i].z);
    }
}

TEST_CASE("integrate self-convergence across tolerance levels") {
    IntegratorConfig loose;  // (1e-10, 1e-10)
    IntegratorConfig tight;
    tight.rtol = 1e-12;
    tight.atol = 1e-12;
    Trajectory a = integrate({1, 1, 1}, 256, loose, LorenzParams{});
    Trajectory b = integrate({1, 1, 1}, 256, tight, LorenzParams{});
    double dev = 0.0;
    for (std::size_t i = 0; i < a.states.size(); ++i)
        dev = std::max(dev, max_abs3(a.states[i] - b.states[i]));
    CHECK(dev < 1e-6);
}

TEST_CASE("flow_map identity and equilibrium cases") {
    IntegratorConfig cfg;
    LorenzParams p;

    State3 r = flow_map({1, 1, 1}, 0.0, {0, 0, 0}, cfg, p);
    CHECK(r.x == 1.0);
    CHECK(r.y == 1.0);
    CHECK(r.z == 1.0);

    State3 cp = equilibrium_c_plus(p);
    State3 shifted = flow_map(cp, 0.1, {0.5, 0, 0}, cfg, p);
    CHECK(max_abs3(shifted - (cp + State3{0.5, 0, 0})) < 1e-6);
}

TEST_CASE("flow_map semigroup property") {
    IntegratorConfig cfg;
    LorenzParams p;
    State3 zero{0, 0, 0};
    State3 two_hops = flow_map(flow_map({1, 1, 1}, 0.05, zero, cfg, p), 0.05, zero, cfg, p);
    State3 one_hop = flow_map({1, 1, 1}, 0.10, zero, cfg, p);
    CHECK(max_abs3(two_hops - one_hop) < 1e-8);
}

TEST_CASE("flow_map matches integrate samples") {
    IntegratorConfig cfg;
    LorenzParams p;
    Trajectory t = integrate({1, 1, 1}, 8, cfg, p);
    for (int k = 1; k <= 8; ++k) {
        State3 f = flow_map({1, 1, 1}, k * cfg.dt_sample, {0, 0, 0}, cfg, p);
        CHECK(max_abs3(f - t.states[static_cast<std::size_t>(k)]) < 1e-8);
    }
}

TEST_CASE("integrate rejects bad arguments") {
    IntegratorConfig cfg;
    CHECK_THROWS_AS(integrate({1, 1, 1}, 0, cfg, LorenzParams{}), ConfigError);
    CHECK_THROWS_AS(flow_map({1, 1, 1}, -0.5, {0, 0, 0}, cfg, LorenzParams{}), ConfigError);
}

TEST_CASE("step size underflow is reported") {
    IntegratorConfig cfg;
    cfg.min_internal_step = 1e-3;  // impossible floor for this tolerance
    CHECK_THROWS_AS(integrate({1, 1, 1}, 4, cfg, LorenzParams{}), StepSizeUnderflowError);
}
