#include "hybstab/diffusion/diffusion.hpp"

#include "oracles/closed_form.hpp"

#include <doctest.h>

#include <cmath>

using namespace hybstab;

namespace {

BesqSpec spec_of(double delta, double y0, double S, double dt, std::size_t paths) {
    BesqSpec s;
    s.delta = delta;
    s.y0 = y0;
    s.S = S;
    s.dt = dt;
    s.paths = paths;
    return s;
}

}  // namespace

TEST_CASE("BESQ spec validation") {
    CHECK(spec_of(2, 1, 1, 1e-3, 10).steps() == 1000);
    CHECK_THROWS_AS(spec_of(2, 1, 1, 3e-3, 10).validate(), ValidationError);
    CHECK_THROWS_AS(spec_of(2, 1, 1, 0.0, 10).validate(), ValidationError);
    CHECK_THROWS_AS(spec_of(-1, 1, 1, 1e-3, 10).validate(), ValidationError);
    CHECK_THROWS_AS(spec_of(2, -1, 1, 1e-3, 10).validate(), ValidationError);
    CHECK_THROWS_AS(spec_of(2, 1, 1, 1e-3, 0).validate(), ValidationError);
}

TEST_CASE("BESQ simulation") {
    SUBCASE("zero solution is absorbed") {
        const auto r = besq_simulate(spec_of(0, 0, 1, 1e-2, 50), 1, true);
        for (double y : r.terminal) CHECK(y == 0.0);
        for (const auto& p : r.paths)
            for (double y : p) CHECK(y == 0.0);
        CHECK(r.mean.se == 0.0);
    }
    SUBCASE("paths stay nonnegative") {
        const auto r = besq_simulate(spec_of(0.5, 0.1, 1, 1e-2, 500), 2, true);
        REQUIRE(r.paths.size() == 500);
        for (const auto& p : r.paths) {
            CHECK(p.size() == 101);
            for (double y : p) CHECK(y >= 0.0);
        }
    }
    SUBCASE("determinism") {
        const auto a = besq_simulate(spec_of(2, 1, 1, 1e-2, 100), 3);
        const auto b = besq_simulate(spec_of(2, 1, 1, 1e-2, 100), 3);
        CHECK(a.terminal == b.terminal);
    }
    SUBCASE("mean identity with a dt versus dt/2 bias budget") {
        const auto m = besq_mean_check(spec_of(2, 1, 1, 1e-3, 20000), 4);
        CHECK(m.target == 3.0);
        CHECK(m.ok);
        CHECK(m.deviation <= 3 * m.coarse.se + m.bias_budget);
        CHECK(m.bias_budget >= 0.0);
    }
    SUBCASE("short horizon mean is close to y0") {
        for (double d : {0.0, 1.0, 3.0}) {
            const auto m = besq_mean_check(spec_of(d, 2.0, 1e-3, 1e-4, 20000), 5);
            CHECK(std::abs(m.coarse.mean - 2.0) <= d * 1e-3 + 3 * m.coarse.se + m.bias_budget);
            CHECK(m.ok);
        }
    }
}

TEST_CASE("payoffs") {
    CHECK(Payoff::constant(2.0)(7.0) == 2.0);
    CHECK(Payoff::linear(3.0)(2.0) == 6.0);
    CHECK(Payoff::power(1.0, 2.0)(3.0) == 9.0);
    CHECK(Payoff::custom([](double y) { return y + 1; }, "y+1")(1.0) == 2.0);
    CHECK_THROWS_AS(Payoff::power(1.0, 3.0), ValidationError);
    CHECK_THROWS_AS(Payoff::linear(-1.0), ValidationError);
    const auto spec = spec_of(2, 1, 1, 1e-3, 10);
    CHECK(phi_affine(0.25, 1.5, Payoff::linear(2.0), spec) == doctest::Approx(2.0 * (1.5 + 2 * 0.75)));
    CHECK(phi_affine(0.0, 1.5, Payoff::constant(4.0), spec) == 4.0);
    CHECK_THROWS_AS(phi_affine(0.0, 1.0, Payoff::power(1.0, 2.0), spec), ValidationError);
    CHECK(besq_second_moment(1.3, 2.0, 0.7) == doctest::Approx(oracle::besq_second_moment(1.3, 2.0, 0.7)));
}

TEST_CASE("phi estimates") {
    const auto spec = spec_of(2, 1, 1, 1e-3, 20000);
    SUBCASE("constant payoff") {
        const auto p = phi_estimate(0.0, 1.5, Payoff::constant(3.0), spec, 6);
        CHECK(p.mean == 3.0);
        CHECK(p.se == 0.0);
    }
    SUBCASE("terminal consistency is exact") {
        for (double y : {0.0, 0.3, 2.5}) {
            const auto F = Payoff::power(1.0, 1.5);
            const auto p = phi_estimate(spec.S, y, F, spec, 7);
            CHECK(p.mean == F(y));
            CHECK(p.se == 0.0);
        }
    }
    SUBCASE("linear payoff matches y + d (S - t)") {
        for (double t : {0.0, 0.5}) {
            for (double y : {0.5, 2.0}) {
                const auto p = phi_estimate(t, y, Payoff::linear(), spec, 8);
                CHECK(std::abs(p.mean - (y + 2.0 * (1.0 - t))) <= 3 * p.se);
            }
        }
    }
    SUBCASE("squared payoff matches the second moment") {
        for (double y : {0.5, 1.0, 2.0}) {
            const auto p = phi_estimate(0.0, y, Payoff::power(1.0, 2.0), spec, 9);
            const double exact = oracle::besq_second_moment(y, 2.0, 1.0);
            // Monte Carlo error plus the first-order Euler bias of the truncated scheme
            CHECK(std::abs(p.mean - exact) <= 3 * p.se + 2.0 * spec.dt * exact);
        }
    }
    CHECK_THROWS_AS(phi_estimate(1.5, 1.0, Payoff::linear(), spec, 1), ValidationError);
    CHECK_THROWS_AS(phi_estimate(0.0, -1.0, Payoff::linear(), spec, 1), ValidationError);
}

TEST_CASE("phi shape checks") {
    const auto spec = spec_of(2, 1, 1, 1e-3, 5000);
    const std::vector<double> grid{0.5, 1.0, 1.5, 2.0, 2.5};
    SUBCASE("linear payoff") {
        const auto r = phi_shape_check(Payoff::linear(), spec, grid, 0.0, 10);
        CHECK(r.monotone);
        CHECK(r.convex);
        REQUIRE(r.residual_available);
        // time differences span 20 Euler steps: sd of the increment is about 2 sqrt(E Y) sqrt(20 dt)
        REQUIRE(r.pde_residual.size() == grid.size() - 2);
        for (std::size_t g = 1; g + 1 < grid.size(); ++g) {
            const double sd = 2.0 * std::sqrt(grid[g] + 2.0) * std::sqrt(20 * spec.dt);
            const double noise = sd / std::sqrt(static_cast<double>(spec.paths)) / (20 * spec.dt);
            CHECK(std::abs(r.pde_residual[g - 1]) <= 4.0 * noise);
        }
        for (std::size_t g = 0; g < grid.size(); ++g) {
            CHECK(std::abs(r.phi[g].mean - (grid[g] + 2.0)) <= 3 * r.phi[g].se);
        }
    }
    SUBCASE("squared payoff is monotone and convex") {
        const auto r = phi_shape_check(Payoff::power(1.0, 2.0), spec, grid, 0.0, 11);
        CHECK(r.monotone);
        CHECK(r.convex);
        for (std::size_t g = 0; g + 1 < grid.size(); ++g) {
            CHECK(r.phi[g + 1].mean > r.phi[g].mean);
            const double exact = oracle::besq_second_moment(grid[g], 2.0, 1.0);
            CHECK(std::abs(r.phi[g].mean - exact) <= 3 * r.phi[g].se + 2.0 * spec.dt * exact);
        }
        // strict convexity: second difference of the exact phi is 2 h^2 > 0
        for (std::size_t g = 1; g + 1 < grid.size(); ++g) {
            CHECK(r.phi[g - 1].mean + r.phi[g + 1].mean - 2 * r.phi[g].mean > 0.0);
        }
    }
    SUBCASE("constant payoff passes trivially") {
        const auto r = phi_shape_check(Payoff::constant(2.0), spec, grid, 0.5, 12);
        CHECK(r.monotone);
        CHECK(r.convex);
        for (const auto& p : r.phi) CHECK(p.se == 0.0);
        CHECK(r.max_abs_residual <= 1e-9);
    }
    SUBCASE("coarse or non-uniform grids skip the residual") {
        const auto coarse = phi_shape_check(Payoff::linear(), spec, {0.5, 1.0, 1.5}, 0.0, 13);
        CHECK_FALSE(coarse.residual_available);
        CHECK(coarse.note.find("coarse") != std::string::npos);
        const auto uneven = phi_shape_check(Payoff::linear(), spec, {0.5, 1.0, 1.2, 2.0, 3.0}, 0.0, 13);
        CHECK_FALSE(uneven.residual_available);
        CHECK_THROWS_AS(phi_shape_check(Payoff::linear(), spec, {1.0, 0.5}, 0.0, 1), ValidationError);
        CHECK_THROWS_AS(phi_shape_check(Payoff::linear(), spec, {1.0}, 0.0, 1), ValidationError);
    }
}

TEST_CASE("coupling surrogate") {
    const auto r = besq_coupling_check(spec_of(2, 1, 1, 1e-3, 2000), {0.5, 1.0, 2.0, 4.0}, 14);
    CHECK(r.pairs == 3 * 2000);
    // order is preserved away from zero; the discretised square root may swap paths near it
    CHECK(static_cast<double>(r.violations) <= 0.01 * static_cast<double>(r.pairs));
    const auto far = besq_coupling_check(spec_of(2, 50, 0.1, 1e-3, 2000), {50.0, 60.0}, 15);
    CHECK(far.violations == 0);
}

TEST_CASE("sector condition") {
    const auto grid = sector_grid(1.0, 10.0, 8, 16, 2);
    CHECK(grid.size() == 8 * 16);
    for (const auto& x : grid) CHECK(norm(x) > 1.0);
    const std::vector<double> times{0.0, 1.0};
    SUBCASE("inward drift passes") {
        const auto r = sector_check(Drift::linear(1.0), Region::ball(1.0), grid, times);
        CHECK(r.ok);
        CHECK(r.worst < 0.0);
        CHECK(r.checked == grid.size() * times.size());
    }
    SUBCASE("outward drift fails at every point") {
        const auto b = Drift::linear(-1.0);
        const auto r = sector_check(b, Region::ball(1.0), grid, times);
        CHECK_FALSE(r.ok);
        for (const auto& x : grid) CHECK(dot(x, b(0.0, x)) > 0.0);
    }
    SUBCASE("radial drift depends on the size of K") {
        const auto b = Drift::radial(2.0);
        CHECK(sector_check(b, Region::ball(2.1), sector_grid(2.1, 10.0, 8, 16, 2), times).ok);
        // fails for 1 < |x| < 2, so the rings must reach into that band
        const auto r = sector_check(b, Region::ball(1.0), sector_grid(1.0, 3.0, 8, 16, 2), times);
        CHECK_FALSE(r.ok);
        CHECK(norm(r.at) < 2.0);
        // <x, b> = -|x|^2 + 2 |x|
        const Vec x{3.0, 4.0};
        CHECK(dot(x, b(0.0, x)) == doctest::Approx(-25.0 + 10.0));
    }
    SUBCASE("grid points inside K are rejected") {
        CHECK_THROWS_AS(sector_check(Drift::linear(1.0), Region::ball(5.0), grid, times), ValidationError);
    }
    SUBCASE("one-dimensional grid") {
        const auto g1 = sector_grid(1.0, 3.0, 4, 8, 1);
        for (const auto& x : g1) CHECK(x.size() == 1);
        CHECK(sector_check(Drift::linear(0.5), Region::ball(1.0), g1, {0.0}).ok);
    }
}

TEST_CASE("sampled chain") {
    DiffusionSpec spec;
    spec.drift = Drift::linear(1.0);
    spec.K = Region::ball(1.0);
    spec.dim = 2;
    spec.dt = 1e-2;
    spec.horizon = 5;
    SUBCASE("start in K stays at x0") {
        const auto b = sampled_chain_extract(spec, {0.5, 0.0}, 10, 1);
        for (const auto& p : b.paths) {
            CHECK(p.states.size() == 6);
            for (const auto& s : p.states) CHECK(s.x == Vec{0.5, 0.0});
        }
    }
    SUBCASE("noise-free limit follows the ODE until K") {
        auto ode = spec;
        ode.noise = false;
        ode.dt = 1e-5;
        const auto b = sampled_chain_extract(ode, {4.0, 0.0}, 1, 2);
        const auto& s = b.paths[0].states;
        CHECK(s[1].x[0] == doctest::Approx(4.0 * std::exp(-1.0)).epsilon(1e-4));
        // enters K at time ln 4 and stays frozen on its boundary
        for (std::size_t i = 2; i < s.size(); ++i) {
            CHECK(s[i].x == s[2].x);
            CHECK(norm(s[i].x) <= 1.0);
            CHECK(norm(s[i].x) == doctest::Approx(1.0).epsilon(1e-4));
        }
    }
    SUBCASE("the BESQ certificate passes the statistical test") {
        const auto cert = besq_diffusion_certificate(Payoff::linear(), spec);
        CHECK(cert.phi(0, real_state({4.0, 0.0})) == doctest::Approx(16.0 + 2.0 * 5.0));
        CHECK(cert.phi(9, real_state({1.0, 1.0})) == doctest::Approx(2.0));
        const auto b = sampled_chain_extract(spec, {4.0, 0.0}, 10000, 3);
        const auto r = verify_supermartingale_mc(b, cert, 0.99);
        CHECK(r.ok);
        CHECK_THROWS_AS(besq_diffusion_certificate(Payoff::power(1.0, 2.0), spec), ValidationError);
    }
    SUBCASE("validation") {
        auto bad = spec;
        bad.horizon = 0;
        CHECK_THROWS_AS(bad.validate(), ValidationError);
        bad = spec;
        bad.dt = 0.3;
        CHECK_THROWS_AS(bad.validate(), ValidationError);
        CHECK_THROWS_AS(sampled_chain_extract(spec, {1.0}, 1, 1), ValidationError);
    }
}
