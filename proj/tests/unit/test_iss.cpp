#include "hybstab/iss/iss.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

using namespace hybstab;

namespace {

DisturbedSystem scalar_system(DisturbanceSignal w, double w_max, double lambda = 0.75) {
    SwitchedSystem sys{{ModeMap::linear(Matrix::from_rows({{0.5}})), ModeMap::linear(Matrix::from_rows({{-0.4}}))},
                       SwitchingChain(Matrix::from_rows({{0.7, 0.3}, {0.4, 0.6}}))};
    auto lyap = LyapunovFamily::weighted_norms({1.0, 1.0}, 1.2, ClassK::linear(1.0), ClassK::linear(1.0));
    lyap.Lambda = Matrix(2, 2, lambda);
    return DisturbedSystem{sys, std::move(w), w_max, lyap, ClassK::linear(4.0)};
}

Matrix scaled_rotation(double scale, double angle) {
    return Matrix::from_rows({{scale * std::cos(angle), -scale * std::sin(angle)},
                              {scale * std::sin(angle), scale * std::cos(angle)}});
}

}  // namespace

TEST_CASE("disturbance signals") {
    const auto bb = DisturbanceSignal::bang_bang(0.5, 2, 1);
    CHECK(bb.at(0) == Vec{0.5});
    CHECK(bb.at(1) == Vec{0.5});
    CHECK(bb.at(2) == Vec{-0.5});
    CHECK(bb.sup_norm(10) == 0.5);
    CHECK_FALSE(bb.identically_zero(10));
    CHECK(DisturbanceSignal::zero(2).identically_zero(50));
    const auto sn = DisturbanceSignal::sinusoid(2.0, 4.0, 0.0, 1);
    CHECK(sn.at(1)[0] == doctest::Approx(2.0));
    CHECK(sn.sup_norm(8) <= 2.0 + 1e-12);
    const auto tb = DisturbanceSignal::table({{0.1}, {0.2}});
    CHECK(tb.at(1) == Vec{0.2});
    CHECK_THROWS_AS((void)tb.at(2), HorizonError);
    CHECK_THROWS_AS((void)tb.at(-1), DomainError);
    CHECK_THROWS_AS(DisturbanceSignal::table({{0.1}, {0.2, 0.3}}), ValidationError);
    CHECK_THROWS_AS(DisturbanceSignal::bang_bang(1.0, 0, 1), ValidationError);

    const std::string path = "iss_disturbance_test.csv";
    {
        std::ofstream os(path);
        os << "t,w0\n0,0.25\n1,-0.5\n2,0\n";
    }
    const auto csv = DisturbanceSignal::from_csv(path);
    CHECK(csv.at(0) == Vec{0.25});
    CHECK(csv.at(1) == Vec{-0.5});
    CHECK(csv.sup_norm(2) == 0.5);
    std::remove(path.c_str());
    CHECK_THROWS_AS(DisturbanceSignal::from_csv("does/not/exist.csv"), ValidationError);
}

TEST_CASE("disturbed system validation") {
    auto ok = scalar_system(DisturbanceSignal::zero(1), 0.0);
    CHECK_NOTHROW(ok.validate());
    auto no_lambda = ok;
    no_lambda.lyap.Lambda.reset();
    CHECK_THROWS_AS(no_lambda.validate(), ValidationError);
    auto shifted = ok;
    shifted.system.maps[0] = ModeMap::affine(Matrix::from_rows({{0.5}}), {1.0}, {2.0});
    CHECK_THROWS_AS(shifted.validate(), ValidationError);
}

TEST_CASE("ISS Lyapunov items for the scalar example") {
    const auto sys = scalar_system(DisturbanceSignal::bang_bang(0.5, 1, 1), 0.5);
    const auto rep = verify_iss_family(sys);
    CHECK(rep.bounds.ok);
    CHECK(rep.comparable.ok);
    CHECK(rep.decrease.ok);
    // triangle inequality: |a x + w| <= 0.5 |x| + |x| / 4 off the gain ball
    LogRadialGrid g;
    for (const auto& p : g.points(1)) {
        for (double w : {-0.5, 0.5}) {
            if (std::abs(p[0]) <= 4 * std::abs(w)) continue;
            for (double a : {0.5, -0.4}) CHECK(std::abs(a * p[0] + w) <= 0.75 * std::abs(p[0]) + 1e-15);
        }
    }
    CHECK_FALSE(verify_iss_family(scalar_system(DisturbanceSignal::zero(1), 0.5, 0.45)).decrease.ok);
}

TEST_CASE("ISS envelope") {
    SUBCASE("zero disturbance is pure decay") {
        const auto sys = scalar_system(DisturbanceSignal::zero(1), 0.0);
        const auto env = iss_bound(sys, {10.0}, 100);
        CHECK(env.K_radius == 0.0);
        CHECK(env.delta.value == 0.0);
        CHECK(env.beta.value == 0.0);
        CHECK(env.offset == 0.0);
        for (Time t : {0, 5, 100}) CHECK(env.at(t) == doctest::Approx(10.0 * std::exp(-env.alpha_star * static_cast<double>(t))));
    }
    SUBCASE("condition value and default alpha") {
        const auto env = iss_bound(scalar_system(DisturbanceSignal::zero(1), 0.5), {10.0}, 10);
        CHECK(env.condition.value == doctest::Approx(0.9));
        CHECK(env.alpha_star == doctest::Approx(-std::log(0.9) / 2));
        CHECK(env.K_radius == 2.0);
        CHECK(env.delta.value == doctest::Approx(2.0));
    }
    SUBCASE("envelope at zero dominates the Lyapunov chain") {
        const auto sys = scalar_system(DisturbanceSignal::constant({0.5}), 0.5);
        const auto env = iss_bound(sys, {3.0}, 20);
        CHECK(env.at(0) >= sys.lyap.alpha2(3.0));
        CHECK(sys.lyap.alpha2(3.0) >= sys.lyap.V(0, {3.0}));
        CHECK(sys.lyap.V(0, {3.0}) >= sys.lyap.alpha1(3.0));
    }
    SUBCASE("monotonicity") {
        const auto base = iss_bound(scalar_system(DisturbanceSignal::zero(1), 0.5), {5.0}, 60);
        for (Time t = 1; t <= 60; ++t) CHECK(base.at(t) <= base.at(t - 1));
        const auto bigger_w = iss_bound(scalar_system(DisturbanceSignal::zero(1), 1.0), {5.0}, 60);
        const auto bigger_x = iss_bound(scalar_system(DisturbanceSignal::zero(1), 0.5), {8.0}, 60);
        for (Time t = 0; t <= 60; ++t) {
            CHECK(bigger_w.at(t) >= base.at(t));
            CHECK(bigger_x.at(t) >= base.at(t));
        }
        CHECK(bigger_w.K_radius == doctest::Approx(2.0 * base.K_radius));
    }
    SUBCASE("failing condition gives no envelope") {
        CHECK_THROWS_AS(iss_bound(scalar_system(DisturbanceSignal::zero(1), 0.5, 0.9), {1.0}, 5), DomainError);
        CHECK_THROWS_AS(iss_bound(scalar_system(DisturbanceSignal::zero(1), 0.5), {1.0}, 5, 1.0), DomainError);
    }
}

TEST_CASE("ISS check") {
    SUBCASE("undisturbed contraction decays under the envelope") {
        const auto rep = iss_check(scalar_system(DisturbanceSignal::zero(1), 0.0), {10.0}, 60, 2000, 3);
        CHECK(rep.ran);
        CHECK(rep.ok);
        CHECK(rep.zero_disturbance);
        REQUIRE(rep.diagnostics);
        CHECK(rep.alpha1_mean.per_time.back().mean < 1e-10);
    }
    SUBCASE("constant disturbance at w_max") {
        const auto rep = iss_check(scalar_system(DisturbanceSignal::constant({0.5}), 0.5), {10.0}, 100, 10000, 4);
        CHECK(rep.precondition_ok);
        CHECK(rep.ok);
        CHECK(rep.worst_margin_se >= -3.0);
        CHECK_FALSE(rep.diagnostics);
    }
    SUBCASE("bang-bang at w_max") {
        const auto rep = iss_check(scalar_system(DisturbanceSignal::bang_bang(0.5, 1, 1), 0.5), {10.0}, 100, 10000, 5);
        CHECK(rep.ok);
    }
    SUBCASE("disturbance beyond w_max is a precondition failure") {
        const auto rep = iss_check(scalar_system(DisturbanceSignal::constant({0.8}), 0.5), {10.0}, 100, 100, 6);
        CHECK_FALSE(rep.precondition_ok);
        CHECK_FALSE(rep.ran);
        CHECK_FALSE(rep.ok);
        CHECK(rep.precondition.find("w_max") != std::string::npos);
    }
}

TEST_CASE("zero disturbance reduces to the switched diagnostics") {
    const auto P = Matrix::from_rows({{0.2, 0.8}, {0.8, 0.2}});
    const SwitchedSystem sys{{ModeMap::linear(scaled_rotation(0.5, 0.7)), ModeMap::linear(scaled_rotation(0.5, 1.1))},
                             SwitchingChain(P)};
    auto lyap = LyapunovFamily::weighted_norms({1.0, 1.5}, 1.5, ClassK::linear(1.0), ClassK::linear(1.5));
    lyap.lambda0 = 0.5;
    lyap.Lambda = Matrix(2, 2, 0.5);
    const double alpha = check_S1(0.5, 1.5, sys.chain).alpha_star;
    const DisturbedSystem dsys{sys, DisturbanceSignal::zero(2), 0.0, lyap, ClassK::linear(1.0)};
    const auto rep = iss_check(dsys, {1.0, 0.5}, 100, 1000, 77, alpha);
    REQUIRE(rep.diagnostics);
    const auto direct = stability_diagnostics(simulate_switched(sys, {1.0, 0.5}, 100, 1000, 77), lyap, sys, alpha);
    const auto& d = *rep.diagnostics;
    CHECK(d.ok() == direct.ok());
    CHECK(d.discounted_ratio == direct.discounted_ratio);
    CHECK(d.max_log_final_ratio == direct.max_log_final_ratio);
    CHECK(d.envelope_violations == direct.envelope_violations);
    CHECK(d.l1_sup_mean == direct.l1_sup_mean);
    REQUIRE(d.discounted.per_time.size() == direct.discounted.per_time.size());
    for (std::size_t t = 0; t < d.discounted.per_time.size(); ++t) {
        CHECK(d.discounted.per_time[t].mean == direct.discounted.per_time[t].mean);
        CHECK(d.alpha1_mean.per_time[t].mean == direct.alpha1_mean.per_time[t].mean);
    }
    CHECK(direct.ok());
}
