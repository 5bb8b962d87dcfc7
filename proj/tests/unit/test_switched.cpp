#include "hybstab/certificate/certificate.hpp"
#include "hybstab/switched/switched.hpp"

#include "oracles/closed_form.hpp"

#include <Eigen/Dense>
#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

using namespace hybstab;

namespace {

Matrix scaled_rotation(double scale, double angle) {
    return Matrix::from_rows({{scale * std::cos(angle), -scale * std::sin(angle)},
                              {scale * std::sin(angle), scale * std::cos(angle)}});
}

Matrix rotation_diag(double d0, double d1, double angle) {
    const auto R = scaled_rotation(1.0, angle);
    return Matrix::from_rows({{d0 * R(0, 0), d0 * R(0, 1)}, {d1 * R(1, 0), d1 * R(1, 1)}});
}

SwitchedSystem two_mode(const Matrix& P) {
    return SwitchedSystem{{ModeMap::linear(scaled_rotation(0.5, 0.7)), ModeMap::linear(rotation_diag(0.5, 0.25, 1.1))},
                          SwitchingChain(P)};
}

LyapunovFamily weighted(double mu, double lambda0) {
    auto f = LyapunovFamily::weighted_norms({1.0, 1.5}, mu, ClassK::linear(1.0), ClassK::linear(1.5));
    f.lambda0 = lambda0;
    return f;
}

double eigen_norm(const Matrix& A) {
    Eigen::MatrixXd M(A.rows, A.cols);
    for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t j = 0; j < A.cols; ++j) M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = A(i, j);
    return Eigen::JacobiSVD<Eigen::MatrixXd>(M).singularValues()(0);
}

double eigen_min_sv(const Matrix& A) {
    Eigen::MatrixXd M(A.rows, A.cols);
    for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t j = 0; j < A.cols; ++j) M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = A(i, j);
    const auto sv = Eigen::JacobiSVD<Eigen::MatrixXd>(M).singularValues();
    return sv(sv.size() - 1);
}

const Matrix kSym = Matrix::from_rows({{0.5, 0.5}, {0.5, 0.5}});

}  // namespace

TEST_CASE("switching chain") {
    SwitchingChain c(Matrix::from_rows({{0.6, 0.4}, {0.1, 0.9}}));
    CHECK(c.p_hat() == 0.9);
    CHECK(c.p_tilde() == 0.4);
    CHECK(c.irreducible());
    CHECK(c.initial() == Vec{0.5, 0.5});
    SwitchingChain id(Matrix::identity(2));
    CHECK_FALSE(id.irreducible());
    CHECK_THROWS_AS(id.require_irreducible(), ValidationError);
    CHECK_THROWS_AS(SwitchingChain(Matrix::from_rows({{0.6, 0.3}, {0.1, 0.9}})), ValidationError);
    CHECK_THROWS_AS(SwitchingChain(kSym, {0.3, 0.3}), ValidationError);
    CHECK_THROWS_AS(SwitchingChain(kSym, {1.0}), ValidationError);
}

TEST_CASE("S1") {
    SUBCASE("worked example") {
        const auto r = check_S1(0.5, 2.0, SwitchingChain(Matrix::from_rows({{0.6, 0.4}, {0.4, 0.6}})));
        CHECK(r.p_hat == 0.6);
        CHECK(r.p_tilde == 0.4);
        CHECK(r.value == doctest::Approx(0.7).epsilon(1e-15));
        CHECK(r.ok);
        CHECK(r.alpha_star == doctest::Approx(-std::log(0.7) / 2).epsilon(1e-15));
        CHECK(r.alpha_star == doctest::Approx(0.1783).epsilon(1e-3));
    }
    SUBCASE("lambda0 near 1 fails") {
        const auto r = check_S1(0.999999, 1.5, SwitchingChain(Matrix::from_rows({{0.6, 0.4}, {0.4, 0.6}})));
        CHECK_FALSE(r.ok);
        CHECK(r.alpha_star <= 0.0);
    }
    SUBCASE("no switching reduces to lambda0 < 1") {
        for (double l : {0.1, 0.5, 0.9}) {
            const auto r = check_S1(l, 3.0, SwitchingChain(Matrix::identity(2)));
            CHECK(r.value == l);
            CHECK(r.ok);
        }
    }
    SUBCASE("alpha contract") {
        for (double l : {0.1, 0.3, 0.45}) {
            const auto r = check_S1(l, 1.5, SwitchingChain(kSym));
            REQUIRE(r.ok);
            CHECK(r.alpha_star > 0.0);
            CHECK(r.value * std::exp(r.alpha_star) < 1.0);
        }
    }
    CHECK_THROWS_AS(check_S1(1.0, 2.0, SwitchingChain(kSym)), ValidationError);
    CHECK_THROWS_AS(check_S1(0.5, 0.5, SwitchingChain(kSym)), ValidationError);
}

TEST_CASE("S2") {
    SUBCASE("uniform Lambda") {
        const auto r = check_S2(Matrix(2, 2, 0.4), 2.0, SwitchingChain(kSym));
        CHECK(r.value == doctest::Approx(0.8).epsilon(1e-15));
        CHECK(r.ok);
    }
    SUBCASE("diagonal case reduces to mu lambda0") {
        Matrix L(2, 2, 7.0);
        L(0, 0) = L(1, 1) = 0.3;
        const auto r = check_S2(L, 2.0, SwitchingChain(Matrix::identity(2)));
        CHECK(r.value == doctest::Approx(0.6).epsilon(1e-15));
    }
    SUBCASE("asymmetric example uses lambda_ji") {
        const auto P = Matrix::from_rows({{0.9, 0.1}, {0.2, 0.8}});
        const auto L = Matrix::from_rows({{0.5, 2.0}, {0.1, 0.5}});
        // independent evaluation of max_i sum_j p_ij lambda_ji
        double best = 0.0;
        for (std::size_t i = 0; i < 2; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < 2; ++j) s += P(i, j) * L(j, i);
            best = std::max(best, s);
        }
        CHECK(best == doctest::Approx(0.8));
        const auto r = check_S2(L, 1.5, SwitchingChain(P));
        CHECK(r.value == doctest::Approx(1.5 * best).epsilon(1e-15));
        CHECK(r.value == doctest::Approx(1.2));
        CHECK_FALSE(r.ok);
    }
    CHECK_THROWS_AS(check_S2(Matrix(3, 3, 0.1), 2.0, SwitchingChain(kSym)), ValidationError);
    CHECK_THROWS_AS(check_S2(Matrix(2, 2, -0.1), 2.0, SwitchingChain(kSym)), ValidationError);
}

TEST_CASE("switching-count bound") {
    CHECK(switching_count_bound(0.5, 0.5, 0, 2, 1) == 0.5);
    CHECK(switching_count_bound(0.5, 0.5, 0, 2, 3) == 0.0);
    CHECK(switching_count_bound(0.5, 0.5, 0, 2, -1) == 0.0);
    CHECK(switching_count_bound(0.9, 0.9, 0, 10, 5) == 1.0);  // capped
    for (int k = 0; k <= 12; ++k) {
        CHECK(switching_count_bound(0.7, 0.4, 3, 12, k) == doctest::Approx(oracle::switch_bound(0.7, 0.4, 9, k)).epsilon(1e-13));
    }
    CHECK_THROWS_AS(switching_count_bound(0.5, 0.5, 3, 3, 0), ValidationError);
}

TEST_CASE("empirical switch law is dominated by the bound") {
    for (const auto& P : {kSym, Matrix::from_rows({{0.7, 0.3}, {0.4, 0.6}})}) {
        SwitchingChain c(P);
        const auto modes = simulate_modes(c, 12, 100000, 606);
        const auto law = empirical_switch_law(modes, 2, 12);
        REQUIRE(law.size() == 11);
        double total = 0.0;
        for (std::int64_t k = 0; k <= 10; ++k) {
            const auto& pt = law[static_cast<std::size_t>(k)];
            CHECK(pt.mean <= switching_count_bound(c, 2, 12, k) + 3 * pt.se);
            total += pt.mean;
        }
        CHECK(total == doctest::Approx(1.0));
        CHECK(switching_count_bound(c, 2, 12, 11) == 0.0);
    }
}

TEST_CASE("simulate_switched") {
    SUBCASE("single contracting mode") {
        SwitchedSystem sys{{ModeMap::linear(Matrix::from_rows({{0.5}}))}, SwitchingChain(Matrix::identity(1))};
        const auto sb = simulate_switched(sys, {1.0}, 40, 3, 1);
        for (const auto& p : sb.batch.paths) {
            for (std::size_t t = 0; t < p.states.size(); ++t) CHECK(p.states[t].x[0] == std::ldexp(1.0, -static_cast<int>(t)));
        }
    }
    SUBCASE("identical maps make the state law independent of switching") {
        const auto A = scaled_rotation(0.8, 0.3);
        SwitchedSystem s1{{ModeMap::linear(A), ModeMap::linear(A)}, SwitchingChain(kSym)};
        SwitchedSystem s2{{ModeMap::linear(A), ModeMap::linear(A)},
                          SwitchingChain(Matrix::from_rows({{0.1, 0.9}, {0.7, 0.3}}))};
        const auto a = simulate_switched(s1, {1.0, 2.0}, 30, 20, 5);
        const auto b = simulate_switched(s2, {1.0, 2.0}, 30, 20, 5);
        for (std::size_t j = 0; j < 20; ++j) {
            for (std::size_t t = 0; t <= 30; ++t) CHECK(a.batch.paths[j].states[t].x == b.batch.paths[j].states[t].x);
        }
    }
    SUBCASE("scaled rotations halve the norm exactly") {
        SwitchedSystem sys{{ModeMap::linear(scaled_rotation(0.5, 0.4)), ModeMap::linear(scaled_rotation(0.5, 2.1))},
                           SwitchingChain(kSym)};
        const auto sb = simulate_switched(sys, {3.0, 4.0}, 60, 50, 6);
        for (std::size_t j = 0; j < 50; ++j) {
            for (std::size_t t = 0; t <= 60; ++t) {
                const double expect = 5.0 * std::pow(0.5, static_cast<double>(t));
                CHECK(norm(sb.batch.paths[j].states[t].x) == doctest::Approx(expect).epsilon(1e-12));
                CHECK(static_cast<double>(sb.log_norm[j][t]) ==
                      doctest::Approx(std::log(5.0) + static_cast<double>(t) * std::log(0.5)).epsilon(1e-12));
            }
        }
    }
    SUBCASE("switch counts agree with a post-hoc scan") {
        const auto sys = two_mode(Matrix::from_rows({{0.2, 0.8}, {0.8, 0.2}}));
        const auto sb = simulate_switched(sys, {1.0, 0.5}, 100, 200, 7);
        for (std::size_t j = 0; j < 200; ++j) {
            const auto& N = sb.switches[j];
            CHECK(N == count_switches(sb.batch.paths[j].mode));
            CHECK(N.front() == 0);
            for (std::size_t t = 1; t < N.size(); ++t) CHECK((N[t] - N[t - 1] == 0 || N[t] - N[t - 1] == 1));
            for (std::size_t t = 0; t < N.size(); ++t) CHECK(sb.batch.paths[j].states[t].site == sb.batch.paths[j].mode[t]);
        }
        // same stream layout as simulate_modes
        const auto modes = simulate_modes(sys.chain, 100, 200, 7);
        for (std::size_t j = 0; j < 200; ++j) CHECK(modes[j] == sb.batch.paths[j].mode);
    }
    SUBCASE("overflow is reported") {
        SwitchedSystem sys{{ModeMap::linear(Matrix::from_rows({{1e100}}))}, SwitchingChain(Matrix::identity(1))};
        const auto sb = simulate_switched(sys, {1.0}, 10, 2, 1);
        CHECK(sb.first_overflow == 4);
    }
    SUBCASE("errors") {
        const auto sys = two_mode(kSym);
        CHECK_THROWS_AS(simulate_switched(sys, {1.0}, 10, 2, 1), ValidationError);
        SwitchedSystem bad{{ModeMap::affine(Matrix::identity(1), {1.0}, {0.0})}, SwitchingChain(Matrix::identity(1))};
        CHECK_THROWS_AS(bad.validate(), ValidationError);
        SwitchedSystem mismatch{{ModeMap::linear(Matrix::identity(1))}, SwitchingChain(kSym)};
        CHECK_THROWS_AS(mismatch.validate(), ValidationError);
    }
}

TEST_CASE("joint kernel moves the pair") {
    const auto sys = two_mode(Matrix::from_rows({{1, 0}, {0, 1}}));
    const auto k = joint_kernel(sys);
    Rng rng(1);
    const State next = k->sample(0, joint_state(1, {1.0, 0.0}), rng);
    CHECK(next.site == 1);
    const Vec expect = sys.maps[1]({1.0, 0.0});
    CHECK(next.x == expect);
}

TEST_CASE("operator norm against a dense SVD") {
    for (const auto& A : {scaled_rotation(0.5, 0.7), rotation_diag(0.5, 0.25, 1.1),
                          Matrix::from_rows({{1, 2}, {3, 4}}), Matrix::from_rows({{0.2, -1.3}, {0.0, 0.4}})}) {
        CHECK(operator_norm(A) == doctest::Approx(eigen_norm(A)).epsilon(1e-10));
    }
}

TEST_CASE("Lyapunov family verification") {
    SUBCASE("V3 with plain norms and scaled rotations") {
        SwitchedSystem sys{{ModeMap::linear(scaled_rotation(0.5, 0.3)), ModeMap::linear(scaled_rotation(0.5, 1.9))},
                           SwitchingChain(kSym)};
        auto f = LyapunovFamily::weighted_norms({1.0, 1.0}, 1.0, ClassK::linear(1.0), ClassK::linear(1.0));
        f.lambda0 = 0.5;
        const auto rep = verify_lyapunov_family(f, sys);
        CHECK(rep.ok());
        CHECK(rep.item("V3").worst == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(std::abs(rep.item("V3").worst) <= 1e-12);
        CHECK_FALSE(rep.item("V3'").applicable);
    }
    SUBCASE("V2 follows the weight ratio") {
        const auto sys = two_mode(kSym);
        CHECK(verify_lyapunov_family(weighted(1.5, 0.5), sys).item("V2").ok);
        CHECK_FALSE(verify_lyapunov_family(weighted(1.4, 0.5), sys).item("V2").ok);
    }
    SUBCASE("V1 bounds") {
        const auto sys = two_mode(kSym);
        auto f = weighted(1.5, 0.5);
        f.alpha2 = ClassK::linear(1.2);
        CHECK_FALSE(verify_lyapunov_family(f, sys).item("V1").ok);
    }
    SUBCASE("V3 prime is certified exactly at the operator norm") {
        const auto sys = two_mode(kSym);
        auto f = weighted(1.5, 0.5);
        Matrix L(2, 2);
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j) L(i, j) = eigen_norm(*sys.maps[j].matrix()) * (1.0 + 1e-9);
        f.Lambda = L;
        CHECK(verify_lyapunov_family(f, sys).item("V3'").ok);
        Matrix low = L;
        low(0, 1) = eigen_norm(*sys.maps[1].matrix()) * 0.9;
        f.Lambda = low;
        const auto rep = verify_lyapunov_family(f, sys);
        CHECK_FALSE(rep.item("V3'").ok);
        CHECK(rep.item("V3'").mode_i == 0);
        CHECK(rep.item("V3'").mode_j == 1);
    }
    SUBCASE("mode count mismatch") {
        const auto sys = two_mode(kSym);
        auto f = LyapunovFamily::weighted_norms({1.0}, 1.0, ClassK::linear(1.0), ClassK::linear(1.0));
        CHECK_THROWS_AS(verify_lyapunov_family(f, sys), ValidationError);
    }
}

TEST_CASE("pathwise inequality") {
    SUBCASE("equality for scaled rotations") {
        SwitchedSystem sys{{ModeMap::linear(scaled_rotation(0.5, 0.3)), ModeMap::linear(scaled_rotation(0.5, 1.9))},
                           SwitchingChain(kSym)};
        auto f = LyapunovFamily::weighted_norms({1.0, 1.0}, 1.0, ClassK::linear(1.0), ClassK::linear(1.0));
        f.lambda0 = 0.5;
        const auto sb = simulate_switched(sys, {1.0, -2.0}, 80, 100, 8);
        const auto rep = pathwise_inequality_check(sb, f, sys);
        CHECK(rep.ok);
        CHECK(rep.precondition_ok);
        CHECK(std::abs(static_cast<double>(rep.worst_log_ratio)) <= 1e-9);
        CHECK(rep.checked == 100 * 81);
    }
    SUBCASE("single mode is tight with no switches") {
        SwitchedSystem sys{{ModeMap::linear(Matrix::from_rows({{0.5, 0}, {0, 0.5}}))}, SwitchingChain(Matrix::identity(1))};
        auto f = LyapunovFamily::weighted_norms({2.0}, 1.0, ClassK::linear(2.0), ClassK::linear(2.0));
        f.lambda0 = 0.5;
        const auto rep = pathwise_inequality_check(simulate_switched(sys, {1.0, 1.0}, 50, 5, 9), f, sys);
        CHECK(rep.ok);
        CHECK(std::abs(static_cast<double>(rep.worst_log_ratio)) <= 1e-12);
    }
    SUBCASE("weighted two-mode system has no violations") {
        const auto sys = two_mode(Matrix::from_rows({{0.2, 0.8}, {0.8, 0.2}}));
        const auto rep = pathwise_inequality_check(simulate_switched(sys, {1.0, 0.5}, 100, 1000, 10), weighted(1.5, 0.5), sys);
        CHECK(rep.ok);
        CHECK(rep.violations.empty());
        CHECK(rep.worst_log_ratio <= 1e-9L);
    }
    SUBCASE("failing preconditions are reported, not asserted") {
        const auto sys = two_mode(kSym);
        const auto sb = simulate_switched(sys, {1.0, 0.5}, 10, 10, 11);
        const auto rep = pathwise_inequality_check(sb, weighted(1.5, 0.3), sys);
        CHECK_FALSE(rep.precondition_ok);
        CHECK_FALSE(rep.ok);
        CHECK(rep.precondition.find("V3") != std::string::npos);
        auto no_lambda = weighted(1.5, 0.5);
        no_lambda.lambda0.reset();
        CHECK_FALSE(pathwise_inequality_check(sb, no_lambda, sys).precondition_ok);
    }
}

TEST_CASE("stability diagnostics") {
    SUBCASE("scaled rotation decays exactly") {
        SwitchedSystem sys{{ModeMap::linear(scaled_rotation(0.5, 0.3)), ModeMap::linear(scaled_rotation(0.5, 1.9))},
                           SwitchingChain(kSym)};
        auto f = LyapunovFamily::weighted_norms({1.0, 1.0}, 1.0, ClassK::linear(1.0), ClassK::linear(1.0));
        f.lambda0 = 0.5;
        const double a = 0.5;
        const auto rep = stability_diagnostics(simulate_switched(sys, {1.0, 0.0}, 100, 20, 12), f, sys, a);
        for (std::size_t t = 0; t <= 100; ++t) {
            CHECK(rep.discounted.per_time[t].mean ==
                  doctest::Approx(std::pow(std::exp(a) / 2.0, static_cast<double>(t))).epsilon(1e-10));
        }
        CHECK(rep.ok());
        CHECK_FALSE(rep.divergent);
    }
    SUBCASE("expanding map is flagged") {
        SwitchedSystem sys{{ModeMap::linear(Matrix::from_rows({{2.0}}))}, SwitchingChain(Matrix::identity(1))};
        auto f = LyapunovFamily::weighted_norms({1.0}, 1.0, ClassK::linear(1.0), ClassK::linear(1.0));
        f.lambda0 = 0.5;
        const auto rep = stability_diagnostics(simulate_switched(sys, {1.0}, 100, 10, 13), f, sys, 0.1);
        CHECK(rep.divergent);
        CHECK_FALSE(rep.ok());
        CHECK_FALSE(rep.as_ok);
    }
    SUBCASE("two-mode system with an S1 margin") {
        const auto P = Matrix::from_rows({{0.2, 0.8}, {0.8, 0.2}});
        const auto sys = two_mode(P);
        const auto lyap = weighted(1.5, 0.5);
        const auto s1 = check_S1(0.5, 1.5, sys.chain);
        CHECK(s1.value == doctest::Approx(0.7).epsilon(1e-15));
        const auto sb = simulate_switched(sys, {1.0, 0.5}, 100, 1000, 14);
        const auto rep = stability_diagnostics(sb, lyap, sys, s1.alpha_star);
        CHECK(rep.discounted_monotone);
        CHECK(rep.discounted_ratio <= 1e-6);
        CHECK(rep.as_ok);
        CHECK(rep.max_log_final_ratio <= std::log(1e-20L));
        CHECK(rep.envelope_ok);
        CHECK(rep.envelope_violations == 0);
        CHECK(rep.l1_ok);
        CHECK(rep.ok());
    }
}

TEST_CASE("supermartingale handoff on the joint space") {
    const auto P = Matrix::from_rows({{0.6, 0.4}, {0.4, 0.6}});
    SwitchedSystem sys{{ModeMap::linear(scaled_rotation(0.5, 0.7)), ModeMap::linear(scaled_rotation(0.5, 2.0))},
                       SwitchingChain(P)};
    const auto lyap = weighted(1.5, 0.5);
    const auto s1 = check_S1(0.5, 1.5, sys.chain);
    REQUIRE(s1.ok);
    const StateFn Vp = [&](const State& x) { return lyap.V_trunc(static_cast<std::size_t>(x.site), x.x); };
    const auto cert = Certificate::exponential(Vp, s1.alpha_star, Region::ball(0.0));
    const auto sb = simulate_switched(sys, {1.0, 0.5}, 60, 10000, 15);
    const auto r = verify_supermartingale_mc(sb.batch, cert, 0.99);
    CHECK(r.ok);
    CHECK(r.first_bound_ok);
}

TEST_CASE("smallest singular value against a dense SVD") {
    std::mt19937_64 gen(11);
    std::normal_distribution<double> g;
    for (std::size_t n : {1, 2, 3, 5}) {
        for (int rep = 0; rep < 20; ++rep) {
            Matrix A(n, n);
            for (auto& v : A.data) v = g(gen);
            CHECK(min_singular_value(A) == doctest::Approx(eigen_min_sv(A)).epsilon(1e-10));
        }
    }
    CHECK(min_singular_value(Matrix::from_rows({{1.0, 2.0}, {2.0, 4.0}})) <= 1e-15);
    CHECK(min_singular_value(Matrix::from_rows({{0.0, 0.0}, {0.0, 0.0}})) == 0.0);
    CHECK_THROWS_AS(min_singular_value(Matrix(2, 3)), ValidationError);
}

TEST_CASE("fixed point evidence") {
    const auto P = Matrix::from_rows({{0.2, 0.8}, {0.8, 0.2}});
    SUBCASE("contracting rotations have no nonzero fixed point") {
        const auto ev = fixed_point_search(two_mode(P));
        CHECK(ev.ok);
        REQUIRE(ev.min_ratio.size() == 2);
        CHECK(ev.exact[0]);
        // A - I for a scaled rotation is itself a scaled rotation: |s e^{i a} - 1|
        const double expected = std::abs(std::complex<double>(0.5 * std::cos(0.7) - 1.0, 0.5 * std::sin(0.7)));
        CHECK(ev.min_ratio[0] == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("a unit eigenvalue is detected") {
        const SwitchedSystem sys{{ModeMap::linear(Matrix::from_rows({{1.0, 0.0}, {0.0, 0.5}})),
                                  ModeMap::linear(scaled_rotation(0.5, 0.3))},
                                 SwitchingChain(P)};
        const auto ev = fixed_point_search(sys);
        CHECK_FALSE(ev.ok);
        CHECK(ev.min_ratio[0] <= 1e-15);
    }
    SUBCASE("nonlinear maps use the grid") {
        // f(x) = (2 - |x|) x fixes the unit circle
        const auto circle = ModeMap::custom(
            [](const Vec& x, const Vec&) {
                Vec y = x;
                const double s = 2.0 - norm(x);
                for (auto& v : y) v *= s;
                return y;
            },
            2, [](double r) { return 2.0 + 2.0 * r; });
        const SwitchedSystem sys{{circle, ModeMap::tanh(0.5, 2)}, SwitchingChain(P)};
        LogRadialGrid grid{0.5, 2.0, 3, 8};
        const auto ev = fixed_point_search(sys, grid);
        CHECK_FALSE(ev.exact[0]);
        CHECK_FALSE(ev.ok);
        CHECK(ev.min_ratio[0] <= 1e-12);
        CHECK(norm(ev.at[0]) == doctest::Approx(1.0));
        CHECK(ev.min_ratio[1] > 0.4);
        CHECK(ev.checked == 2 * grid.points(2).size());
    }
}

TEST_CASE("finitized stability definitions") {
    const auto P = Matrix::from_rows({{0.2, 0.8}, {0.8, 0.2}});
    const auto sys = two_mode(P);
    const auto lyap = weighted(1.5, 0.5);
    const double alpha = check_S1(0.5, 1.5, sys.chain).alpha_star;
    FinitizationOptions opt;
    opt.paths = 200;
    SUBCASE("stable system passes every instance") {
        const auto r = finite_stability_checks(sys, lyap, alpha, opt, 5);
        CHECK(r.ok());
        CHECK(r.a_prime == doctest::Approx(std::sqrt(0.7)));
        CHECK(r.cases.size() == opt.eps.size() * (2 + opt.radii.size()));
        for (const auto& c : r.cases) {
            CAPTURE(c.item);
            CAPTURE(c.eps);
            CHECK(c.applicable);
            if (c.item == "SM1") CHECK(c.delta == doctest::Approx(0.999 * c.eps / 1.5));
            if (c.item == "SM2") {
                // alpha2(r) a'^T = eps'
                CHECK(1.5 * c.r * std::pow(r.a_prime, c.T) == doctest::Approx(std::min(c.eps, 1.5 * c.r)));
            }
        }
    }
    SUBCASE("waiting times past the horizon are not applicable") {
        opt.horizon = 5;
        opt.eps = {1e-6};
        const auto r = finite_stability_checks(sys, lyap, alpha, opt, 5);
        for (const auto& c : r.cases) {
            if (c.item == "SM2") CHECK_FALSE(c.applicable);
        }
    }
    SUBCASE("expanding maps fail") {
        const SwitchedSystem grow{{ModeMap::linear(scaled_rotation(2.0, 0.1)), ModeMap::linear(scaled_rotation(2.0, 0.2))},
                                  SwitchingChain(P)};
        opt.horizon = 20;
        const auto r = finite_stability_checks(grow, lyap, 0.1, opt, 6);
        CHECK_FALSE(r.ok());
    }
    SUBCASE("without a condition value SM2 is not applicable") {
        auto bare = LyapunovFamily::weighted_norms({1.0, 1.5}, 1.5, ClassK::linear(1.0), ClassK::linear(1.5));
        const auto r = finite_stability_checks(sys, bare, alpha, opt, 7);
        CHECK(std::isnan(r.a_prime));
        for (const auto& c : r.cases) {
            if (c.item == "SM2") CHECK_FALSE(c.applicable);
        }
    }
    SUBCASE("validation") {
        opt.direction = {1.0};
        CHECK_THROWS_AS(finite_stability_checks(sys, lyap, alpha, opt, 1), ValidationError);
        opt.direction = {};
        opt.paths = 0;
        CHECK_THROWS_AS(finite_stability_checks(sys, lyap, alpha, opt, 1), ValidationError);
    }
}
