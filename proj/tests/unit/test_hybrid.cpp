#include "hybstab/hybrid/hybrid.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace hybstab;

namespace {

Trajectory path_of(std::initializer_list<std::int64_t> sites) {
    Trajectory p;
    for (auto s : sites) p.states.push_back(site_state(s));
    return p;
}

// site 0 is K
const Region kK0 = Region::finite_set({0});

}  // namespace

TEST_CASE("regions") {
    CHECK(Region::ball(1.0).contains(real_state({0.6, 0.8})));
    CHECK_FALSE(Region::ball(1.0).contains(real_state({0.8, 0.8})));
    CHECK(Region::ball(1.0, {2.0}).contains(real_state({2.5})));
    CHECK(Region::ball(1.0).contains(joint_state(3, {0.5})));
    CHECK(Region::everything().contains(site_state(-4)));
    CHECK_FALSE(Region::nothing().contains(site_state(0)));
    CHECK(Region::predicate_table({false, true}).contains(site_state(1)));
    CHECK_THROWS_AS((void)Region::predicate_table({false}).contains(site_state(2)), DomainError);
    CHECK_THROWS_AS(Region::ball(-1.0), ValidationError);
    CHECK(Region::finite_set({1, 2}).enumerate()->size() == 2);
    CHECK_FALSE(Region::ball(1.0).enumerate());
    CHECK(Region::nothing().empty_set());
}

TEST_CASE("excursion_decompose") {
    SUBCASE("pattern out,out,in,out,in") {
        const auto rec = excursion_decompose(path_of({1, 1, 0, 1, 0}), kK0);
        CHECK(rec.g[0] == ExtTime::neg_inf());
        CHECK(rec.g[1] == ExtTime::neg_inf());
        CHECK(rec.g[2] == ExtTime::at(2));
        CHECK(rec.g[3] == ExtTime::at(2));
        CHECK(rec.g[4] == ExtTime::at(4));
        CHECK(rec.tau == std::vector<Time>{2, 4});
        REQUIRE(rec.sigma.size() == 2);
        CHECK(rec.sigma[0] == ExtTime::at(3));
        CHECK(rec.sigma[1] == ExtTime::pos_inf());
        CHECK(rec.h[0] == ExtTime::at(2));
        CHECK(rec.h[3] == ExtTime::at(4));
    }
    SUBCASE("entirely inside") {
        const auto rec = excursion_decompose(path_of({0, 0, 0, 0}), kK0);
        for (std::size_t t = 0; t < 4; ++t) {
            CHECK(rec.g[t] == ExtTime::at(static_cast<Time>(t)));
            CHECK(rec.h[t] == ExtTime::at(static_cast<Time>(t)));
        }
        // start in K opens a synthetic interval at time 0
        CHECK(rec.tau == std::vector<Time>{0});
        CHECK(rec.sigma == std::vector<ExtTime>{ExtTime::pos_inf()});
    }
    SUBCASE("never inside") {
        const auto rec = excursion_decompose(path_of({1, 2, 1}), kK0);
        for (std::size_t t = 0; t < 3; ++t) {
            CHECK(rec.g[t] == ExtTime::neg_inf());
            CHECK(rec.h[t] == ExtTime::pos_inf());
        }
        CHECK(rec.tau.empty());
        CHECK(rec.sigma.empty());
    }
}

TEST_CASE("first_hit_time") {
    CHECK(first_hit_time(path_of({1, 0, 1}), kK0) == ExtTime::at(1));
    CHECK(first_hit_time(path_of({0, 1, 1, 2}), kK0) == ExtTime::pos_inf());
    CHECK(first_hit_time(path_of({1, 1, 0, 1}), kK0) == ExtTime::at(2));
    CHECK(first_hit_time(path_of({0, 0}), kK0) == ExtTime::at(1));
}

TEST_CASE("local clock resets at each exit") {
    const auto p = path_of({1, 1, 0, 1, 1, 0, 0, 1});
    const auto clock = local_clock(excursion_decompose(p, kK0), p, kK0);
    CHECK(clock[0] == Time{0});
    CHECK(clock[1] == Time{1});
    CHECK_FALSE(clock[2]);
    CHECK(clock[3] == Time{0});
    CHECK(clock[4] == Time{1});
    CHECK_FALSE(clock[5]);
    CHECK(clock[7] == Time{0});
}

TEST_CASE("excursion CSV sentinels") {
    std::vector<ExcursionRecord> recs{excursion_decompose(path_of({1, 0, 1}), kK0)};
    std::ostringstream ex, gh;
    write_excursions_csv(ex, recs);
    write_gh_csv(gh, recs);
    CHECK(ex.str() == "path_id,i,tau_i,sigma_i\n0,1,1,2\n");
    CHECK(gh.str() == "path_id,t,g_t,h_t\n0,0,-inf,1\n0,1,1,1\n0,2,1,+inf\n");
}

TEST_CASE("degenerate K reproduces the single-kernel simulations") {
    auto Y = std::make_shared<BiasedWalkKernel>(std::vector<double>{0.4});
    auto Z = std::make_shared<BiasedWalkKernel>(std::vector<double>{0.25, 0.1, 0.1});
    SUBCASE("K = everything is a Y simulation") {
        HybridSpec spec{Y, Z, Region::everything()};
        const auto h = simulate_hybrid(spec, site_state(5), 60, 100, 77);
        const auto y = simulate_batch(*Y, site_state(5), 60, 100, 77);
        for (std::size_t j = 0; j < h.size(); ++j) CHECK(h.paths[j].states == y.paths[j].states);
    }
    SUBCASE("K = empty is a Z simulation with a clock that never resets") {
        HybridSpec spec{Y, Z, Region::nothing()};
        const auto h = simulate_hybrid(spec, site_state(5), 60, 100, 78);
        const auto z = simulate_batch(*Z, site_state(5), 60, 100, 78);
        for (std::size_t j = 0; j < h.size(); ++j) CHECK(h.paths[j].states == z.paths[j].states);
    }
}

TEST_CASE("hybrid spec validation") {
    auto Y = std::make_shared<BiasedWalkKernel>(std::vector<double>{0.4});
    auto Zi = std::make_shared<BiasedWalkKernel>(std::vector<double>{0.25, 0.1});
    auto F = std::make_shared<FiniteKernel>(std::vector<std::string>{"a"}, Matrix::identity(1));
    CHECK_THROWS_AS(HybridSpec({Zi, Y, kK0}).validate(), ValidationError);
    CHECK_THROWS_AS(HybridSpec({Y, F, kK0}).validate(), ValidationError);
    CHECK_THROWS_AS(HybridSpec({Y, nullptr, kK0}).validate(), ValidationError);
    HybridSpec ok{Y, Zi, kK0};
    CHECK_THROWS_AS(simulate_hybrid(ok, site_state(0), 5, 0, 1), ValidationError);
    // explicit Z family too short for a long excursion
    auto Zshort = std::make_shared<FiniteKernel>(std::vector<std::string>{"in", "out"},
                                                 std::vector<Matrix>{Matrix::from_rows({{1, 0}, {0, 1}})},
                                                 FiniteKernel::Extent::explicit_);
    auto Yf = std::make_shared<FiniteKernel>(std::vector<std::string>{"in", "out"}, Matrix::identity(2));
    HybridSpec shortspec{Yf, Zshort, kK0};
    CHECK_THROWS_AS(simulate_hybrid(shortspec, site_state(1), 5, 1, 1), HorizonError);
}

TEST_CASE("two-state long-run fraction in K matches 0.6 / 0.9") {
    // states: 0 = in, 1 = out
    auto Y = std::make_shared<FiniteKernel>(std::vector<std::string>{"in", "out"},
                                            Matrix::from_rows({{0.7, 0.3}, {0.5, 0.5}}));
    auto Z = std::make_shared<FiniteKernel>(std::vector<std::string>{"in", "out"},
                                            Matrix::from_rows({{0.5, 0.5}, {0.6, 0.4}}));
    HybridSpec spec{Y, Z, kK0};
    const Time T = 2000;
    const auto b = simulate_hybrid(spec, site_state(0), T, 2000, 31);
    std::vector<double> frac(b.size());
    for (std::size_t j = 0; j < b.size(); ++j) {
        double in = 0;
        for (Time t = 100; t <= T; ++t) in += b.paths[j].states[static_cast<std::size_t>(t)].site == 0;
        frac[j] = in / static_cast<double>(T - 99);
    }
    const auto s = summarize(frac);
    CHECK(std::abs(s.mean - 0.6 / 0.9) <= 3 * s.se);
}

TEST_CASE("partition and regime consistency on simulated paths") {
    auto Y = std::make_shared<BiasedWalkKernel>(std::vector<double>{0.4});
    auto Z = std::make_shared<BiasedWalkKernel>(std::vector<double>{0.25, 0.1, 0.1});
    const Region K = Region::finite_set({0, 1, 2, 3});
    HybridSpec spec{Y, Z, K};
    for (std::int64_t x0 : {0, 3, 6}) {
        const auto b = simulate_hybrid(spec, site_state(x0), 300, 200, 900 + static_cast<std::uint64_t>(x0));
        for (const auto& p : b.paths) {
            const auto rec = excursion_decompose(p, K);
            REQUIRE(rec.tau.size() == rec.sigma.size());
            std::vector<bool> covered(p.states.size(), false);
            for (std::size_t i = 0; i < rec.tau.size(); ++i) {
                const Time end = rec.sigma[i].is_finite() ? rec.sigma[i].value : p.horizon() + 1;
                CHECK(rec.tau[i] < end);
                if (i > 0) CHECK(rec.sigma[i - 1].value < rec.tau[i]);
                for (Time t = rec.tau[i]; t < end; ++t) covered[static_cast<std::size_t>(t)] = true;
            }
            for (std::size_t t = 0; t < p.states.size(); ++t) {
                const bool in = K.contains(p.states[t]);
                CHECK(covered[t] == in);
                CHECK((rec.g[t] == ExtTime::at(static_cast<Time>(t))) == in);
                CHECK(rec.g[t] <= ExtTime::at(static_cast<Time>(t)));
                CHECK(ExtTime::at(static_cast<Time>(t)) <= rec.h[t]);
                CHECK(p.mode[t] == static_cast<int>(in ? Regime::inside : Regime::outside));
                if (t > 0 && p.mode[t] != p.mode[t - 1]) {
                    const Time tt = static_cast<Time>(t);
                    bool at_boundary = false;
                    for (std::size_t i = 0; i < rec.tau.size(); ++i) {
                        at_boundary = at_boundary || rec.tau[i] == tt || rec.sigma[i] == ExtTime::at(tt);
                    }
                    CHECK(at_boundary);
                }
            }
        }
    }
}

TEST_CASE("Markov failure on a crafted three-state example") {
    // 0 = K; excursions start at 1. The law out of 1 depends on whether the
    // excursion has just started, which the current state does not reveal.
    auto Y = std::make_shared<FiniteKernel>(std::vector<std::string>{"k", "u", "v"},
                                            Matrix::from_rows({{0.5, 0.5, 0}, {1, 0, 0}, {1, 0, 0}}));
    const auto fresh = Matrix::from_rows({{1, 0, 0}, {0.5, 0.5, 0}, {1, 0, 0}});
    const auto later = Matrix::from_rows({{1, 0, 0}, {0.1, 0.1, 0.8}, {0.2, 0.8, 0}});
    auto Z = std::make_shared<FiniteKernel>(std::vector<std::string>{"k", "u", "v"},
                                            [=](Time t) { return t == 0 ? fresh : later; }, std::nullopt);
    HybridSpec spec{Y, Z, kK0};
    const auto b = simulate_hybrid(spec, site_state(0), 200, 2000, 4242);
    std::vector<std::vector<std::optional<Time>>> clocks;
    for (const auto& p : b.paths) clocks.push_back(local_clock(excursion_decompose(p, kK0), p, kK0));
    const auto test = markov_failure_test(
        b, site_state(1), 2,
        [&](std::size_t j, Time t) {
            const auto& c = clocks[j][static_cast<std::size_t>(t)];
            return c ? (*c == 0 ? 0 : 1) : -1;
        },
        0.99);
    CHECK(test.markov_rejected);
    CHECK(test.statistic > test.critical);
    CHECK(test.dof >= 1.0);

    SUBCASE("a homogeneous chain is not rejected") {
        auto M = std::make_shared<FiniteKernel>(std::vector<std::string>{"k", "u", "v"}, later);
        HybridSpec homog{Y, M, kK0};
        const auto hb = simulate_hybrid(homog, site_state(0), 200, 2000, 4243);
        const auto ht = markov_failure_by_clock(hb, kK0, site_state(1), 2, 0.99);
        CHECK_FALSE(ht.markov_rejected);
    }
}
