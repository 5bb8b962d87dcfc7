#include "hybstab/core/class_k.hpp"
#include "hybstab/core/parallel.hpp"
#include "hybstab/core/rng.hpp"
#include "hybstab/core/stats.hpp"
#include "hybstab/core/types.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace hybstab;

TEST_CASE("child seeds are deterministic and distinct") {
    CHECK(child_seed(7, 3) == child_seed(7, 3));
    CHECK(child_seed(7, 3) != child_seed(7, 4));
    CHECK(child_seed(7, 3) != child_seed(8, 3));
    Rng a(child_seed(1, 0)), b(child_seed(1, 0));
    for (int i = 0; i < 10; ++i) CHECK(a.uniform() == b.uniform());
}

TEST_CASE("uniform draws lie in [0, 1)") {
    Rng rng(42);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("summarize") {
    SUBCASE("constant sample has zero SE") {
        std::vector<double> v(50, 2.5);
        const auto s = summarize(v);
        CHECK(s.mean == 2.5);
        CHECK(s.se == 0.0);
        CHECK(s.count == 50);
    }
    SUBCASE("known sample") {
        std::vector<double> v{1, 2, 3, 4};
        const auto s = summarize(v);
        CHECK(s.mean == doctest::Approx(2.5));
        // sample sd = sqrt(5/3)
        CHECK(s.se == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
    }
    SUBCASE("single value") {
        std::vector<double> v{3.0};
        CHECK(summarize(v).se == 0.0);
    }
}

TEST_CASE("quantiles") {
    CHECK(normal_quantile(0.99) == doctest::Approx(2.3263478740).epsilon(1e-9));
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0));
    CHECK(chi_square_critical(2, 0.99) == doctest::Approx(9.2103403720).epsilon(1e-9));
    CHECK(chi_square_critical(1, 0.95) == doctest::Approx(3.8414588207).epsilon(1e-9));
}

TEST_CASE("ExtTime ordering and strings") {
    CHECK(ExtTime::neg_inf() < ExtTime::at(-1000));
    CHECK(ExtTime::at(5) < ExtTime::pos_inf());
    CHECK(ExtTime::at(2) < ExtTime::at(3));
    CHECK_FALSE(ExtTime::pos_inf() < ExtTime::pos_inf());
    CHECK(ExtTime::neg_inf().str() == "-inf");
    CHECK(ExtTime::pos_inf().str() == "+inf");
    CHECK(ExtTime::at(12).str() == "12");
}

TEST_CASE("Matrix helpers") {
    const auto m = Matrix::from_rows({{1, 2}, {3, 4}});
    CHECK(m(1, 0) == 3.0);
    CHECK(m.apply({1, 1}) == Vec{3, 7});
    CHECK(Matrix::identity(2).apply({5, -1}) == Vec{5, -1});
    CHECK(norm({3, 4}) == 5.0);
    CHECK(dot({1, 2}, {3, 4}) == 11.0);
}

TEST_CASE("class-K functions") {
    const auto lin = ClassK::linear(2.0);
    CHECK(lin(0.0) == 0.0);
    CHECK(lin(3.0) == 6.0);
    CHECK(lin.inverse(6.0) == doctest::Approx(3.0));
    const auto pw = ClassK::power(1.5, 2.0);
    CHECK(pw(2.0) == doctest::Approx(6.0));
    CHECK(pw.inverse(6.0) == doctest::Approx(2.0));
    const auto sat = ClassK::saturating(1.0);
    CHECK(sat(1.0) == doctest::Approx(0.5));
    CHECK_FALSE(sat.unbounded());
    CHECK(std::isinf(sat.inverse(2.0)));
    CHECK(lin.sampled_monotone(100.0));
    CHECK(pw.sampled_monotone(100.0));
    CHECK(sat.sampled_monotone(100.0));
    CHECK_THROWS_AS(ClassK::linear(0.0), ValidationError);
    CHECK_THROWS_AS(ClassK::power(1.0, -1.0), ValidationError);
}

TEST_CASE("parallel_for fills every slot") {
    for (unsigned w : {1u, 3u}) {
        set_worker_count(w);
        std::vector<int> out(1000, 0);
        parallel_for(out.size(), [&](std::size_t i) { out[i] = static_cast<int>(i * 2); });
        for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == static_cast<int>(i * 2));
    }
    set_worker_count(0);
}

TEST_CASE("ValidationError carries the field path") {
    ValidationError e("chain.matrix.row[1]", "row sums to 0.9");
    CHECK(e.field() == "chain.matrix.row[1]");
    CHECK(std::string(e.what()) == "chain.matrix.row[1]: row sums to 0.9");
}
