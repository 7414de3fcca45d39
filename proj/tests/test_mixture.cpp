#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "pspin/mixture.hpp"

using pspin::Mixture;

namespace {
Mixture sk() { return Mixture({{2, 1.0}}); }
Mixture mixed24() { return Mixture({{2, 0.5}, {4, 0.5}}); }
Mixture pure3() { return Mixture({{3, 1.0}}); }
} // namespace

TEST_CASE("polynomial evaluation and derivatives") {
    CHECK(sk().evaluate(1.0, 0) == 1.0);
    CHECK(sk().evaluate(0.5, 1) == 1.0); // xi'(r) = 2r
    CHECK(mixed24().evaluate(1.0, 0) == 1.0);
    CHECK(sk().evaluate(0.3, 2) == 2.0);
    CHECK(pure3().evaluate(0.5, 0) == Catch::Approx(0.125).margin(1e-15));
    CHECK(pure3().evaluate(0.5, 1) == Catch::Approx(0.75).margin(1e-15));
    CHECK(pure3().evaluate(0.5, 2) == Catch::Approx(3.0).margin(1e-15));
    CHECK_THROWS_AS(sk().evaluate(1.0, 3), std::invalid_argument);
    CHECK_THROWS_AS(sk().evaluate(1.0, -1), std::invalid_argument);
}

TEST_CASE("construction rejects bad coefficient maps") {
    CHECK_THROWS_AS(Mixture({{1, 1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(Mixture({{2, -0.5}}), std::invalid_argument);
    CHECK_THROWS_AS(Mixture({{2, 0.0}, {4, 0.0}}), std::invalid_argument);
    CHECK_THROWS_AS(Mixture(std::map<int, double>{}), std::invalid_argument);
}

TEST_CASE("normalize fixes xi(1) = 1 and is idempotent") {
    const auto m = Mixture({{2, 2.0}}).normalized();
    CHECK(m.coefficients().at(2) == 1.0);
    const auto m2 = Mixture({{2, 1.0}, {3, 1.0}}).normalized();
    CHECK(m2.coefficients().at(2) == Catch::Approx(0.5).margin(1e-15));
    CHECK(m2.coefficients().at(3) == Catch::Approx(0.5).margin(1e-15));
    const auto m3 = m2.normalized();
    CHECK(m3.coefficients() == m2.coefficients());
    CHECK(std::abs(m2(1.0) - 1.0) <= 1e-12);
}

TEST_CASE("convex dual: closed forms and grid-search oracle") {
    // xi = r^2: xi*(s) = s^2/4 for s >= 0
    CHECK(sk().dual(2.0) == Catch::Approx(1.0).margin(1e-12));
    CHECK(sk().dual(-1.0) == 0.0);
    CHECK(sk().dual(0.0) == 0.0);
    CHECK(sk().dual(sk().derivative(0.7)) == Catch::Approx(0.49).margin(1e-12));

    for (const auto& m : {sk(), mixed24(), pure3().normalized()}) {
        for (double s : {0.37, 1.0, 2.5}) {
            double best = 0.0;
            for (int i = 0; i <= 400000; ++i) {
                const double r = 4.0 * i / 400000.0;
                best = std::max(best, r * s - m(r));
            }
            CHECK(m.dual(s) == Catch::Approx(best).margin(1e-7));
            CHECK(m.dual(s) >= best - 1e-12); // grid can only undershoot the sup
        }
    }
}

TEST_CASE("duality identity xi*(xi'(s)) = s xi'(s) - xi(s) on [0,1]") {
    for (const auto& m : {sk(), mixed24(), pure3().normalized()}) {
        for (int i = 0; i < 100; ++i) {
            const double s = static_cast<double>(i) / 99.0;
            const double lhs = m.dual(m.derivative(s));
            const double rhs = s * m.derivative(s) - m(s);
            CHECK(std::abs(lhs - rhs) <= 1e-10);
        }
    }
}

TEST_CASE("Young inequality and lower bound xi*(s) >= s - xi(1)") {
    for (const auto& m : {sk(), mixed24(), pure3().normalized()}) {
        for (int i = 0; i <= 40; ++i)
            for (int j = -10; j <= 40; ++j) {
                const double r = 0.1 * i;
                const double s = 0.1 * j;
                CHECK(r * s <= m(r) + m.dual(s) + 1e-10);
            }
        for (int j = -10; j <= 60; ++j) {
            const double s = 0.1 * j;
            CHECK(m.dual(s) >= s - m(1.0) - 1e-12);
        }
    }
}

TEST_CASE("xi* is nondecreasing and convex on a grid") {
    for (const auto& m : {sk(), mixed24(), pure3().normalized()}) {
        const int n = 200;
        std::vector<double> vals(n + 1);
        for (int i = 0; i <= n; ++i) vals[i] = m.dual(3.0 * i / n);
        for (int i = 0; i < n; ++i) CHECK(vals[i + 1] >= vals[i] - 1e-12);
        for (int i = 1; i < n; ++i)
            CHECK(vals[i + 1] - 2.0 * vals[i] + vals[i - 1] >= -1e-8);
    }
}

TEST_CASE("even-degree detection") {
    CHECK(sk().even());
    CHECK(mixed24().even());
    CHECK_FALSE(pure3().even());
    CHECK_FALSE(Mixture({{2, 0.5}, {3, 0.5}}).even());
}
