#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pspin/initial_condition.hpp"
#include "pspin/quadrature.hpp"
#include "pspin/rng.hpp"
#include "support/oracles.hpp"

using namespace pspin;

namespace {

const SingleSiteLaw& ising() {
    static const SingleSiteLaw law = SingleSiteLaw::ising();
    return law;
}

// psi(delta_q) = q - E log cosh(sqrt(2q) Z) by a single Gauss-Hermite rule
double psi_dirac_oracle(double q, int nodes = 200) {
    const auto gh = gauss_hermite(nodes);
    double acc = 0.0;
    for (int i = 0; i < nodes; ++i)
        acc += gh.weights[i] * std::log(std::cosh(std::sqrt(2.0 * q) * gh.nodes[i]));
    return q - acc;
}

double golden_free_psi_spherical_grid(const DiscreteMeasure& mu, double q, int points) {
    // dense grid search over b as an independent check of the golden section
    const auto pieces = detail::spherical_pieces(mu, q);
    double best = std::numeric_limits<double>::infinity();
    const double lo = pieces.c0 + 1e-9, hi = pieces.c0 + 40.0;
    for (int i = 0; i <= points; ++i) {
        const double b = lo + (hi - lo) * i / points;
        best = std::min(best, detail::spherical_value_at(pieces, b));
    }
    return -best;
}

} // namespace

TEST_CASE("single-site law validation") {
    CHECK_THROWS_AS(SingleSiteLaw::make({-2.0, 1.0}, {0.5, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(SingleSiteLaw::make({0.5}, {0.9}), std::invalid_argument);
    CHECK_THROWS_AS(SingleSiteLaw::make({}, {}), std::invalid_argument);
    const auto law = SingleSiteLaw::ising();
    CHECK(law.atoms == std::vector<double>{-1.0, 1.0});
}

TEST_CASE("field grid validation and defaults") {
    CHECK_THROWS_AS(FieldGrid(1.0, 4, 1e-4), std::invalid_argument); // even node count
    CHECK_THROWS_AS(FieldGrid(0.0, 5, 1e-4), std::invalid_argument);
    CHECK_THROWS_AS(FieldGrid(1.0, 5, 0.0), std::invalid_argument);
    const auto g = FieldGrid::for_qmax(0.5);
    CHECK(g.nodes == 2049);
    CHECK(g.half_width == Catch::Approx(4.5 + 6.0).margin(1e-12));
}

TEST_CASE("cascade evaluator against quadrature oracles") {
    CHECK(psi_product(ising(), dirac(0.0)) == 0.0);

    for (double q : {0.2, 0.5, 1.0}) {
        const double grid = psi_product(ising(), dirac(q));
        CHECK(grid == Catch::Approx(psi_dirac_oracle(q)).margin(1e-9));
    }

    const auto mu2 = canonicalize({0.2, 0.6}, {0.5, 0.5});
    CHECK(psi_product(ising(), mu2) ==
          Catch::Approx(oracles::psi_ising_nested_gh(mu2, 120)).margin(1e-4));

    const auto mu2b = canonicalize({0.1, 0.9}, {0.3, 0.7});
    CHECK(psi_product(ising(), mu2b) ==
          Catch::Approx(oracles::psi_ising_nested_gh(mu2b, 120)).margin(1e-4));

    const auto mu3 = canonicalize({0.25, 0.5, 1.0}, {0.3, 0.3, 0.4});
    CHECK(psi_product(ising(), mu3) ==
          Catch::Approx(oracles::psi_ising_nested_gh(mu3, 80)).margin(1e-4));
}

TEST_CASE("cascade evaluator for a non-Ising product law") {
    // three-point spin law; oracle by direct nested quadrature at one atom
    const auto law = SingleSiteLaw::make({-1.0, 0.0, 1.0}, {0.25, 0.5, 0.25});
    const double q = 0.4;
    const auto gh = gauss_hermite(200);
    double acc = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double x = std::sqrt(2.0 * q) * gh.nodes[i];
        double inner = 0.0;
        for (std::size_t j = 0; j < law.atoms.size(); ++j)
            inner += law.probs[j] * std::exp(x * law.atoms[j] - q * law.atoms[j] * law.atoms[j]);
        acc += gh.weights[i] * std::log(inner);
    }
    CHECK(psi_product(law, dirac(q)) == Catch::Approx(-acc).margin(1e-9));
}

TEST_CASE("repetition invariance through the level representation") {
    const auto grid = FieldGrid::for_qmax(0.3);
    const double split = psi_product_levels(ising(), {0.0, 0.4, 1.0}, {0.3, 0.3}, grid);
    const double merged = psi_product(ising(), dirac(0.3), grid);
    CHECK(std::abs(split - merged) <= 1e-10);

    // split an interior atom of a 2-atom measure
    const auto grid2 = FieldGrid::for_qmax(0.7);
    const double split2 =
        psi_product_levels(ising(), {0.0, 0.2, 0.5, 1.0}, {0.3, 0.3, 0.7}, grid2);
    const double merged2 =
        psi_product(ising(), canonicalize({0.3, 0.7}, {0.5, 0.5}), grid2);
    CHECK(std::abs(split2 - merged2) <= 1e-10);
}

TEST_CASE("grid too small raises an accuracy error") {
    CHECK_THROWS_AS(psi_product(ising(), dirac(1.0), FieldGrid(1.5, 257, 1e-4)),
                    std::runtime_error);
}

TEST_CASE("Parisi PDE route") {
    CHECK(psi_ising_pde(to_cdf(dirac(0.0)), 0.0, FieldGrid::for_qmax(0.0)) == 0.0);

    const double pde = psi_ising_pde(to_cdf(dirac(0.5)), 0.5, FieldGrid::for_qmax(0.5));
    CHECK(pde == Catch::Approx(psi_product(ising(), dirac(0.5))).margin(1e-3));

    CHECK_THROWS_AS(psi_ising_pde(to_cdf(dirac(0.5)), 0.4, FieldGrid::for_qmax(0.4)),
                    std::invalid_argument); // cdf(q_max) < 1
}

TEST_CASE("PDE accepts continuous inputs: uniform law on [0, 1/2]") {
    const MeasureCDF uniform({0.0, 0.5}, {0.0, 1.0}, MeasureCDF::Interp::linear);
    const double pde = psi_ising_pde(uniform, 0.5, FieldGrid::for_qmax(0.5));
    CHECK(std::isfinite(pde));

    // 64-atom equal-weight discretization at interval midpoints
    const int n = 64;
    std::vector<double> atoms(n), weights(n, 1.0);
    for (int i = 0; i < n; ++i) atoms[i] = 0.5 * (i + 0.5) / n;
    const auto discrete = canonicalize(atoms, weights);
    const double approx = psi_product(ising(), discrete, FieldGrid::for_qmax(0.5));
    // Lipschitz consistency: |psi(unif) - psi(discrete)| <= w1 + tolerance,
    // with w1(uniform, midpoint discretization) = n * (len/2)^2 / len... = len/(4n)
    const double w1_bound = 0.5 / (4.0 * n);
    CHECK(std::abs(pde - approx) <= w1_bound + 5e-3);
}

TEST_CASE("psi is Lipschitz wrt W1, monotone and nonnegative (Ising)") {
    Rng rng(101);
    for (int trial = 0; trial < 12; ++trial) {
        const auto mu = oracles::random_measure(rng, 4, 1.0);
        const auto nu = oracles::random_measure(rng, 4, 1.0);
        const double pm = psi_product(ising(), mu);
        const double pn = psi_product(ising(), nu);
        CHECK(std::abs(pm - pn) <= w1(mu, nu) + 1e-6);
        CHECK(pm >= -1e-8);

        // bump one atom upward
        auto atoms = mu.atoms;
        const std::size_t j = trial % atoms.size();
        atoms[j] += 1e-3;
        const double bumped = psi_product(ising(), canonicalize(atoms, mu.weights));
        CHECK((bumped - pm) / 1e-3 >= -1e-8);
    }
}

TEST_CASE("spherical formula: exact values and objective") {
    CHECK(std::abs(psi_spherical(dirac(0.0))) <= 1e-10);

    CHECK(spherical_objective(dirac(0.0), 0.0, 1.0) == 0.0);
    CHECK(spherical_objective(dirac(0.0), 0.0, std::exp(1.0)) ==
          Catch::Approx(0.5 * (std::exp(1.0) - 2.0)).margin(1e-12));

    // single-piece case c(s) = 2(1-s): closed form and Simpson quadrature
    const double closed = 0.5 * std::log(3.0) + 0.5 * (3.0 - 1.0 - std::log(3.0)) - 1.0;
    CHECK(spherical_objective(dirac(0.0), 1.0, 3.0) == Catch::Approx(closed).margin(1e-12));
    double simpson = 0.0;
    const int n = 2000;
    for (int i = 0; i < n; ++i) {
        const double a = static_cast<double>(i) / n, b = static_cast<double>(i + 1) / n;
        auto f = [](double s) { return 1.0 / (3.0 - 2.0 * (1.0 - s)); };
        simpson += (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
    }
    CHECK(spherical_objective(dirac(0.0), 1.0, 3.0) ==
          Catch::Approx(simpson + 0.5 * (2.0 - std::log(3.0)) - 1.0).margin(1e-10));

    CHECK_THROWS_AS(spherical_objective(dirac(0.0), 1.0, 1.9), std::invalid_argument);
    CHECK_THROWS_AS(spherical_objective(dirac(0.5), 0.2, 3.0), std::invalid_argument);

    // delta_q: c = 0 below the atom, psi = -(inf_b [q/b + (b-1-log b)/2] - q);
    // the infimum has the closed form b* = (1 + sqrt(1+8q))/2
    for (double q : {0.25, 0.5, 1.0}) {
        const double b_star = 0.5 * (1.0 + std::sqrt(1.0 + 8.0 * q));
        const double inf_val = q / b_star + 0.5 * (b_star - 1.0 - std::log(b_star));
        CHECK(psi_spherical(dirac(q)) == Catch::Approx(q - inf_val).margin(1e-10));
    }
    // direct Laplace evaluation for the sphere: q - sup_u [sqrt(2q)u + log(1-u^2)/2]
    const double q = 0.5;
    double sup = 0.0;
    for (int i = 0; i < 2000000; ++i) {
        const double u = static_cast<double>(i) / 2000000.0;
        sup = std::max(sup, std::sqrt(2.0 * q) * u + 0.5 * std::log1p(-u * u));
    }
    CHECK(psi_spherical(dirac(q)) == Catch::Approx(q - sup).margin(1e-7));
}

TEST_CASE("spherical golden section matches dense grid search") {
    Rng rng(211);
    for (int trial = 0; trial < 8; ++trial) {
        const auto mu = oracles::random_measure(rng, 4, 1.5);
        const double golden = psi_spherical(mu);
        const double grid = golden_free_psi_spherical_grid(mu, mu.max_atom(), 4000000);
        CHECK(std::abs(golden - grid) <= 1e-7);
    }
}

TEST_CASE("spherical value does not depend on the choice of q") {
    Rng rng(307);
    for (int trial = 0; trial < 10; ++trial) {
        const auto mu = oracles::random_measure(rng, 4, 1.5);
        const double at_max = psi_spherical(mu);
        const double extended = psi_spherical(mu, mu.max_atom() + 1.0);
        CHECK(std::abs(at_max - extended) <= 1e-8);
    }
}

TEST_CASE("spherical psi is Lipschitz, monotone and nonnegative") {
    Rng rng(401);
    for (int trial = 0; trial < 15; ++trial) {
        const auto mu = oracles::random_measure(rng, 4, 1.0);
        const auto nu = oracles::random_measure(rng, 4, 1.0);
        const double pm = psi_spherical(mu), pn = psi_spherical(nu);
        CHECK(std::abs(pm - pn) <= w1(mu, nu) + 1e-6);
        CHECK(pm >= -1e-8);
        auto atoms = mu.atoms;
        atoms[trial % atoms.size()] += 1e-3;
        const double bumped = psi_spherical(canonicalize(atoms, mu.weights));
        CHECK((bumped - pm) / 1e-3 >= -1e-8);
    }
}

TEST_CASE("PDE and cascade agree on small measures") {
    Rng rng(503);
    for (int trial = 0; trial < 6; ++trial) {
        const auto mu = oracles::random_measure(rng, 3, 1.0);
        const double a = psi_ising_pde(to_cdf(mu), mu.max_atom(), FieldGrid::for_qmax(mu.max_atom()));
        const double b = psi_product(ising(), mu);
        CHECK(std::abs(a - b) <= 1e-3);
    }
}
