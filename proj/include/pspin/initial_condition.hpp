#ifndef PSPIN_INITIAL_CONDITION_HPP
#define PSPIN_INITIAL_CONDITION_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pspin/measures.hpp"
#include "pspin/quadrature.hpp"

namespace pspin {

// Law of a single spin under a product reference measure. Support must stay
// in [-1,1] so that the N-fold product lives in the ball |sigma|^2 <= N.
struct SingleSiteLaw {
    std::vector<double> atoms;
    std::vector<double> probs;

    static SingleSiteLaw make(std::vector<double> atoms, std::vector<double> probs) {
        if (atoms.empty() || atoms.size() != probs.size())
            throw std::invalid_argument("single-site law: atoms/probs must be non-empty, equal length");
        double total = 0.0;
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            if (std::abs(atoms[i]) > 1.0 + 1e-12)
                throw std::invalid_argument("single-site law: spin values must lie in [-1,1]");
            if (!(probs[i] > 0.0)) throw std::invalid_argument("single-site law: probs must be > 0");
            total += probs[i];
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw std::invalid_argument("single-site law: probs must sum to 1");
        SingleSiteLaw law;
        law.atoms = std::move(atoms);
        law.probs = std::move(probs);
        for (double& p : law.probs) p /= total;
        return law;
    }

    static SingleSiteLaw ising() { return make({-1.0, 1.0}, {0.5, 0.5}); }
};

// Discretization of the field variable x for the cascade recursion and the
// Parisi PDE. nodes is odd so that x = 0 is a grid point; dt is the time step
// of the PDE scheme (the semi-implicit solver has no stability constraint,
// the dx^2/2 bound only applies to a fully explicit step).
struct FieldGrid {
    double half_width; // L: domain is [-L, L]
    int nodes;         // odd, >= 3
    double dt;

    FieldGrid(double L, int n, double step) : half_width(L), nodes(n), dt(step) {
        if (!(L > 0.0)) throw std::invalid_argument("field grid: half_width must be > 0");
        if (n < 3 || n % 2 == 0) throw std::invalid_argument("field grid: nodes must be odd and >= 3");
        if (!(step > 0.0)) throw std::invalid_argument("field grid: dt must be > 0");
    }

    double dx() const { return 2.0 * half_width / (nodes - 1); }

    // Terminal profiles are 1-Lipschitz and diffusion acts over total
    // variance 2 q_max, so L = 4 + q_max + 6 sqrt(2 q_max) keeps the
    // boundary in the asymptotically linear regime.
    static FieldGrid for_qmax(double q_max, int n = 2049, double step = 2e-4) {
        const double L = 4.0 + q_max + 6.0 * std::sqrt(2.0 * std::max(0.0, q_max));
        return FieldGrid(L, n, step);
    }
};

namespace detail {

// One cascade level: f <- zeta^{-1} log ( K_v * exp(zeta f) ), with K_v the
// Gaussian kernel of variance v sampled on the grid, truncated at 8 standard
// deviations and renormalized; zeta <= 0 means the plain convolution K_v * f.
// The profile is extended linearly in the log domain, where it really is
// asymptotically linear, so boundary values stay accurate.
inline void cascade_level(std::vector<double>& f, double v, double zeta, double dx) {
    if (v <= 0.0) return; // repeated atom: the level acts as the identity
    const int h = std::max(1, static_cast<int>(std::ceil(8.0 * std::sqrt(v) / dx)));
    std::vector<double> ker(2 * h + 1);
    double ksum = 0.0;
    for (int m = -h; m <= h; ++m) {
        ker[m + h] = std::exp(-0.5 * (m * dx) * (m * dx) / v);
        ksum += ker[m + h];
    }
    for (double& w : ker) w /= ksum;

    const std::size_t n = f.size();
    std::vector<double> fe(n + 2 * h);
    const double slope_l = (f[1] - f[0]) / dx;
    const double slope_r = (f[n - 1] - f[n - 2]) / dx;
    for (int m = 0; m < h; ++m) fe[m] = f[0] - slope_l * dx * (h - m);
    std::copy(f.begin(), f.end(), fe.begin() + h);
    for (int m = 0; m < h; ++m) fe[n + h + m] = f[n - 1] + slope_r * dx * (m + 1);

    if (zeta <= 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            const double* fi = fe.data() + i;
            for (int j = 0; j <= 2 * h; ++j) acc += ker[j] * fi[j];
            f[i] = acc;
        }
        return;
    }
    const double c = *std::max_element(fe.begin(), fe.end());
    for (double& x : fe) x = std::exp(zeta * (x - c));
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        const double* fi = fe.data() + i;
        for (int j = 0; j <= 2 * h; ++j) acc += ker[j] * fi[j];
        f[i] = std::log(acc) / zeta + c;
    }
}

} // namespace detail

// Cascade recursion for the product initial condition, on an explicit level
// representation: zeta has size k+2 with zeta[0] = 0 <= ... <= zeta[k+1] = 1
// and atoms has size k+1, nondecreasing (repeated atoms are allowed and leave
// the value unchanged). Starting from the terminal profile
//   g(x) = log sum_j p_j exp(x a_j - q_k a_j^2),
// each level applies a Gaussian convolution of variance 2(q_l - q_{l-1})
// composed with z -> zeta_l^{-1} log E exp(zeta_l z) (plain expectation when
// zeta_l = 0), and the last step diffuses by variance 2 q_0 with a plain
// expectation. Returns -(profile at x = 0).
inline double psi_product_levels(const SingleSiteLaw& p1, const std::vector<double>& zeta,
                                 const std::vector<double>& atoms, const FieldGrid& grid) {
    const std::size_t k1 = atoms.size(); // k+1 atoms
    if (k1 == 0 || zeta.size() != k1 + 1)
        throw std::invalid_argument("psi_product: need k+1 atoms and k+2 zeta levels");
    if (zeta.front() != 0.0 || std::abs(zeta.back() - 1.0) > 1e-12)
        throw std::invalid_argument("psi_product: zeta must run from 0 to 1");
    for (std::size_t l = 0; l + 1 < zeta.size(); ++l)
        if (zeta[l + 1] < zeta[l]) throw std::invalid_argument("psi_product: zeta must be nondecreasing");
    for (std::size_t l = 0; l < k1; ++l) {
        if (!(atoms[l] >= 0.0)) throw std::invalid_argument("psi_product: atoms must be >= 0");
        if (l > 0 && atoms[l] < atoms[l - 1])
            throw std::invalid_argument("psi_product: atoms must be nondecreasing");
    }

    const int n = grid.nodes;
    const double dx = grid.dx();
    const double qk = atoms.back();
    std::vector<double> f(n);
    for (int i = 0; i < n; ++i) {
        const double x = -grid.half_width + i * dx;
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < p1.atoms.size(); ++j)
            best = std::max(best, x * p1.atoms[j] - qk * p1.atoms[j] * p1.atoms[j]);
        double s = 0.0;
        for (std::size_t j = 0; j < p1.atoms.size(); ++j)
            s += p1.probs[j] * std::exp(x * p1.atoms[j] - qk * p1.atoms[j] * p1.atoms[j] - best);
        f[i] = best + std::log(s);
    }

    for (std::size_t l = k1 - 1; l >= 1; --l)
        detail::cascade_level(f, 2.0 * (atoms[l] - atoms[l - 1]), zeta[l], dx);
    detail::cascade_level(f, 2.0 * atoms[0], 0.0, dx);

    // the profile must still be in its linear far-field regime at the
    // boundary, otherwise the grid clipped diffused mass
    double amin = p1.atoms[0], amax = p1.atoms[0];
    for (double a : p1.atoms) {
        amin = std::min(amin, a);
        amax = std::max(amax, a);
    }
    const double slope_l = (f[1] - f[0]) / dx;
    const double slope_r = (f[n - 1] - f[n - 2]) / dx;
    if (std::abs(slope_l - amin) > 1e-6 || std::abs(slope_r - amax) > 1e-6)
        throw std::runtime_error(
            "psi_product: boundary slope deviates from its asymptote; increase the grid half_width");

    return -f[(n - 1) / 2];
}

// psi(mu) for a product reference law, mu canonical
inline double psi_product(const SingleSiteLaw& p1, const DiscreteMeasure& mu,
                          const FieldGrid& grid) {
    std::vector<double> zeta(mu.size() + 1);
    zeta[0] = 0.0;
    const auto cum = mu.cumulative();
    for (std::size_t l = 0; l + 1 < cum.size(); ++l) zeta[l + 1] = cum[l];
    zeta[mu.size()] = 1.0;
    return psi_product_levels(p1, zeta, mu.atoms, grid);
}

inline double psi_product(const SingleSiteLaw& p1, const DiscreteMeasure& mu) {
    return psi_product(p1, mu, FieldGrid::for_qmax(mu.max_atom()));
}

// Parisi PDE route to the Ising initial condition:
//   d_s u + d_x^2 u - mu([0,s]) (d_x u)^2 + 1 = 0,  u(q_max, .) = -log cosh,
// solved backward from s = q_max with an implicit Laplacian (tridiagonal
// solve), explicit centered gradient term, and Neumann slopes -/+1 at the
// right/left boundary. Returns u(0, 0).
inline double psi_ising_pde(const MeasureCDF& cdf, double q_max, const FieldGrid& grid) {
    if (!(q_max >= 0.0)) throw std::invalid_argument("psi_ising_pde: need q_max >= 0");
    if (cdf(q_max) < 1.0 - 1e-9)
        throw std::invalid_argument("psi_ising_pde: cdf must reach 1 at q_max");

    const int n = grid.nodes;
    const double dx = grid.dx();
    std::vector<double> u(n);
    for (int i = 0; i < n; ++i) {
        const double x = -grid.half_width + i * dx;
        // -log cosh(x), overflow-safe
        u[i] = -(std::abs(x) + std::log1p(std::exp(-2.0 * std::abs(x))) - 0.6931471805599453);
    }
    if (q_max == 0.0) return u[(n - 1) / 2];

    // time slices aligned with the cdf breakpoints so each step sees a
    // constant coefficient on piecewise-constant inputs
    std::vector<double> times{0.0, q_max};
    for (double b : cdf.breakpoints)
        if (b > 0.0 && b < q_max) times.push_back(b);
    std::sort(times.begin(), times.end());
    std::vector<double> s_grid;
    for (std::size_t seg = 0; seg + 1 < times.size(); ++seg) {
        const double a = times[seg], b = times[seg + 1];
        const int steps = std::max(1, static_cast<int>(std::ceil((b - a) / grid.dt)));
        for (int j = 0; j < steps; ++j) s_grid.push_back(a + (b - a) * j / steps);
        s_grid.push_back(b);
    }
    std::sort(s_grid.begin(), s_grid.end());
    s_grid.erase(std::unique(s_grid.begin(), s_grid.end()), s_grid.end());

    std::vector<double> rhs(n), grad(n), cp(n), dp(n);
    for (std::size_t step = s_grid.size() - 1; step >= 1; --step) {
        const double s_hi = s_grid[step], s_lo = s_grid[step - 1];
        const double h = s_hi - s_lo;
        const double m = cdf(0.5 * (s_hi + s_lo));
        grad[0] = 1.0;
        grad[n - 1] = -1.0;
        for (int i = 1; i + 1 < n; ++i) grad[i] = (u[i + 1] - u[i - 1]) / (2.0 * dx);
        for (int i = 0; i < n; ++i) rhs[i] = u[i] + h * (1.0 - m * grad[i] * grad[i]);
        // Neumann ghost nodes: u_{-1} = u_1 - 2 dx, u_n = u_{n-2} - 2 dx
        rhs[0] -= 2.0 * h / dx;
        rhs[n - 1] -= 2.0 * h / dx;
        const double off = -h / (dx * dx);
        const double diag = 1.0 + 2.0 * h / (dx * dx);
        // Thomas algorithm; first/last rows have doubled off-diagonal
        cp[0] = 2.0 * off / diag;
        dp[0] = rhs[0] / diag;
        for (int i = 1; i < n; ++i) {
            const double a_i = (i == n - 1) ? 2.0 * off : off;
            const double denom = diag - a_i * cp[i - 1];
            cp[i] = off / denom;
            dp[i] = (rhs[i] - a_i * dp[i - 1]) / denom;
        }
        u[n - 1] = dp[n - 1];
        for (int i = n - 2; i >= 0; --i) u[i] = dp[i] - cp[i] * u[i + 1];
        if (!std::isfinite(u[(n - 1) / 2]))
            throw std::runtime_error("psi_ising_pde: solution became non-finite");
    }
    return u[(n - 1) / 2];
}

namespace detail {

// the running CDF constant pieces of [0, q] with c(s) = 2 int_s^q mu([0,r]) dr
struct SphericalPieces {
    std::vector<double> lo, hi, cdf_val, c_at_hi; // per piece; c_at_lo = c_at_hi + 2 cdf (hi-lo)
    double c0 = 0.0;
    double q = 0.0;
};

inline SphericalPieces spherical_pieces(const DiscreteMeasure& mu, double q) {
    if (q < mu.max_atom() - 1e-12)
        throw std::invalid_argument("spherical: need mu([0,q]) = 1, i.e. q >= largest atom");
    SphericalPieces out;
    out.q = q;
    std::vector<double> bounds{0.0, q};
    for (double a : mu.atoms)
        if (a > 0.0 && a < q) bounds.push_back(a);
    std::sort(bounds.begin(), bounds.end());
    bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());
    const auto cum = mu.cumulative();
    for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
        double val = 0.0; // mu([0, s]) on [bounds[i], bounds[i+1])
        for (std::size_t l = 0; l < mu.size(); ++l)
            if (mu.atoms[l] <= bounds[i]) val = cum[l];
        out.lo.push_back(bounds[i]);
        out.hi.push_back(bounds[i + 1]);
        out.cdf_val.push_back(val);
    }
    out.c_at_hi.assign(out.lo.size(), 0.0);
    double c = 0.0;
    for (std::size_t i = out.lo.size(); i-- > 0;) {
        out.c_at_hi[i] = c;
        c += 2.0 * out.cdf_val[i] * (out.hi[i] - out.lo[i]);
    }
    out.c0 = c;
    return out;
}

// int_0^q ds / (b - c(s)) in closed form: logarithmic on pieces where the
// CDF is a nonzero constant, linear where it vanishes
inline double spherical_integral(const SphericalPieces& p, double b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.lo.size(); ++i) {
        const double zeta = p.cdf_val[i];
        const double c_hi = p.c_at_hi[i];
        if (zeta > 0.0) {
            const double c_lo = c_hi + 2.0 * zeta * (p.hi[i] - p.lo[i]);
            acc += std::log((b - c_hi) / (b - c_lo)) / (2.0 * zeta);
        } else {
            acc += (p.hi[i] - p.lo[i]) / (b - c_hi);
        }
    }
    return acc;
}

inline double spherical_value_at(const SphericalPieces& p, double b) {
    return spherical_integral(p, b) + 0.5 * (b - 1.0 - std::log(b)) - p.q;
}

} // namespace detail

// the bracketed expression of the spherical variational formula at (q, b)
inline double spherical_objective(const DiscreteMeasure& mu, double q, double b) {
    const auto pieces = detail::spherical_pieces(mu, q);
    if (!(b > pieces.c0)) throw std::invalid_argument("spherical: need b > 2 int_0^q mu([0,r]) dr");
    return detail::spherical_value_at(pieces, b);
}

// psi_circ(mu) = - inf_{b > c(0)} [ int_0^q ds/(b - c(s)) + (b - 1 - log b)/2 - q ],
// q the largest atom; the value does not depend on that choice of q. The
// outer sign makes psi_circ the limit of the (annealed-normalized, hence
// nonnegative) spherical free energies: psi_circ(delta_q) then agrees with
// the direct Laplace evaluation q - sup_{|u|<1}[ sqrt(2q) u + log(1-u^2)/2 ]
// and is nondecreasing in the atoms. The bracketed objective is convex in b,
// so a doubling bracket plus golden-section search locates the infimum.
inline double psi_spherical(const DiscreteMeasure& mu, double q = -1.0) {
    if (q < 0.0) q = mu.max_atom();
    const auto pieces = detail::spherical_pieces(mu, q);
    const double c0 = pieces.c0;
    auto value = [&](double b) { return detail::spherical_value_at(pieces, b); };

    double prev_b = c0 + 1e-9;
    double prev_val = value(prev_b);
    double lo = prev_b, hi = -1.0;
    double before_prev = prev_b;
    bool found = false;
    double step = 1e-9;
    for (int j = 0; j < 60; ++j) {
        step *= 2.0;
        const double b = c0 + step;
        const double val = value(b);
        if (val >= prev_val) {
            lo = before_prev;
            hi = b;
            found = true;
            break;
        }
        before_prev = prev_b;
        prev_b = b;
        prev_val = val;
    }
    if (!found) throw std::runtime_error("psi_spherical: failed to bracket the minimum in b");
    return -golden_section_min(value, lo, hi, 1e-10).second;
}

} // namespace pspin

#endif
