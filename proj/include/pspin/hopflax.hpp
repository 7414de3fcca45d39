#ifndef PSPIN_HOPFLAX_HPP
#define PSPIN_HOPFLAX_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "pspin/initial_condition.hpp"
#include "pspin/measures.hpp"
#include "pspin/mixture.hpp"
#include "pspin/parallel.hpp"
#include "pspin/quadrature.hpp"
#include "pspin/rng.hpp"

namespace pspin {

enum class PsiKind { ising, spherical, product };

// The k-atom Hopf-Lax variational problem
//   f^(k)(t, x) = sup_{y in R_+^k} [ psi^(k)(y) - (t/k) sum_l xi*((y_l - x_l)/t) ],
// where psi^(k)(y) is the initial condition of the empirical measure of y.
struct HopfLaxProblem {
    Mixture mixture;
    double t;
    std::vector<double> base; // atoms x of mu = k^{-1} sum delta_{x_l}
    PsiKind kind;
    SingleSiteLaw p1; // single-site law when kind == product
    // cascade grid resolution for psi evaluations; the half-width is fixed
    // per problem (from the search box) so the objective varies smoothly in y
    int field_nodes = 769;

    HopfLaxProblem(Mixture m, double time, std::vector<double> x, PsiKind psi_kind,
                   SingleSiteLaw law = {}, int nodes = 769)
        : mixture(std::move(m)), t(time), base(std::move(x)), kind(psi_kind),
          p1(std::move(law)), field_nodes(nodes) {
        if (!mixture.is_normalized(1e-9))
            throw std::invalid_argument("hopflax: mixture must be normalized to xi(1) = 1");
        if (!(t >= 0.0)) throw std::invalid_argument("hopflax: need t >= 0");
        if (base.empty()) throw std::invalid_argument("hopflax: need k >= 1 base atoms");
        for (double x_l : base)
            if (!(x_l >= 0.0)) throw std::invalid_argument("hopflax: base atoms must be >= 0");
        if (kind == PsiKind::product && p1.atoms.empty())
            throw std::invalid_argument("hopflax: product kind requires a single-site law");
    }

    std::size_t k() const { return base.size(); }
    double box_top() const {
        return *std::max_element(base.begin(), base.end()) + t * mixture.derivative(1.0);
    }
    DiscreteMeasure base_measure() const {
        return canonicalize(base, std::vector<double>(base.size(), 1.0));
    }
};

struct SolveOptions {
    int grid_points = 201;     // global grid stage, k <= 3
    int restarts = 8;          // random ascent starts
    std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
    double improve_tol = 1e-9; // stop a sweep cycle below this gain
    int max_sweeps = 60;
    long long max_evals = 400000000;
    int threads = 0;           // 0 = hardware concurrency
    double box_scale = 1.0;    // search-box enlargement factor (diagnostics)
};

struct HopfLaxResult {
    double value = 0.0;
    std::vector<double> maximizer; // ascending
    int restarts_used = 0;
    long long objective_evals = 0;
    bool converged = true;
    std::uint64_t seed = 0;
};

namespace detail {

inline FieldGrid hopflax_field_grid(const HopfLaxProblem& prob, double y_max) {
    const double q = std::max(prob.box_top(), y_max);
    const double L = 4.0 + q + 6.0 * std::sqrt(2.0 * std::max(0.0, q));
    return FieldGrid(L, prob.field_nodes, 2e-4);
}

inline double psi_of_measure(const HopfLaxProblem& prob, const DiscreteMeasure& nu) {
    switch (prob.kind) {
    case PsiKind::spherical:
        return psi_spherical(nu);
    case PsiKind::ising:
        return psi_product(SingleSiteLaw::ising(), nu, hopflax_field_grid(prob, nu.max_atom()));
    case PsiKind::product:
        return psi_product(prob.p1, nu, hopflax_field_grid(prob, nu.max_atom()));
    }
    throw std::logic_error("unreachable");
}

} // namespace detail

// psi^(k)(y): initial condition of the empirical measure of y
inline double psi_k(const HopfLaxProblem& prob, const std::vector<double>& y) {
    return detail::psi_of_measure(prob,
                                  canonicalize(y, std::vector<double>(y.size(), 1.0)));
}

// Hopf-Lax objective at candidate y. Both y and the base are sorted
// ascending before the coordinate-wise cost is taken; by the swap
// inequality the sorted pairing dominates every other ordering.
inline double objective(const HopfLaxProblem& prob, const std::vector<double>& y) {
    if (y.size() != prob.base.size())
        throw std::invalid_argument("objective: y must have length k");
    for (double v : y)
        if (!(v >= 0.0)) throw std::invalid_argument("objective: y entries must be >= 0");
    if (!(prob.t > 0.0)) throw std::invalid_argument("objective: need t > 0");
    std::vector<double> ys(y), xs(prob.base);
    std::sort(ys.begin(), ys.end());
    std::sort(xs.begin(), xs.end());
    const double psi = psi_k(prob, ys);
    const std::size_t k = ys.size();
    double cost = 0.0;
    for (std::size_t l = 0; l < k; ++l) cost += prob.mixture.dual((ys[l] - xs[l]) / prob.t);
    return psi - prob.t / static_cast<double>(k) * cost;
}

// measure form of the same objective: psi(nu) - t E[ xi*((X_nu - X_mu)/t) ]
inline double objective_measure(const HopfLaxProblem& prob, const DiscreteMeasure& nu) {
    if (!(prob.t > 0.0)) throw std::invalid_argument("objective: need t > 0");
    const double psi = detail::psi_of_measure(prob, nu);
    return psi - prob.t * transport_cost(prob.mixture, prob.base_measure(), nu, prob.t);
}

namespace detail {

// enumerate nondecreasing index tuples with entries in [first_index, points)
template <typename Fn>
void for_each_ascending_tuple(std::size_t m, int points, int first_index, Fn&& fn) {
    std::vector<int> idx(m, first_index);
    for (;;) {
        fn(idx);
        int pos = static_cast<int>(m) - 1;
        while (pos >= 0 && idx[pos] == points - 1) --pos;
        if (pos < 0) return;
        ++idx[pos];
        for (std::size_t j = pos + 1; j < m; ++j) idx[j] = idx[pos];
    }
}

} // namespace detail

inline HopfLaxResult solve(const HopfLaxProblem& prob, const SolveOptions& opts = {});

namespace detail {

inline HopfLaxResult solve_with_seeds(const HopfLaxProblem& prob, const SolveOptions& opts,
                                      const std::vector<std::vector<double>>& extra_seeds) {
    const std::size_t k = prob.k();
    HopfLaxResult res;
    res.seed = opts.seed;

    std::vector<double> base_sorted(prob.base);
    std::sort(base_sorted.begin(), base_sorted.end());

    if (prob.t == 0.0) {
        res.value = psi_k(prob, base_sorted);
        res.maximizer = base_sorted;
        res.objective_evals = 1;
        return res;
    }

    const double box = opts.box_scale * prob.box_top();
    std::atomic<long long> evals{0};
    std::atomic<bool> budget_hit{false};
    auto eval = [&](const std::vector<double>& y) {
        if (evals.fetch_add(1) >= opts.max_evals) {
            budget_hit.store(true);
            return -std::numeric_limits<double>::infinity();
        }
        return objective(prob, y);
    };

    struct Candidate {
        double value = -std::numeric_limits<double>::infinity();
        std::vector<double> point;
    };
    auto better = [](const Candidate& a, const Candidate& b) {
        if (a.value != b.value) return a.value > b.value;
        return a.point < b.point; // deterministic tie-break
    };

    // seed pool: base, origin, callers' seeds, grid-stage best, random starts
    std::vector<std::vector<double>> seeds;
    seeds.push_back(base_sorted);
    seeds.emplace_back(k, 0.0);
    for (const auto& s : extra_seeds)
        if (s.size() == k) seeds.push_back(s);

    Candidate grid_best;
    if (k <= 3 && opts.grid_points >= 2) {
        const int points = opts.grid_points;
        std::vector<Candidate> chunk_best(points);
        parallel_for(
            static_cast<std::size_t>(points),
            [&](std::size_t i0) {
                Candidate local;
                std::vector<double> tup(k);
                tup[0] = box * static_cast<double>(i0) / (points - 1);
                if (k == 1) {
                    local.value = eval(tup);
                    local.point = tup;
                } else {
                    detail::for_each_ascending_tuple(
                        k - 1, points, static_cast<int>(i0), [&](const std::vector<int>& idx) {
                            for (std::size_t j = 1; j < k; ++j)
                                tup[j] = box * static_cast<double>(idx[j - 1]) / (points - 1);
                            const double v = eval(tup);
                            Candidate c{v, tup};
                            if (better(c, local)) local = std::move(c);
                        });
                }
                chunk_best[i0] = std::move(local);
            },
            opts.threads);
        for (auto& c : chunk_best)
            if (better(c, grid_best)) grid_best = std::move(c);
        if (!grid_best.point.empty()) seeds.push_back(grid_best.point);
    }

    for (int j = 0; j < opts.restarts; ++j) {
        Rng rng(mix_seed(opts.seed, static_cast<std::uint64_t>(j)));
        std::vector<double> y(k);
        for (auto& v : y) v = box * rng.uniform01();
        std::sort(y.begin(), y.end());
        seeds.push_back(std::move(y));
    }

    const double xtol = std::max(1e-10, 1e-7 * std::max(1.0, box));
    std::vector<Candidate> ascent_result(seeds.size());
    parallel_for(
        seeds.size(),
        [&](std::size_t si) {
            std::vector<double> y = seeds[si];
            double fy = eval(y);
            for (int sweep = 0; sweep < opts.max_sweeps && !budget_hit.load(); ++sweep) {
                const double f_before = fy;
                for (std::size_t c = 0; c < k; ++c) {
                    auto line = [&](double v) {
                        std::vector<double> yy = y;
                        yy[c] = v;
                        return -eval(yy);
                    };
                    auto [v_best, neg_best] = golden_section_min(line, 0.0, box, xtol);
                    if (-neg_best > fy) {
                        y[c] = v_best;
                        fy = -neg_best;
                    }
                }
                if (fy - f_before < opts.improve_tol) break;
            }
            std::sort(y.begin(), y.end());
            ascent_result[si] = Candidate{fy, std::move(y)};
        },
        opts.threads);

    Candidate best = grid_best;
    for (auto& c : ascent_result)
        if (better(c, best)) best = std::move(c);

    HopfLaxResult out;
    out.value = best.value;
    out.maximizer = best.point;
    std::sort(out.maximizer.begin(), out.maximizer.end());
    out.restarts_used = opts.restarts;
    out.objective_evals = evals.load();
    out.converged = !budget_hit.load();
    out.seed = opts.seed;
    return out;
}

} // namespace detail

// Maximizes the Hopf-Lax objective over the box [0, max(base) + t xi'(1)]^k:
// an exhaustive ascending-tuple grid stage for k <= 3 seeds a deterministic
// multi-start coordinate ascent (golden-section line searches). For t = 0
// the Hopf-Lax formula degenerates to psi^(k)(base).
inline HopfLaxResult solve(const HopfLaxProblem& prob, const SolveOptions& opts) {
    return detail::solve_with_seeds(prob, opts, {});
}

// f^(k)(t, 0): the Parisi value of the k-atom approximation at mu = delta_0.
// For even k the doubled maximizer of the k/2 problem seeds the ascent, so
// the value is monotone along k-doubling by construction.
inline HopfLaxResult parisi_value(const Mixture& m, double t, int k, PsiKind kind,
                                  const SolveOptions& opts = {}, SingleSiteLaw p1 = {},
                                  int field_nodes = 769) {
    if (k < 1) throw std::invalid_argument("parisi_value: need k >= 1");
    if (!(t > 0.0)) throw std::invalid_argument("parisi_value: need t > 0");
    std::vector<std::vector<double>> extra;
    if (k % 2 == 0) {
        const auto half = parisi_value(m, t, k / 2, kind, opts, p1, field_nodes);
        std::vector<double> doubled;
        doubled.reserve(k);
        for (double v : half.maximizer) {
            doubled.push_back(v);
            doubled.push_back(v);
        }
        extra.push_back(std::move(doubled));
    }
    HopfLaxProblem prob(m, t, std::vector<double>(k, 0.0), kind, std::move(p1), field_nodes);
    return detail::solve_with_seeds(prob, opts, extra);
}

// The classical Parisi functional at nu in P([0,1]),
//   t + psi((t xi')(nu)) - t xi'(1) + t int_0^1 s xi''(s) nu([0,s]) ds,
// with the last integral in closed form through integration by parts:
//   int_0^1 s xi''(s) nu([0,s]) ds = xi'(1) - 1 - int (r xi'(r) - xi(r)) dnu(r).
// Equals the Hopf-Lax objective at mu = (t xi')(nu) with base delta_0.
inline double classical_functional(const Mixture& m, double t, const DiscreteMeasure& nu,
                                   PsiKind kind, SingleSiteLaw p1 = {}, int field_nodes = 769) {
    if (!(t > 0.0)) throw std::invalid_argument("classical_functional: need t > 0");
    for (double a : nu.atoms)
        if (a > 1.0 + 1e-12)
            throw std::invalid_argument("classical_functional: nu must be supported in [0,1]");
    const DiscreteMeasure mu = pushforward_txiprime(m, nu, t);
    HopfLaxProblem prob(m, t, {0.0}, kind, std::move(p1), field_nodes);
    const double psi = detail::psi_of_measure(prob, mu);
    double moment = 0.0; // int (r xi'(r) - xi(r)) dnu(r)
    for (std::size_t i = 0; i < nu.size(); ++i) {
        const double r = nu.atoms[i];
        moment += nu.weights[i] * (r * m.derivative(r) - m(r));
    }
    const double xi1 = m.derivative(1.0);
    return t + psi - t * xi1 + t * (xi1 - 1.0 - moment);
}

// Residual of the finite-dimensional Hamilton-Jacobi equation
//   d_t f^(k) - (1/k) sum_l xi(k d_{x_l} f^(k)) = 0
// by central differences of solve() with step h. Gradient components are
// clipped at 0 before applying xi: the dual assigns +infinity off the
// nonnegative orthant and the true derivatives are >= 0, so small negative
// estimates are finite-difference noise.
inline double hj_residual(const HopfLaxProblem& prob, double h, const SolveOptions& opts = {}) {
    if (!(h > 0.0)) throw std::invalid_argument("hj_residual: need h > 0");
    if (!(prob.t > h)) throw std::invalid_argument("hj_residual: need t > h");
    for (double x : prob.base)
        if (!(x > h)) throw std::invalid_argument("hj_residual: base must be interior (entries > h)");

    auto value_at = [&](double t, const std::vector<double>& base) {
        HopfLaxProblem p(prob.mixture, t, base, prob.kind, prob.p1, prob.field_nodes);
        return solve(p, opts).value;
    };
    const std::size_t k = prob.k();
    const double dt_f =
        (value_at(prob.t + h, prob.base) - value_at(prob.t - h, prob.base)) / (2.0 * h);
    double hamiltonian = 0.0;
    for (std::size_t l = 0; l < k; ++l) {
        std::vector<double> up(prob.base), dn(prob.base);
        up[l] += h;
        dn[l] -= h;
        const double dx_l = (value_at(prob.t, up) - value_at(prob.t, dn)) / (2.0 * h);
        hamiltonian += prob.mixture(std::max(0.0, static_cast<double>(k) * dx_l));
    }
    return dt_f - hamiltonian / static_cast<double>(k);
}

} // namespace pspin

#endif
