#ifndef PSPIN_MEASURES_HPP
#define PSPIN_MEASURES_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "pspin/mixture.hpp"

namespace pspin {

// Finitely supported probability measure on [0, infinity).
// Always stored canonically: atoms strictly ascending, weights positive and
// summing to 1. All constructors canonicalize, so repeated or zero-weight
// atoms in the input never reach downstream code.
struct DiscreteMeasure {
    std::vector<double> atoms;
    std::vector<double> weights;

    std::size_t size() const { return atoms.size(); }
    double max_atom() const { return atoms.back(); }

    // cumulative weights; last entry is 1 up to round-off
    std::vector<double> cumulative() const {
        std::vector<double> cum(weights.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            cum[i] = acc;
        }
        return cum;
    }

    // F^{-1}(r) = inf{ s >= 0 : mu([0,s]) > r }; the inequality is strict,
    // so at a breakpoint the quantile already belongs to the next atom.
    double quantile(double r) const {
        if (r < 0.0 || r >= 1.0) throw std::invalid_argument("quantile: need 0 <= r < 1");
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < atoms.size(); ++i) {
            acc += weights[i];
            if (acc > r) return atoms[i];
        }
        return atoms.back();
    }
};

inline DiscreteMeasure canonicalize(std::vector<double> atoms, std::vector<double> weights) {
    if (atoms.empty() || atoms.size() != weights.size())
        throw std::invalid_argument("measure: atoms/weights must be non-empty and equal length");
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        if (!(atoms[i] >= 0.0) || !std::isfinite(atoms[i]))
            throw std::invalid_argument("measure: atoms must be finite and >= 0");
        if (!(weights[i] >= 0.0) || !std::isfinite(weights[i]))
            throw std::invalid_argument("measure: weights must be finite and >= 0");
    }
    std::vector<std::size_t> order(atoms.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return atoms[a] < atoms[b]; });
    DiscreteMeasure out;
    double total = 0.0;
    for (std::size_t i : order) {
        if (weights[i] == 0.0) continue;
        if (!out.atoms.empty() && atoms[i] == out.atoms.back()) {
            out.weights.back() += weights[i];
        } else {
            out.atoms.push_back(atoms[i]);
            out.weights.push_back(weights[i]);
        }
        total += weights[i];
    }
    if (total <= 0.0) throw std::invalid_argument("measure: total weight must be > 0");
    // renormalize only outside the 1e-12 tolerance, so canonicalize is an
    // exact projection (re-canonicalizing never changes stored weights)
    if (std::abs(total - 1.0) > 1e-12)
        for (double& w : out.weights) w /= total;
    return out;
}

inline DiscreteMeasure dirac(double q) { return canonicalize({q}, {1.0}); }

inline bool operator==(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    return a.atoms == b.atoms && a.weights == b.weights;
}

// Joint representation of two quantile functions over a common partition of
// [0,1]: both are constant on each interval (levels[i], levels[i+1]). This
// realizes the coupling (X_mu, X_nu) driven by one uniform variable, which is
// optimal for every cost of the form c(y - x) with c convex.
struct CommonRefinement {
    std::vector<double> levels;          // 0 = r_0 < ... < r_m = 1
    std::vector<double> left_quantiles;  // size m, values of F^{-1}_mu
    std::vector<double> right_quantiles; // size m, values of F^{-1}_nu

    std::size_t intervals() const { return left_quantiles.size(); }

    DiscreteMeasure left_marginal() const {
        std::vector<double> w(intervals());
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = levels[i + 1] - levels[i];
        return canonicalize(left_quantiles, w);
    }
    DiscreteMeasure right_marginal() const {
        std::vector<double> w(intervals());
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = levels[i + 1] - levels[i];
        return canonicalize(right_quantiles, w);
    }
};

inline CommonRefinement refine(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    const auto cum_mu = mu.cumulative();
    const auto cum_nu = nu.cumulative();
    CommonRefinement out;
    out.levels.push_back(0.0);
    std::size_t i = 0, j = 0; // current atom index in mu, nu
    // walk the merged cumulative breakpoints
    while (i < mu.size() - 1 || j < nu.size() - 1) {
        const double ci = i < mu.size() - 1 ? cum_mu[i] : 2.0;
        const double cj = j < nu.size() - 1 ? cum_nu[j] : 2.0;
        const double next = std::min(ci, cj);
        out.left_quantiles.push_back(mu.atoms[i]);
        out.right_quantiles.push_back(nu.atoms[j]);
        out.levels.push_back(next);
        if (ci == next) ++i;
        if (cj == next) ++j;
    }
    out.left_quantiles.push_back(mu.atoms[i]);
    out.right_quantiles.push_back(nu.atoms[j]);
    out.levels.push_back(1.0);
    // a merged breakpoint can coincide with 1 when weights were renormalized
    if (out.levels.size() >= 2 && out.levels[out.levels.size() - 2] >= 1.0) {
        out.levels.erase(out.levels.end() - 1);
        out.left_quantiles.pop_back();
        out.right_quantiles.pop_back();
        out.levels.back() = 1.0;
    }
    return out;
}

// L1-Wasserstein distance E|X_mu - X_nu|
inline double w1(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    const auto ref = refine(mu, nu);
    double acc = 0.0;
    for (std::size_t i = 0; i < ref.intervals(); ++i)
        acc += (ref.levels[i + 1] - ref.levels[i]) *
               std::abs(ref.right_quantiles[i] - ref.left_quantiles[i]);
    return acc;
}

// E[ xi*((X_nu - X_mu)/t) ]; the Hopf-Lax penalty is t times this.
inline double transport_cost(const Mixture& m, const DiscreteMeasure& mu,
                             const DiscreteMeasure& nu, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("transport_cost: need t > 0");
    const auto ref = refine(mu, nu);
    double acc = 0.0;
    for (std::size_t i = 0; i < ref.intervals(); ++i) {
        const double len = ref.levels[i + 1] - ref.levels[i];
        acc += len * m.dual((ref.right_quantiles[i] - ref.left_quantiles[i]) / t);
    }
    return acc;
}

// image of nu (supported in [0,1]) under r -> t xi'(r)
inline DiscreteMeasure pushforward_txiprime(const Mixture& m, const DiscreteMeasure& nu,
                                            double t) {
    if (!(t > 0.0)) throw std::invalid_argument("pushforward: need t > 0");
    std::vector<double> atoms(nu.size());
    for (std::size_t i = 0; i < nu.size(); ++i) {
        if (nu.atoms[i] > 1.0 + 1e-12)
            throw std::invalid_argument("pushforward: nu must be supported in [0,1]");
        atoms[i] = t * m.derivative(std::min(nu.atoms[i], 1.0));
    }
    return canonicalize(atoms, nu.weights);
}

// image of mu under r -> min(r, c)
inline DiscreteMeasure truncate(const DiscreteMeasure& mu, double c) {
    if (!(c >= 0.0)) throw std::invalid_argument("truncate: need c >= 0");
    std::vector<double> atoms(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) atoms[i] = std::min(mu.atoms[i], c);
    return canonicalize(atoms, mu.weights);
}

// Right-continuous nondecreasing CDF s -> mu([0,s]). Step interpolation for
// discrete measures; piecewise-linear lets the PDE solver take continuous
// inputs such as the uniform law.
struct MeasureCDF {
    enum class Interp { step, linear };

    std::vector<double> breakpoints; // ascending
    std::vector<double> values;      // nondecreasing, in [0,1], last == 1
    Interp interp = Interp::step;

    MeasureCDF(std::vector<double> bp, std::vector<double> val, Interp kind = Interp::step)
        : breakpoints(std::move(bp)), values(std::move(val)), interp(kind) {
        if (breakpoints.empty() || breakpoints.size() != values.size())
            throw std::invalid_argument("cdf: breakpoints/values must be non-empty, equal length");
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i > 0 && (breakpoints[i] <= breakpoints[i - 1] || values[i] < values[i - 1]))
                throw std::invalid_argument("cdf: breakpoints must ascend, values must not decrease");
            if (values[i] < 0.0 || values[i] > 1.0)
                throw std::invalid_argument("cdf: values must lie in [0,1]");
        }
        if (std::abs(values.back() - 1.0) > 1e-12)
            throw std::invalid_argument("cdf: final value must be 1");
        values.back() = 1.0;
    }

    double operator()(double s) const {
        if (s < breakpoints.front())
            return interp == Interp::step ? 0.0 : values.front();
        if (s >= breakpoints.back()) return values.back();
        auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), s);
        const std::size_t i = static_cast<std::size_t>(it - breakpoints.begin()); // s < bp[i]
        if (interp == Interp::step) return values[i - 1];
        const double a = breakpoints[i - 1], b = breakpoints[i];
        const double u = (s - a) / (b - a);
        return values[i - 1] + u * (values[i] - values[i - 1]);
    }
};

inline MeasureCDF to_cdf(const DiscreteMeasure& mu) {
    return MeasureCDF(mu.atoms, mu.cumulative(), MeasureCDF::Interp::step);
}

} // namespace pspin

#endif
