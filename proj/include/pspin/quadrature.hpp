#ifndef PSPIN_QUADRATURE_HPP
#define PSPIN_QUADRATURE_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pspin {

struct GaussHermite {
    std::vector<double> nodes;   // abscissae for E[f(Z)], Z standard normal
    std::vector<double> weights; // sum to 1
};

// Gauss-Hermite rule rescaled to the standard normal measure:
// E[f(Z)] ~= sum_i weights[i] * f(nodes[i]).
// Roots of the physicists' Hermite polynomial by Newton iteration on the
// three-term recurrence, then x -> sqrt(2) x, w -> w / sqrt(pi).
inline GaussHermite gauss_hermite(int n) {
    if (n < 1) throw std::invalid_argument("gauss_hermite: need n >= 1");
    const double eps = 1e-14;
    std::vector<double> x(n), w(n);
    const int m = (n + 1) / 2;
    double z = 0.0, pp = 0.0;
    for (int i = 0; i < m; ++i) {
        if (i == 0) {
            z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
        } else if (i == 1) {
            z -= 1.14 * std::pow(n, 0.426) / z;
        } else if (i == 2) {
            z = 1.86 * z - 0.86 * x[0];
        } else if (i == 3) {
            z = 1.91 * z - 0.91 * x[1];
        } else {
            z = 2.0 * z - x[i - 2];
        }
        for (int iter = 0; iter < 100; ++iter) {
            double p1 = 0.7511255444649425; // pi^{-1/4}
            double p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            const double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) <= eps * std::max(1.0, std::abs(z))) break;
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    GaussHermite rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    double wsum = 0.0;
    for (int i = 0; i < n; ++i) wsum += w[i];
    for (int i = 0; i < n; ++i) {
        // descending -> ascending order, rescaled to N(0,1)
        rule.nodes[i] = -x[i] * 1.4142135623730950488;
        rule.weights[i] = w[i] / wsum;
    }
    return rule;
}

// Golden-section minimization of a unimodal function on [lo, hi];
// returns {argmin, min}. xtol is the absolute tolerance on the argument.
template <typename Fn>
std::pair<double, double> golden_section_min(Fn&& f, double lo, double hi, double xtol,
                                             int max_iter = 400) {
    const double invphi = 0.6180339887498948482;
    double a = lo, b = hi;
    double x1 = b - invphi * (b - a);
    double x2 = a + invphi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < max_iter && (b - a) > xtol; ++it) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = f(x2);
        }
    }
    return f1 <= f2 ? std::make_pair(x1, f1) : std::make_pair(x2, f2);
}

inline double log_sum_exp(std::span<const double> v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

} // namespace pspin

#endif
