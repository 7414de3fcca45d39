#ifndef PSPIN_MIXTURE_HPP
#define PSPIN_MIXTURE_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

namespace pspin {

// Mixture function xi(r) = sum_{p>=2} beta_p r^p of a mixed p-spin model,
// with its first two derivatives and its convex dual
//   xi*(s) = sup_{r>=0} (r s - xi(r)).
// Coefficients are stored sparsely by degree; evaluation runs Horner on the
// dense expansion (max degrees are small in practice).
class Mixture {
  public:
    explicit Mixture(const std::map<int, double>& coeffs) : sparse_(coeffs) {
        if (coeffs.empty()) throw std::invalid_argument("mixture: no coefficients");
        int max_deg = 0;
        bool any_positive = false;
        for (const auto& [p, beta] : coeffs) {
            if (p < 2) throw std::invalid_argument("mixture: degrees must be integers >= 2");
            if (beta < 0.0 || !std::isfinite(beta))
                throw std::invalid_argument("mixture: coefficients must be >= 0");
            if (beta > 0.0) any_positive = true;
            max_deg = std::max(max_deg, p);
        }
        if (!any_positive) throw std::invalid_argument("mixture: all coefficients are zero");
        dense_.assign(max_deg + 1, 0.0);
        for (const auto& [p, beta] : coeffs) dense_[p] = beta;
    }

    double operator()(double r) const { return evaluate(r, 0); }

    // xi, xi' or xi'' at r (order 0, 1, 2)
    double evaluate(double r, int order) const {
        if (order < 0 || order > 2) throw std::invalid_argument("mixture: order must be 0, 1 or 2");
        // Horner on the order-th derivative: sum_{p>=order} p!/(p-order)! c_p r^{p-order}
        const int n = static_cast<int>(dense_.size()) - 1;
        double acc = 0.0;
        for (int p = n; p >= order; --p) {
            double c = dense_[p];
            if (order >= 1) c *= p;
            if (order == 2) c *= (p - 1);
            acc = acc * r + c;
        }
        return acc;
    }

    double derivative(double r) const { return evaluate(r, 1); }
    double second_derivative(double r) const { return evaluate(r, 2); }

    // scaled so that xi(1) = 1; idempotent
    Mixture normalized() const {
        const double total = (*this)(1.0);
        if (total <= 0.0) throw std::invalid_argument("mixture: xi(1) must be > 0 to normalize");
        std::map<int, double> scaled;
        for (const auto& [p, beta] : sparse_) scaled[p] = beta / total;
        return Mixture(scaled);
    }

    bool is_normalized(double tol = 1e-12) const { return std::abs((*this)(1.0) - 1.0) <= tol; }

    // r >= 0 achieving the supremum in xi*(s); 0 for s <= 0
    double dual_argmax(double s) const {
        if (s <= 0.0) return 0.0;
        // bracket: xi' is strictly increasing on r >= 0 with xi'(0) = 0
        double hi = 1.0;
        int doublings = 0;
        while (derivative(hi) < s) {
            hi *= 2.0;
            if (++doublings > 200)
                throw std::runtime_error("mixture: failed to bracket xi'(r) = s");
        }
        double lo = 0.0;
        double r = hi;
        for (int it = 0; it < 200; ++it) {
            const double f = derivative(r) - s;
            if (std::abs(f) <= 1e-12 * std::max(1.0, s)) break;
            if (f > 0.0)
                hi = r;
            else
                lo = r;
            if (hi - lo <= 1e-15 * std::max(1.0, hi)) break;
            const double fp = second_derivative(r);
            double next = (fp > 0.0) ? r - f / fp : lo;
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi); // bisection safeguard
            r = next;
        }
        return r;
    }

    // convex dual xi*(s) = sup_{r>=0}(r s - xi(r)); 0 for s <= 0
    double dual(double s) const {
        if (s <= 0.0) return 0.0;
        const double r = dual_argmax(s);
        return std::max(0.0, r * s - (*this)(r));
    }

    const std::map<int, double>& coefficients() const { return sparse_; }
    int max_degree() const { return static_cast<int>(dense_.size()) - 1; }

    bool even() const {
        for (const auto& [p, beta] : sparse_)
            if (beta > 0.0 && p % 2 != 0) return false;
        return true;
    }

  private:
    std::map<int, double> sparse_;
    std::vector<double> dense_;
};

} // namespace pspin

#endif
