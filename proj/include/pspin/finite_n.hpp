#ifndef PSPIN_FINITE_N_HPP
#define PSPIN_FINITE_N_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "pspin/initial_condition.hpp"
#include "pspin/measures.hpp"
#include "pspin/mixture.hpp"
#include "pspin/parallel.hpp"
#include "pspin/quadrature.hpp"
#include "pspin/rng.hpp"

namespace pspin {

// One draw of the Gaussian coupling tensors of H_N: per degree p with
// beta_p > 0, N^p independent standard Gaussians, filled in a fixed order so
// the same seed reproduces the tensors bit-for-bit.
struct DisorderSample {
    int n_spins = 0;
    std::uint64_t seed = 0;
    std::vector<int> degrees;
    std::vector<double> scales; // sqrt(beta_p) N^{-(p-1)/2} per degree
    std::vector<std::vector<double>> tensors;

    static DisorderSample generate(const Mixture& m, int n, std::uint64_t seed) {
        if (n < 1) throw std::invalid_argument("disorder: need N >= 1");
        DisorderSample d;
        d.n_spins = n;
        d.seed = seed;
        Rng rng(seed);
        for (const auto& [p, beta] : m.coefficients()) {
            if (beta == 0.0) continue;
            double count = std::pow(static_cast<double>(n), p);
            if (count > 5e7) throw std::invalid_argument("disorder: tensor N^p too large");
            d.degrees.push_back(p);
            d.scales.push_back(std::sqrt(beta) * std::pow(static_cast<double>(n), -(p - 1) / 2.0));
            std::vector<double> tensor(static_cast<std::size_t>(count));
            for (double& g : tensor) g = rng.gaussian();
            d.tensors.push_back(std::move(tensor));
        }
        return d;
    }
};

namespace detail {

// sum over all index tuples of J_T prod_i sigma_{T_i} for one degree
inline double spin_product_sum(const std::vector<double>& tensor, int p, int n,
                               std::span<const int> sigma) {
    std::vector<std::size_t> idx(p, 0);
    double acc = 0.0;
    for (;;) {
        std::size_t flat = 0;
        int sign = 1;
        for (int j = 0; j < p; ++j) {
            flat = flat * n + idx[j];
            sign *= sigma[idx[j]];
        }
        acc += sign * tensor[flat];
        int pos = p - 1;
        while (pos >= 0 && idx[pos] == static_cast<std::size_t>(n - 1)) idx[pos--] = 0;
        if (pos < 0) return acc;
        ++idx[pos];
    }
}

// change of spin_product_sum when spin a flips, evaluated at the pre-flip
// sigma: -2 sigma_a times the sum of J_T prod(non-a entries) over tuples
// containing a an odd number of times. Tuples are enumerated by the first
// position holding a (positions before it differ from a, later ones are
// free), which costs O(p N^{p-1}) instead of a full O(N^p) rescan.
inline double flip_delta(const std::vector<double>& tensor, int p, int n,
                         std::span<const int> sigma, int a) {
    double odd_sum = 0.0;
    std::vector<std::size_t> idx(p, 0);
    for (int first = 0; first < p; ++first) {
        // positions: [0, first) run over indices != a, position first == a,
        // (first, p) run over all indices
        std::fill(idx.begin(), idx.end(), 0);
        for (;;) {
            bool valid = true;
            for (int j = 0; j < first; ++j)
                if (idx[j] == static_cast<std::size_t>(a)) {
                    valid = false;
                    break;
                }
            if (valid) {
                std::size_t flat = 0;
                int sign = 1;
                int count_a = 1;
                for (int j = 0; j < p; ++j) {
                    std::size_t ij = (j == first) ? static_cast<std::size_t>(a) : idx[j];
                    flat = flat * n + ij;
                    if (j != first) {
                        if (ij == static_cast<std::size_t>(a))
                            ++count_a;
                        else
                            sign *= sigma[ij];
                    }
                }
                if (count_a % 2 == 1) odd_sum += sign * tensor[flat];
            }
            // odometer over every position except `first`
            int pos = p - 1;
            while (pos >= 0 &&
                   (pos == first || idx[pos] == static_cast<std::size_t>(n - 1))) {
                if (pos != first) idx[pos] = 0;
                --pos;
            }
            if (pos < 0) break;
            ++idx[pos];
        }
    }
    return -2.0 * sigma[a] * odd_sum;
}

} // namespace detail

// H_N(sigma) = sum_p sqrt(beta_p) N^{-(p-1)/2} sum_T J_T sigma_{T_1}...sigma_{T_p};
// over disorder, E[H_N(sigma) H_N(tau)] = N xi(sigma.tau / N).
inline double hamiltonian(const DisorderSample& d, std::span<const int> sigma) {
    if (static_cast<int>(sigma.size()) != d.n_spins)
        throw std::invalid_argument("hamiltonian: sigma length must match N");
    double acc = 0.0;
    for (std::size_t di = 0; di < d.degrees.size(); ++di)
        acc += d.scales[di] *
               detail::spin_product_sum(d.tensors[di], d.degrees[di], d.n_spins, sigma);
    return acc;
}

struct FreeEnergyEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::vector<double> samples; // per-disorder-sample values
};

// -(1/N) log int exp(sqrt(2t) H_N(sigma) - N t) dP_N(sigma) with P_N uniform
// on {-1,1}^N, by exhaustive Gray-code enumeration of all 2^N spins; the
// returned mean and standard error are over independent disorder samples.
inline FreeEnergyEstimate free_energy_plain(const Mixture& m, int n, double t, int n_samples,
                                            std::uint64_t seed, int threads = 0) {
    if (n < 1 || n > 22) throw std::invalid_argument("free_energy_plain: need 1 <= N <= 22");
    if (!(t >= 0.0)) throw std::invalid_argument("free_energy_plain: need t >= 0");
    if (n_samples < 1) throw std::invalid_argument("free_energy_plain: need n_samples >= 1");

    const std::size_t n_conf = std::size_t{1} << n;
    FreeEnergyEstimate out;
    out.samples.assign(n_samples, 0.0);
    parallel_for(
        static_cast<std::size_t>(n_samples),
        [&](std::size_t s) {
            const DisorderSample d = DisorderSample::generate(m, n, mix_seed(seed, s));
            std::vector<int> sigma(n, 1);
            // per-degree spin-product accumulators, updated per Gray-code flip
            std::vector<double> acc(d.degrees.size());
            for (std::size_t di = 0; di < d.degrees.size(); ++di) {
                acc[di] = 0.0;
                for (double g : d.tensors[di]) acc[di] += g; // all sigma = +1
            }
            auto energy = [&] {
                double e = 0.0;
                for (std::size_t di = 0; di < d.degrees.size(); ++di)
                    e += d.scales[di] * acc[di];
                return e;
            };
            std::vector<double> energies(n_conf);
            energies[0] = energy();
            for (std::size_t i = 1; i < n_conf; ++i) {
                int flip = 0;
                while (!((i >> flip) & 1)) ++flip; // Gray code: flip = ctz(i)
                for (std::size_t di = 0; di < d.degrees.size(); ++di)
                    acc[di] += detail::flip_delta(d.tensors[di], d.degrees[di], n, sigma, flip);
                sigma[flip] = -sigma[flip];
                energies[i] = energy();
            }
            const double sqrt2t = std::sqrt(2.0 * t);
            for (double& e : energies) e *= sqrt2t;
            const double lse = log_sum_exp(energies);
            out.samples[s] =
                -(lse - n * t - n * 0.6931471805599453) / static_cast<double>(n);
        },
        threads);

    double mean = 0.0;
    for (double v : out.samples) mean += v;
    mean /= n_samples;
    double var = 0.0;
    for (double v : out.samples) var += (v - mean) * (v - mean);
    var = n_samples > 1 ? var / (n_samples - 1) : 0.0;
    out.mean = mean;
    out.std_error = std::sqrt(var / n_samples);
    return out;
}

// Truncated Poisson-Dirichlet cascade on the depth-k tree with M children
// per vertex. Each vertex's decorations are the M largest points of a
// Poisson process of intensity zeta x^{-1-zeta} dx, realized as a_i^{-1/zeta}
// with a_1 < a_2 < ... the unit-rate Poisson arrival times; a leaf's weight
// is the product of decorations along its path, normalized over the M^k
// retained leaves.
struct CascadeSample {
    std::vector<double> levels;  // zeta_1 < ... < zeta_k in (0,1)
    int truncation = 0;          // M
    std::vector<double> weights; // M^k normalized leaf weights
    double truncation_diagnostic = 0.0; // max over vertices of x_M / x_1
    // P(alpha wedge alpha' >= l), l = 0..k, with the unsampled tail of each
    // vertex's decoration sum restored in the normalization (the retained-only
    // normalization is visibly biased once zeta approaches 1)
    std::vector<double> corrected_level_mass;

    std::size_t depth() const { return levels.size(); }
};

inline CascadeSample sample_cascade(const std::vector<double>& levels, int truncation,
                                    std::uint64_t seed) {
    for (double z : levels)
        if (!(z > 0.0 && z < 1.0))
            throw std::invalid_argument("cascade: levels must lie strictly in (0,1)");
    for (std::size_t l = 1; l < levels.size(); ++l)
        if (levels[l] <= levels[l - 1])
            throw std::invalid_argument("cascade: levels must be strictly increasing");
    const std::size_t k = levels.size();
    CascadeSample out;
    out.levels = levels;
    out.truncation = truncation;
    if (k == 0) {
        out.truncation = 1;
        out.weights = {1.0};
        out.corrected_level_mass = {1.0};
        return out;
    }
    if (truncation < 2) throw std::invalid_argument("cascade: need M >= 2");
    const std::size_t M = static_cast<std::size_t>(truncation);
    double leaves_d = std::pow(static_cast<double>(M), static_cast<double>(k));
    if (leaves_d > 1.6e7) throw std::invalid_argument("cascade: M^k too large");

    Rng rng(seed);
    // per level: decorations of every vertex at that depth-1 (M per vertex),
    // plus the conditional expected mass of the unsampled tail
    std::vector<std::vector<double>> deco(k);
    std::vector<std::vector<double>> tail(k);
    out.truncation_diagnostic = 0.0;
    std::size_t vertices = 1;
    for (std::size_t l = 0; l < k; ++l) {
        const double zeta = levels[l];
        deco[l].resize(vertices * M);
        tail[l].resize(vertices);
        for (std::size_t v = 0; v < vertices; ++v) {
            double arrival = 0.0;
            for (std::size_t i = 0; i < M; ++i) {
                arrival += rng.exponential();
                deco[l][v * M + i] = std::pow(arrival, -1.0 / zeta);
            }
            // E[sum of points beyond the M-th | a_M] = a_M^{1-1/zeta}/(1/zeta - 1)
            tail[l][v] = std::pow(arrival, 1.0 - 1.0 / zeta) / (1.0 / zeta - 1.0);
            out.truncation_diagnostic = std::max(
                out.truncation_diagnostic, deco[l][v * M + M - 1] / deco[l][v * M]);
        }
        vertices *= M;
    }

    // leaf weights, normalized over retained leaves
    const std::size_t n_leaves = vertices;
    out.weights.assign(n_leaves, 1.0);
    std::size_t block = n_leaves;
    for (std::size_t l = 0; l < k; ++l) {
        block /= M; // leaves sharing one vertex at depth l+1
        for (std::size_t leaf = 0; leaf < n_leaves; ++leaf)
            out.weights[leaf] *= deco[l][leaf / block];
        }
    double total = 0.0;
    for (double w : out.weights) total += w;
    for (double& w : out.weights) w /= total;

    // tail-corrected subtree masses, bottom-up: Z_v = sum_i x_i Z_{vi} + tail_v * mean_i Z_{vi}
    out.corrected_level_mass.assign(k + 1, 0.0);
    std::vector<std::vector<double>> zs(k + 1);
    zs[k].assign(n_leaves, 1.0);
    for (std::size_t l = k; l-- > 0;) {
        const std::size_t parents = zs[l + 1].size() / M;
        zs[l].assign(parents, 0.0);
        for (std::size_t v = 0; v < parents; ++v) {
            double sum = 0.0, mean_child = 0.0;
            for (std::size_t i = 0; i < M; ++i) {
                sum += deco[l][v * M + i] * zs[l + 1][v * M + i];
                mean_child += zs[l + 1][v * M + i];
            }
            zs[l][v] = sum + tail[l][v] * (mean_child / M);
        }
    }
    // P(wedge >= l) = sum over vertices u at depth l of (path decoration
    // product times Z_u / Z_root)^2
    const double z_root = zs[0][0];
    std::vector<double> path_prod(1, 1.0);
    out.corrected_level_mass[0] = 1.0;
    for (std::size_t l = 1; l <= k; ++l) {
        std::vector<double> next(path_prod.size() * M);
        for (std::size_t v = 0; v < path_prod.size(); ++v)
            for (std::size_t i = 0; i < M; ++i)
                next[v * M + i] = path_prod[v] * deco[l - 1][v * M + i];
        path_prod = std::move(next);
        double mass2 = 0.0;
        for (std::size_t v = 0; v < path_prod.size(); ++v) {
            const double share = path_prod[v] * zs[l][v] / z_root;
            mass2 += share * share;
        }
        out.corrected_level_mass[l] = mass2;
    }
    return out;
}

struct OverlapEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
};

// Probability that two leaves drawn independently with the cascade weights
// agree to exactly the given depth; targets zeta_{l+1} - zeta_l.
inline OverlapEstimate overlap_statistic(const std::vector<CascadeSample>& samples, int level) {
    if (samples.empty()) throw std::invalid_argument("overlap: need at least one sample");
    const std::size_t k = samples.front().depth();
    if (level < 0 || static_cast<std::size_t>(level) > k)
        throw std::invalid_argument("overlap: level out of range");
    std::vector<double> vals(samples.size());
    for (std::size_t s = 0; s < samples.size(); ++s) {
        const auto& c = samples[s];
        if (c.depth() != k || c.levels != samples.front().levels)
            throw std::invalid_argument("overlap: samples must share depth and levels");
        const double p_ge = c.corrected_level_mass[level];
        const double p_gt =
            static_cast<std::size_t>(level) < k ? c.corrected_level_mass[level + 1] : 0.0;
        vals[s] = p_ge - p_gt;
    }
    OverlapEstimate out;
    for (double v : vals) out.estimate += v;
    out.estimate /= vals.size();
    double var = 0.0;
    for (double v : vals) var += (v - out.estimate) * (v - out.estimate);
    var = vals.size() > 1 ? var / (vals.size() - 1) : 0.0;
    out.std_error = std::sqrt(var / vals.size());
    return out;
}

// Enriched free energy at N = 1 with Ising single-site law, by tensor
// Gauss-Hermite quadrature over the cascade recursion
//   X_k = log int exp(sqrt(2t) H_1(sigma) - t xi(1) + h sigma - q_k) dP_1,
//   X_{l-1} = zeta_l^{-1} log E_{y_l} exp(zeta_l X_l),
// with h = sum_l sqrt(2(q_l - q_{l-1})) y_l, and the correlated pair
// (H_1(1), H_1(-1)) realized through its 2x2 covariance Cholesky factor (for
// even mixtures the pair collapses to a single Gaussian).
inline double enriched_free_energy_n1(const Mixture& m, double t, const DiscreteMeasure& mu,
                                      int quad_nodes = 80) {
    if (!(t >= 0.0)) throw std::invalid_argument("enriched_n1: need t >= 0");
    if (quad_nodes < 2) throw std::invalid_argument("enriched_n1: need quad_nodes >= 2");
    const std::size_t k = mu.size() - 1;
    if (k > 2)
        throw std::invalid_argument(
            "enriched_n1: unsupported size k > 2; use the Monte Carlo free energy instead");

    const double var = m(1.0);          // Var H_1(sigma) = xi(1)
    const double cov = m(-1.0);         // Cov(H_1(1), H_1(-1)) = xi(-1)
    const double chol_a = std::sqrt(var);
    const double chol_b = cov / chol_a;
    const double chol_c2 = std::max(0.0, var - chol_b * chol_b);
    const double chol_c = std::sqrt(chol_c2);
    const bool two_disorder_dims = t > 0.0 && chol_c > 1e-12;
    const std::size_t dims = (k + 1) + (t > 0.0 ? (two_disorder_dims ? 2 : 1) : 0);
    if (dims > 4)
        throw std::invalid_argument(
            "enriched_n1: quadrature dimension exceeds 4 (k too large); use the Monte Carlo "
            "free energy instead");

    const auto gh = gauss_hermite(quad_nodes);
    const auto cum = mu.cumulative();
    std::vector<double> zeta(k + 2);
    zeta[0] = 0.0;
    for (std::size_t l = 0; l + 1 < cum.size(); ++l) zeta[l + 1] = cum[l];
    zeta[k + 1] = 1.0;
    std::vector<double> sq(k + 1);
    sq[0] = std::sqrt(2.0 * mu.atoms[0]);
    for (std::size_t l = 1; l <= k; ++l)
        sq[l] = std::sqrt(2.0 * (mu.atoms[l] - mu.atoms[l - 1]));
    const double qk = mu.atoms.back();
    const double sqrt2t = std::sqrt(2.0 * t);

    // depth-first recursion over levels, one active frame per level, so a
    // per-level scratch row is safe; h is the accumulated external field
    std::vector<std::vector<double>> scratch(k + 1, std::vector<double>(quad_nodes));
    auto recurse = [&](auto&& self, std::size_t l, double h, double a_plus,
                       double a_minus) -> double {
        if (l == k + 1) {
            // X_k: log of the P_1 = Ising average, log-sum-exp form
            const double e1 = a_plus + h;
            const double e2 = a_minus - h;
            const double mx = std::max(e1, e2);
            return mx + std::log(0.5 * (std::exp(e1 - mx) + std::exp(e2 - mx))) - t * var - qk;
        }
        auto& vals = scratch[l];
        for (int i = 0; i < quad_nodes; ++i)
            vals[i] = self(self, l + 1, h + sq[l] * gh.nodes[i], a_plus, a_minus);
        const double z = zeta[l];
        if (z <= 0.0) {
            double acc = 0.0;
            for (int i = 0; i < quad_nodes; ++i) acc += gh.weights[i] * vals[i];
            return acc;
        }
        double mx = -std::numeric_limits<double>::infinity();
        for (double v : vals) mx = std::max(mx, v * z);
        double acc = 0.0;
        for (int i = 0; i < quad_nodes; ++i) acc += gh.weights[i] * std::exp(z * vals[i] - mx);
        return (mx + std::log(acc)) / z;
    };

    double value = 0.0;
    if (t == 0.0) {
        value = recurse(recurse, 0, 0.0, 0.0, 0.0);
    } else if (!two_disorder_dims) {
        for (int i = 0; i < quad_nodes; ++i) {
            const double g1 = gh.nodes[i];
            value += gh.weights[i] * recurse(recurse, 0, 0.0, sqrt2t * chol_a * g1,
                                             sqrt2t * chol_b * g1);
        }
    } else {
        for (int i = 0; i < quad_nodes; ++i)
            for (int j = 0; j < quad_nodes; ++j) {
                const double g1 = gh.nodes[i], g2 = gh.nodes[j];
                value += gh.weights[i] * gh.weights[j] *
                         recurse(recurse, 0, 0.0, sqrt2t * chol_a * g1,
                                 sqrt2t * (chol_b * g1 + chol_c * g2));
            }
    }
    return -value;
}

} // namespace pspin

#endif
