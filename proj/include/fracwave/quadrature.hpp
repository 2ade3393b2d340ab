#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace fracwave {

/// Nodes and weights of a quadrature rule on the reference interval [-1, 1].
/// Nodes are sorted ascending; weights are strictly positive and sum to the
/// integral of the weight function over [-1, 1].
struct QuadRule {
    std::vector<double> nodes;
    std::vector<double> weights;
    std::size_t size() const { return nodes.size(); }
};

/// log(Gamma(x)) for x > 0 via the Lanczos approximation (g = 7, 9 terms),
/// with the reflection formula below x = 1/2.  Relative error is well below
/// 1e-13 over the range used here.
inline double ln_gamma(double x) {
    if (!(x > 0.0))
        throw std::invalid_argument("ln_gamma: argument must be positive");
    static const double lanczos[9] = {
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    };
    if (x < 0.5) {
        // Gamma(x) Gamma(1-x) = pi / sin(pi x)
        return std::log(M_PI / std::sin(M_PI * x)) - ln_gamma(1.0 - x);
    }
    const double z = x - 1.0;
    double acc = lanczos[0];
    for (int i = 1; i < 9; ++i)
        acc += lanczos[i] / (z + i);
    const double t = z + 7.5;
    return 0.5 * std::log(2.0 * M_PI) + (z + 0.5) * std::log(t) - t + std::log(acc);
}

/// log of the Beta function B(x, y) = Gamma(x) Gamma(y) / Gamma(x + y).
inline double ln_beta(double x, double y) {
    return ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y);
}

inline double beta_fn(double x, double y) { return std::exp(ln_beta(x, y)); }

namespace detail {

// Implicit-shift QL iteration for a symmetric tridiagonal matrix,
// accumulating only the first row of the eigenvector matrix: that is all
// Golub-Welsch needs (w_i = mu0 * q_{1i}^2).  d holds the diagonal and on
// return the eigenvalues; e holds the subdiagonal in e[0..n-2].
inline void tridiag_eigen_first_row(std::vector<double>& d, std::vector<double>& e,
                                    std::vector<double>& z) {
    const int n = static_cast<int>(d.size());
    z.assign(n, 0.0);
    if (n == 0) return;
    z[0] = 1.0;
    if (n == 1) return;
    e.resize(n, 0.0);
    e[n - 1] = 0.0;
    for (int l = 0; l < n; ++l) {
        int iter = 0;
        int m;
        do {
            for (m = l; m < n - 1; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= 1e-15 * dd) break;
            }
            if (m != l) {
                if (iter++ == 60)
                    throw std::runtime_error("quadrature: tridiagonal QL failed to converge");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
                double s = 1.0, c = 1.0, p = 0.0;
                for (int i = m - 1; i >= l; --i) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    f = z[i + 1];
                    z[i + 1] = s * z[i] + c * f;
                    z[i] = c * z[i] - s * f;
                }
                if (r == 0.0 && m - 1 >= l) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
}

struct RuleKey {
    int k;
    long long a_q, b_q;  // exponents quantized at 1e-12
    bool operator<(const RuleKey& o) const {
        return std::tie(k, a_q, b_q) < std::tie(o.k, o.a_q, o.b_q);
    }
};

inline QuadRule build_gauss_jacobi(int k, double a, double b) {
    // Recurrence coefficients of the monic Jacobi polynomials for the weight
    // (1-x)^a (1+x)^b, assembled into the symmetric tridiagonal Jacobi matrix.
    std::vector<double> diag(k), sub(k, 0.0);
    const double ab = a + b;
    diag[0] = (b - a) / (ab + 2.0);
    for (int i = 2; i <= k; ++i) {
        const double den = (2.0 * i - 2.0 + ab) * (2.0 * i + ab);
        diag[i - 1] = (b * b - a * a) / den;
    }
    if (k > 1) {
        sub[0] = std::sqrt(4.0 * (a + 1.0) * (b + 1.0) /
                           ((ab + 2.0) * (ab + 2.0) * (ab + 3.0)));
        for (int i = 2; i < k; ++i) {
            const double tn = 2.0 * i + ab;
            sub[i - 1] = std::sqrt(4.0 * i * (i + a) * (i + b) * (i + ab) /
                                   (tn * tn * (tn + 1.0) * (tn - 1.0)));
        }
    }
    std::vector<double> z;
    tridiag_eigen_first_row(diag, sub, z);
    const double mu0 = std::exp((ab + 1.0) * std::log(2.0) + ln_beta(a + 1.0, b + 1.0));
    QuadRule rule;
    rule.nodes.resize(k);
    rule.weights.resize(k);
    std::vector<int> order(k);
    for (int i = 0; i < k; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int i, int j) { return diag[i] < diag[j]; });
    for (int i = 0; i < k; ++i) {
        rule.nodes[i] = diag[order[i]];
        rule.weights[i] = mu0 * z[order[i]] * z[order[i]];
    }
    return rule;
}

inline std::map<RuleKey, QuadRule>& rule_cache() {
    static std::map<RuleKey, QuadRule> cache;
    return cache;
}

inline std::mutex& rule_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace detail

/// k-point Gauss-Jacobi rule on [-1, 1] for the weight (1-x)^a (1+x)^b,
/// a, b > -1.  Exact for polynomials of degree <= 2k-1 against that weight.
/// Rules are cached; the cache key quantizes the exponents at 1e-12.
inline const QuadRule& gauss_jacobi(int k, double a, double b) {
    if (k < 1 || k > 64)
        throw std::invalid_argument("gauss_jacobi: point count must be in [1, 64]");
    if (!(a > -1.0) || !(b > -1.0))
        throw std::invalid_argument("gauss_jacobi: weight exponents must exceed -1");
    detail::RuleKey key{k, std::llround(a * 1e12), std::llround(b * 1e12)};
    std::lock_guard<std::mutex> lock(detail::rule_mutex());
    auto& cache = detail::rule_cache();
    auto it = cache.find(key);
    if (it == cache.end())
        it = cache.emplace(key, detail::build_gauss_jacobi(k, a, b)).first;
    return it->second;
}

/// k-point Gauss-Legendre rule on [-1, 1], exact for degree <= 2k-1.
inline const QuadRule& gauss_legendre(int k) {
    if (k < 1 || k > 64)
        throw std::invalid_argument("gauss_legendre: point count must be in [1, 64]");
    return gauss_jacobi(k, 0.0, 0.0);
}

}  // namespace fracwave
