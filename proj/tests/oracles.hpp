#pragma once

// Brute-force reference computations used by the test suite.  Everything in
// here is deliberately independent of the library's own evaluation paths:
// plain series, closed-form moments, and composite quadrature with geometric
// refinement toward singular endpoints.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include <fracwave/quadrature.hpp>

namespace oracles {

inline double binom(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r *= static_cast<double>(n - k + i) / i;
    return r;
}

/// Closed form of int_{-1}^{1} (1-x)^a x^j dx via the substitution u = (1-x)/2.
inline double jacobi_monomial_moment(double a, int j) {
    double sum = 0.0;
    for (int q = 0; q <= j; ++q)
        sum += binom(j, q) * std::pow(-2.0, q) / (a + q + 1.0);
    return std::pow(2.0, a + 1.0) * sum;
}

/// Composite Gauss-Legendre integration of f over (lo, hi) with geometric
/// panel refinement toward either endpoint.  `levels` halvings push the
/// innermost panel to (hi-lo)*2^-levels, which resolves integrable endpoint
/// singularities and endpoint derivative blow-ups to near machine accuracy.
inline double graded_gl(const std::function<double(double)>& f, double lo, double hi,
                        bool refine_lo, bool refine_hi, int levels = 48, int pts = 12) {
    if (!(hi > lo)) return 0.0;
    const auto& rule = fracwave::gauss_legendre(pts);
    auto panel = [&](double a, double b) {
        double s = 0.0;
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (std::size_t q = 0; q < rule.size(); ++q)
            s += rule.weights[q] * f(mid + half * rule.nodes[q]);
        return s * half;
    };
    std::vector<double> cuts;
    cuts.push_back(lo);
    const double len = hi - lo;
    if (refine_lo) {
        std::vector<double> asc;
        for (int l = levels; l >= 1; --l) {
            const double c = lo + len * 0.5 * std::pow(0.5, l);
            if (c > cuts.back()) asc.push_back(c);
        }
        for (double c : asc) cuts.push_back(c);
    }
    if (refine_hi) {
        cuts.push_back(lo + len * 0.5);
        for (int l = 2; l <= levels; ++l) {
            const double c = hi - len * 0.5 * std::pow(0.5, l);
            if (c > cuts.back() && c < hi) cuts.push_back(c);
        }
        cuts.push_back(hi);
    } else {
        if (cuts.back() < hi) cuts.push_back(hi);
    }
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) total += panel(cuts[i], cuts[i + 1]);
    return total;
}

/// Composite integration over (lo, hi) split at interior knots, with
/// geometric refinement toward every split point and both endpoints.
inline double graded_gl_multi(const std::function<double(double)>& f, double lo, double hi,
                              std::vector<double> knots, int levels = 44, int pts = 12) {
    knots.erase(std::remove_if(knots.begin(), knots.end(),
                               [&](double k) { return !(k > lo && k < hi); }),
                knots.end());
    std::sort(knots.begin(), knots.end());
    double total = 0.0;
    double a = lo;
    for (double k : knots) {
        total += graded_gl(f, a, k, true, true, levels, pts);
        a = k;
    }
    total += graded_gl(f, a, hi, true, true, levels, pts);
    return total;
}

/// Alternating Mittag-Leffler series E_gamma(-x) for x >= 0 at desk scale.
inline double mittag_leffler_neg(double gamma, double x) {
    double sum = 0.0, term;
    double xk = 1.0;
    for (int k = 0; k < 220; ++k) {
        term = xk / std::exp(fracwave::ln_gamma(gamma * k + 1.0));
        sum += (k % 2 == 0) ? term : -term;
        if (std::abs(term) < 1e-18 && k > 4) break;
        xk *= x;
    }
    return sum;
}

}  // namespace oracles
