#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "quadrature.hpp"
#include "temporal_basis.hpp"
#include "timegrid.hpp"

namespace fracwave {

namespace detail {

inline double binom_int(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double v = 1.0;
    for (int i = 1; i <= k; ++i) v = v * (n - k + i) / i;
    return v;
}

// coefficients of p(1 - theta) given coefficients of p(theta)
inline std::vector<double> reflect_poly(const std::vector<double>& p) {
    std::vector<double> q(p.size(), 0.0);
    for (std::size_t k = 0; k < p.size(); ++k) {
        double sign = 1.0;
        for (std::size_t l = 0; l <= k; ++l) {
            q[l] += sign * p[k] * binom_int(static_cast<int>(k), static_cast<int>(l));
            sign = -sign;
        }
    }
    return q;
}

}  // namespace detail

// Integral of (t-c)^e over [t0, t1] written with d = t0-c >= 0 and h = t1-t0.
// The expm1 route keeps accuracy when h << d.
inline double power_integral(double e, double d, double h) {
    if (!(e > -1.0)) throw std::invalid_argument("power_integral: exponent must exceed -1");
    if (!(d >= 0.0) || !(h > 0.0)) throw std::invalid_argument("power_integral: bad interval");
    const double e1 = e + 1.0;
    if (d == 0.0) return std::pow(h, e1) / e1;
    if (h <= 10.0 * d) return std::pow(d, e1) * std::expm1(e1 * std::log1p(h / d)) / e1;
    return (std::pow(d + h, e1) - std::pow(d, e1)) / e1;
}

// Integral over [t0, t1] of (t-c)^nu * q((t-t0)/(t1-t0)) for a polynomial q
// given by ascending local monomial coefficients p. Requires c <= t0.
inline double poly_power_moment(const std::vector<double>& p, double nu, double c, double t0,
                                double t1) {
    const double h = t1 - t0;
    const double d = t0 - c;
    if (!(h > 0.0)) throw std::invalid_argument("poly_power_moment: empty interval");
    if (!(d >= 0.0)) throw std::invalid_argument("poly_power_moment: anchor must sit left of interval");
    if (d == 0.0) {
        if (!(nu > -1.0)) throw std::invalid_argument("poly_power_moment: nonintegrable exponent");
        double s = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) s += p[k] / (k + nu + 1.0);
        return std::pow(h, nu + 1.0) * s;
    }
    const double rho = h / d;
    if (rho <= 0.5) {
        // (t-c)^nu = d^nu (1 + rho*theta)^nu expanded binomially; terms decay
        // at least geometrically with ratio rho.
        double series = 0.0;
        double bin = 1.0;  // binom(nu, n) * rho^n
        double scale_probe = 0.0;
        for (int n = 0; n < 400; ++n) {
            double mn = 0.0;
            for (std::size_t k = 0; k < p.size(); ++k) mn += p[k] / (n + k + 1.0);
            const double term = bin * mn;
            series += term;
            scale_probe = std::max(scale_probe, std::abs(term));
            if (std::abs(term) <= 1e-17 * scale_probe && n > 2) break;
            bin *= (nu - n) / (n + 1.0) * rho;
        }
        return h * std::pow(d, nu) * series;
    }
    // adjacent interval: expand theta^k in powers of (t-c)
    double total = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (p[k] == 0.0) continue;
        double inner = 0.0;
        for (std::size_t l = 0; l <= k; ++l) {
            const double w = detail::binom_int(static_cast<int>(k), static_cast<int>(l)) *
                             std::pow(-d, static_cast<double>(k - l));
            inner += w * power_integral(nu + static_cast<double>(l), d, h);
        }
        total += p[k] * inner / std::pow(h, static_cast<double>(k));
    }
    return total;
}

// Integral of (t-s)^(-mu) (s-a)^k over s in (a, min(b,t)), for a < b <= t, mu < 1.
inline double kernel_moment(double mu, int k, double a, double b, double t) {
    if (!(mu < 1.0)) throw std::invalid_argument("kernel_moment: mu must be < 1");
    if (!(a < b)) throw std::invalid_argument("kernel_moment: need a < b");
    if (!(b <= t)) throw std::invalid_argument("kernel_moment: need b <= t");
    if (k < 0 || k > 12) throw std::invalid_argument("kernel_moment: power out of range");
    const double bma = b - a;
    if (t == b) return beta_fn(k + 1.0, 1.0 - mu) * std::pow(bma, k + 1.0 - mu);
    const double tma = t - a;
    const double z = bma / tma;
    if (z <= 0.75) {
        // expand the kernel about s = a; all factors stay positive for mu >= 0
        double series = 0.0;
        double poch = 1.0;  // (mu)_n z^n / n!
        double scale_probe = 0.0;
        for (int n = 0; n < 400; ++n) {
            const double term = poch / (k + n + 1.0);
            series += term;
            scale_probe = std::max(scale_probe, std::abs(term));
            if (std::abs(term) <= 1e-17 * scale_probe && n > 2) break;
            poch *= (mu + n) / (n + 1.0) * z;
        }
        return std::pow(bma, k + 1.0) * std::pow(tma, -mu) * series;
    }
    // t close to b: complete integral minus the tail over (b, t)
    double tail = 0.0;
    const double tmb = t - b;
    for (int l = 0; l <= k; ++l)
        tail += detail::binom_int(k, l) * std::pow(bma, static_cast<double>(k - l)) *
                beta_fn(l + 1.0, 1.0 - mu) * std::pow(tmb, l + 1.0 - mu);
    return beta_fn(k + 1.0, 1.0 - mu) * std::pow(tma, k + 1.0 - mu) - tail;
}

// Riemann-Liouville integral of a slab-wise polynomial at time t.
inline double rl_integral_pw(double alpha, const PiecewisePolynomial& v, double t) {
    if (!(alpha > 0.0 && alpha <= 3.0))
        throw std::invalid_argument("rl_integral_pw: alpha must lie in (0,3]");
    const TimeGrid& g = v.grid();
    if (!(t > 0.0 && t <= g.T)) throw std::invalid_argument("rl_integral_pw: t out of (0,T]");
    const double mu = 1.0 - alpha;
    double acc = 0.0;
    for (int i = 1; i <= g.J; ++i) {
        const double a = g.t[static_cast<std::size_t>(i) - 1];
        if (!(a < t)) break;
        const double e = std::min(g.t[static_cast<std::size_t>(i)], t);
        const double tau = g.tau[static_cast<std::size_t>(i) - 1];
        const std::vector<double> p = v.slab_monomial(i);
        double tk = 1.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            if (p[k] != 0.0)
                acc += p[k] / tk * kernel_moment(mu, static_cast<int>(k), a, e, t);
            tk *= tau;
        }
    }
    return std::exp(-ln_gamma(alpha)) * acc;
}

enum class Side { left, right };

// Riemann-Liouville derivative of order alpha in (0,1) of a slab-wise
// polynomial, at a point strictly inside a slab. The right-sided version is
// evaluated through reflection about T.
inline double rl_derivative_pw(double alpha, const PiecewisePolynomial& v, double t,
                               Side side = Side::left) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("rl_derivative_pw: alpha must lie in (0,1)");
    const TimeGrid& g = v.grid();
    if (side == Side::right) return rl_derivative_pw(alpha, reflect(v), g.T - t, Side::left);
    if (!(t > 0.0 && t < g.T)) throw std::invalid_argument("rl_derivative_pw: t out of (0,T)");
    for (double bp : g.t)
        if (t == bp) throw std::invalid_argument("rl_derivative_pw: t must avoid breakpoints");
    const double cg = std::exp(-ln_gamma(1.0 - alpha));
    double acc = 0.0;
    for (int i = 1; i <= g.J; ++i) {
        const double a = g.t[static_cast<std::size_t>(i) - 1];
        if (!(a < t)) break;
        const double b = g.t[static_cast<std::size_t>(i)];
        const double tau = g.tau[static_cast<std::size_t>(i) - 1];
        const std::vector<double> p = v.slab_monomial(i);
        if (t > b && t - b > 2.0 * tau) {
            // far from the support: single smooth integral, no boundary split
            acc += -alpha * poly_power_moment(detail::reflect_poly(p), -alpha - 1.0, 0.0,
                                              t - b, t - a);
            continue;
        }
        acc += p[0] * std::pow(t - a, -alpha);
        if (t > b) {
            double pend = 0.0;
            for (double pk : p) pend += pk;
            acc -= pend * std::pow(t - b, -alpha);
        }
        const double e = std::min(b, t);
        double tk = tau;
        for (std::size_t k = 1; k < p.size(); ++k) {
            if (p[k] != 0.0)
                acc += static_cast<double>(k) * p[k] / tk *
                       kernel_moment(alpha, static_cast<int>(k) - 1, a, e, t);
            tk *= tau;
        }
    }
    return cg * acc;
}

// Temporal pairing of one slab's trial-derivative modes against one slab's
// test modes through the order-2*gamma0 kernel.
struct FracCouplingBlock {
    double gamma0 = 0.0;
    int src_slab = 0;
    int tgt_slab = 0;
    std::vector<std::vector<double>> F;  // [a][b-1], a = 0..m-1, b = 1..m
};

inline FracCouplingBlock frac_coupling_block(double gamma0, const TimeGrid& grid, int i, int j,
                                             int m) {
    if (!(gamma0 > 0.0 && gamma0 < 0.5))
        throw std::invalid_argument("frac_coupling_block: gamma0 must lie in (0,1/2)");
    if (i < 1 || i > grid.J || j < 1 || j > grid.J)
        throw std::invalid_argument("frac_coupling_block: slab out of range");
    if (m < 1 || m > 3) throw std::invalid_argument("frac_coupling_block: m must be in {1,2,3}");
    FracCouplingBlock blk;
    blk.gamma0 = gamma0;
    blk.src_slab = i;
    blk.tgt_slab = j;
    blk.F.assign(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(m), 0.0));
    if (j < i) return blk;

    const double mu = 2.0 * gamma0;
    const double a = grid.t[static_cast<std::size_t>(i) - 1];
    const double b = grid.t[static_cast<std::size_t>(i)];
    const double tau_i = grid.tau[static_cast<std::size_t>(i) - 1];
    const double c = grid.t[static_cast<std::size_t>(j) - 1];
    const double d = grid.t[static_cast<std::size_t>(j)];
    const double tau_j = grid.tau[static_cast<std::size_t>(j) - 1];
    const double cg = std::exp(-ln_gamma(1.0 - mu));

    // trial derivative of mode bm on slab i, as local-theta monomials over tau_i
    std::vector<std::vector<double>> q(static_cast<std::size_t>(m));
    for (int bm = 1; bm <= m; ++bm) {
        q[static_cast<std::size_t>(bm) - 1] = detail::shifted_legendre_coeffs(bm - 1);
        for (auto& ck : q[static_cast<std::size_t>(bm) - 1]) ck /= tau_i;
    }

    if (j == i || c - b <= 2.0 * tau_i || c - b <= 0.75 * tau_j) {
        for (int am = 0; am < m; ++am) {
            const auto& w = detail::shifted_legendre_coeffs(am);
            for (int bm = 1; bm <= m; ++bm) {
                const auto& pb = q[static_cast<std::size_t>(bm) - 1];
                double acc = pb[0] * poly_power_moment(w, -mu, a, c, d);
                if (j > i) {
                    double pend = 0.0;
                    for (double pk : pb) pend += pk;
                    acc -= pend * poly_power_moment(w, -mu, b, c, d);
                }
                double tk = tau_i;
                for (std::size_t k = 1; k < pb.size(); ++k) {
                    if (pb[k] == 0.0) { tk *= tau_i; continue; }
                    const double gk = static_cast<double>(k) * pb[k] / tk;
                    if (j == i) {
                        acc += gk * beta_fn(static_cast<double>(k), 1.0 - mu) *
                               poly_power_moment(w, static_cast<double>(k) - mu, a, c, d);
                    } else {
                        double inner = beta_fn(static_cast<double>(k), 1.0 - mu) *
                                       poly_power_moment(w, static_cast<double>(k) - mu, a, c, d);
                        for (std::size_t l = 0; l < k; ++l)
                            inner -= detail::binom_int(static_cast<int>(k) - 1, static_cast<int>(l)) *
                                     std::pow(b - a, static_cast<double>(k - 1 - l)) *
                                     beta_fn(static_cast<double>(l) + 1.0, 1.0 - mu) *
                                     poly_power_moment(w, static_cast<double>(l) + 1.0 - mu, b, c, d);
                        acc += gk * inner;
                    }
                    tk *= tau_i;
                }
                blk.F[static_cast<std::size_t>(am)][static_cast<std::size_t>(bm) - 1] = cg * acc;
            }
        }
        return blk;
    }

    // distant slabs: the pairing integrand is analytic; evaluate the inner
    // convolution pointwise in its smooth single-integral form
    const auto& rule = gauss_legendre(24);
    TestBasis test(m);
    std::vector<std::vector<double>> qr(static_cast<std::size_t>(m));
    for (int bm = 1; bm <= m; ++bm)
        qr[static_cast<std::size_t>(bm) - 1] = detail::reflect_poly(q[static_cast<std::size_t>(bm) - 1]);
    for (std::size_t n = 0; n < rule.size(); ++n) {
        const double theta = 0.5 * (rule.nodes[n] + 1.0);
        const double t = c + theta * tau_j;
        const double wgt = 0.5 * tau_j * rule.weights[n];
        for (int bm = 1; bm <= m; ++bm) {
            const double val = -mu * cg *
                               poly_power_moment(qr[static_cast<std::size_t>(bm) - 1], -mu - 1.0,
                                                 0.0, t - b, t - a);
            for (int am = 0; am < m; ++am)
                blk.F[static_cast<std::size_t>(am)][static_cast<std::size_t>(bm) - 1] +=
                    wgt * test.eval(am, theta) * val;
        }
    }
    return blk;
}

// Moments of the test modes against the kernel (t-anchor)^(1-gamma)/Gamma(2-gamma).
inline std::vector<double> omega_load(double gamma, const TimeGrid& grid, int j, double anchor,
                                      int m) {
    if (!(gamma > 1.0 && gamma < 2.0))
        throw std::invalid_argument("omega_load: gamma must lie in (1,2)");
    if (j < 1 || j > grid.J) throw std::invalid_argument("omega_load: slab out of range");
    if (m < 1 || m > 3) throw std::invalid_argument("omega_load: m must be in {1,2,3}");
    const double left = grid.t[static_cast<std::size_t>(j) - 1];
    if (!(anchor >= 0.0 && anchor <= left))
        throw std::invalid_argument("omega_load: anchor must lie in [0, slab start]");
    const double scale = std::exp(-ln_gamma(2.0 - gamma));
    std::vector<double> w(static_cast<std::size_t>(m));
    for (int am = 0; am < m; ++am)
        w[static_cast<std::size_t>(am)] =
            scale * poly_power_moment(detail::shifted_legendre_coeffs(am), 1.0 - gamma, anchor,
                                      left, grid.t[static_cast<std::size_t>(j)]);
    return w;
}

}  // namespace fracwave
