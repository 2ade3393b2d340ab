#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "fracwave/fracops.hpp"
#include "fracwave/harness.hpp"
#include "fracwave/problems.hpp"
#include "fracwave/spacefem.hpp"
#include "fracwave/stepper.hpp"
#include "fracwave/temporal_basis.hpp"

namespace fracwave {
namespace checks {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

namespace detail {

inline const double pi = std::acos(-1.0);

inline double ml_neg(double gamma, double x) {
    double acc = 0.0, scale = 0.0;
    double sign = 1.0, xp = 1.0;
    for (int k = 0; k < 220; ++k) {
        const double term = sign * xp * std::exp(-ln_gamma(gamma * k + 1.0));
        acc += term;
        scale = std::max(scale, std::abs(term));
        if (k > 4 && std::abs(term) < 1e-18 * std::max(1.0, scale)) break;
        sign = -sign;
        xp *= x;
    }
    return acc;
}

inline std::string describe(double worst, double allowed) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "worst deviation %.3e, allowed %.3e", worst, allowed);
    return buf;
}

inline CheckResult verdict(const std::string& name, double worst, double allowed) {
    return {name, worst <= allowed, describe(worst, allowed)};
}

}  // namespace detail

// Composing fractional integrals of orders a and b must match the single
// integral of order a+b. The outer convolution is quadratured with a
// two-sided Jacobi weight so the mapped integrand is polynomial.
inline CheckResult semigroup_identity() {
    const auto grid = make_grid(5, 2.0, 1.0);
    const auto v = interpolate_ptau(grid, 3, [](double t) { return t * (1.0 - t); });
    const double a = 0.45, b = 0.3;
    const auto& rule = gauss_jacobi(12, a - 1.0, 1.0 + b);

    double worst = 0.0;
    for (double t : {0.33, 0.71, 1.0}) {
        double acc = 0.0;
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const double u = 0.5 * (rule.nodes[q] + 1.0);
            acc += rule.weights[q] * rl_integral_pw(b, v, t * u) / std::pow(u, 1.0 + b);
        }
        const double lhs =
            std::pow(t, a) * std::pow(2.0, -(a + b + 1.0)) * acc * std::exp(-ln_gamma(a));
        const double rhs = rl_integral_pw(a + b, v, t);
        worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
    }
    return detail::verdict("semigroup identity", worst, 1e-9);
}

// The left/right derivative pairing of t(1-t), zero-extended, against the
// closed-form Fourier seminorm: pairing = cos(alpha pi) |v|^2_{H^alpha} with
// |v|^2 = (1/pi) int_0^inf xi^(2 alpha) |vhat|^2 dxi and
// |vhat(xi)|^2 = 16 (sin(xi/2) - (xi/2) cos(xi/2))^2 / xi^6.
inline CheckResult coercive_pairing() {
    const auto grid = make_grid(4, 1.0, 1.0);
    const auto v = interpolate_ptau(grid, 3, [](double t) { return t * (1.0 - t); });
    const auto& panel = gauss_legendre(16);

    double worst = 0.0;
    bool positive = true;
    for (double alpha : {0.1, 0.25, 0.4}) {
        const auto& rule = gauss_jacobi(24, 1.0 - alpha, 1.0 - alpha);
        double pair = 0.0;
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const double t = 0.5 * (rule.nodes[q] + 1.0);
            const double left = rl_derivative_pw(alpha, v, t, Side::left);
            const double right = rl_derivative_pw(alpha, v, t, Side::right);
            pair += rule.weights[q] * left * right /
                    (std::pow(t, 1.0 - alpha) * std::pow(1.0 - t, 1.0 - alpha));
        }
        pair *= std::pow(2.0, -(3.0 - 2.0 * alpha));
        positive = positive && pair > 0.0;

        double semi = 0.0;
        for (int k = 0; k < 200; ++k) {
            const double lo = k * detail::pi, hi = (k + 1) * detail::pi;
            for (std::size_t q = 0; q < panel.size(); ++q) {
                const double xi = 0.5 * (lo + hi) + 0.5 * (hi - lo) * panel.nodes[q];
                const double f = std::sin(0.5 * xi) - 0.5 * xi * std::cos(0.5 * xi);
                semi += 0.5 * (hi - lo) * panel.weights[q] * std::pow(xi, 2.0 * alpha) * 16.0 *
                        f * f / std::pow(xi, 6.0);
            }
        }
        const double cutoff = 200.0 * detail::pi;
        semi += 2.0 * std::pow(cutoff, 2.0 * alpha - 3.0) / (3.0 - 2.0 * alpha);
        semi /= detail::pi;

        const double oracle = std::cos(alpha * detail::pi) * semi;
        worst = std::max(worst, std::abs(pair - oracle) / oracle);
    }
    CheckResult out = detail::verdict("coercive pairing", worst, 0.02);
    if (!positive) {
        out.pass = false;
        out.detail += "; pairing not positive";
    }
    return out;
}

// Slabs never feel trial functions that live in their future.
inline CheckResult causality_blocks() {
    const auto grid = make_grid(6, 1.4, 1.0);
    double worst = 0.0;
    for (int m = 1; m <= 3; ++m) {
        for (auto [src, tgt] : {std::pair<int, int>{3, 1}, {5, 2}, {6, 4}, {2, 1}}) {
            const auto block = frac_coupling_block(0.21, grid, src, tgt, m);
            for (int a = 0; a < m; ++a)
                for (int b = 0; b < m; ++b)
                    worst = std::max(worst, std::abs(block.F[static_cast<std::size_t>(a)]
                                                            [static_cast<std::size_t>(b)]));
        }
    }
    return detail::verdict("causality blocks", worst, 0.0);
}

// Dilating the whole grid by c scales every coupling entry by c^(-2 gamma0).
inline CheckResult kernel_scaling() {
    const double g0 = 0.23, c = 2.5;
    const auto base = make_grid(5, 2.0, 1.0);
    const auto dilated = make_grid(5, 2.0, c);
    const double factor = std::pow(c, -2.0 * g0);

    auto block_deviation = [&](int src, int tgt, int m) {
        const auto f1 = frac_coupling_block(g0, base, src, tgt, m);
        const auto f2 = frac_coupling_block(g0, dilated, src, tgt, m);
        double dev = 0.0;
        for (int a = 0; a < m; ++a) {
            for (int b = 0; b < m; ++b) {
                const double e1 = f1.F[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
                const double e2 = f2.F[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
                if (std::abs(e1) < 1e-14) continue;
                dev = std::max(dev, std::abs(e2 / (e1 * factor) - 1.0));
            }
        }
        return dev;
    };

    double worst = 0.0;
    for (auto [src, tgt] : {std::pair<int, int>{2, 4}, {3, 3}, {1, 5}})
        worst = std::max(worst, block_deviation(src, tgt, 2));
    for (int m = 1; m <= 3; ++m) worst = std::max(worst, block_deviation(3, 3, m));
    return detail::verdict("kernel scaling", worst, 1e-10);
}

namespace detail {

inline CheckResult reproduction_check(const std::string& name, int m, int degree) {
    const double gamma = 1.5;
    const FeSpace space = build_fe_space(build_unit_square_mesh(3), 2);
    const auto field = nodal_interpolant(space, [](double x, double y) {
        return std::sin(pi * x) * std::sin(pi * y);
    });
    auto ops = assemble_operators(space);
    apply_dirichlet(ops.mass, space.dirichlet_mask);
    apply_dirichlet(ops.stiffness, space.dirichlet_mask);

    MarchConfig cfg;
    cfg.gamma = gamma;
    cfg.m = m;
    cfg.grid = make_grid(4, 1.5, 1.0);
    cfg.space = space;
    cfg.tol = 1e-12;

    std::vector<double> stiff_pair, mass_pair;
    ops.stiffness.multiply(field, stiff_pair);
    ops.mass.multiply(field, mass_pair);

    ErrorReport rep;
    if (degree == 1) {
        cfg.u1 = field;
        cfg.load.profiles.push_back(TimeProfile{1.0, {}});
        cfg.load.spatial.push_back(stiff_pair);
        const auto traj = march(cfg);
        rep = compute_errors(
            traj, [](double t) { return t; }, [](double) { return 1.0; }, field);
    } else {
        const double coef = std::exp(ln_gamma(3.0) - ln_gamma(3.0 - gamma));
        cfg.load.profiles.push_back(TimeProfile{2.0 - gamma, [coef](double) { return coef; }});
        cfg.load.spatial.push_back(mass_pair);
        cfg.load.profiles.push_back(TimeProfile{2.0, {}});
        cfg.load.spatial.push_back(stiff_pair);
        const auto traj = march(cfg);
        rep = compute_errors(
            traj, [](double t) { return t * t; }, [](double t) { return 2.0 * t; }, field);
    }
    return verdict(name, std::max(rep.E1, rep.E2), 1e-8);
}

}  // namespace detail

// A field moving linearly in time is exact for every trial degree.
inline CheckResult linear_reproduction() {
    return detail::reproduction_check("linear reproduction", 1, 1);
}

// A field moving quadratically in time is exact from degree two up.
inline CheckResult quadratic_reproduction() {
    return detail::reproduction_check("quadratic reproduction", 2, 2);
}

// The elliptic projection returns a quartic that lies in the quartic space.
inline CheckResult ritz_reproduction() {
    const FeSpace space = build_fe_space(build_unit_square_mesh(2), 4);
    const auto proj = ritz_projection(space, [](double x, double y) {
        return std::array<double, 2>{(1.0 - 2.0 * x) * y * (1.0 - y),
                                     x * (1.0 - x) * (1.0 - 2.0 * y)};
    });
    const auto exact = nodal_interpolant(space, [](double x, double y) {
        return ManufacturedProblem::phi(x, y);
    });
    double worst = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i)
        worst = std::max(worst, std::abs(proj[i] - exact[i]));
    return detail::verdict("elliptic projection reproduction", worst, 1e-10);
}

// The temporal scheme against the product-integration reference, and the
// reference against the relaxation series.
inline CheckResult scalar_oracle_agreement() {
    ScalarConfig cfg;
    cfg.gamma = 1.5;
    cfg.m = 2;
    cfg.grid = make_grid(256, 1.0, 1.0);
    cfg.lambda = 1.0;
    cfg.c0 = 0.0;
    cfg.c1 = 0.0;
    cfg.g = TimeProfile{0.0, [](double) { return 1.0; }};
    const auto traj = march_scalar(cfg);
    const double marched = traj.at_breakpoint(256);

    const double ref = scalar_ode_reference(
        1.5, 1.0, 0.0, 0.0, [](double) { return 1.0; }, {1.0}, 4096)[0];
    const double series = 1.0 - detail::ml_neg(1.5, 1.0);

    const double gap_march = std::abs(marched - ref);
    const double gap_series = std::abs(ref - series);
    CheckResult out;
    out.name = "scalar oracle agreement";
    out.pass = gap_march <= 1e-5 && gap_series <= 1e-6;
    char buf[128];
    std::snprintf(buf, sizeof buf, "march vs reference %.3e (allowed 1e-05), reference vs series %.3e (allowed 1e-06)",
                  gap_march, gap_series);
    out.detail = buf;
    return out;
}

inline std::vector<CheckResult> run_all() {
    return {semigroup_identity(),    coercive_pairing(),       causality_blocks(),
            kernel_scaling(),        linear_reproduction(),    quadratic_reproduction(),
            ritz_reproduction(),     scalar_oracle_agreement()};
}

}  // namespace checks
}  // namespace fracwave
