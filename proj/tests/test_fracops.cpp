#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <random>

#include <fracwave/fracops.hpp>

#include "oracles.hpp"

using fracwave::frac_coupling_block;
using fracwave::kernel_moment;
using fracwave::make_grid;
using fracwave::omega_load;
using fracwave::PiecewisePolynomial;
using fracwave::poly_power_moment;
using fracwave::power_integral;
using fracwave::rl_derivative_pw;
using fracwave::rl_integral_pw;
using fracwave::Side;
using fracwave::TimeGrid;
using fracwave::detail::horner;
using fracwave::detail::shifted_legendre_coeffs;

namespace {

// int_lo^hi f(t) (t-lo)^e dt with the weight handled by a Jacobi rule
double jacobi_weighted_left(const std::function<double(double)>& f, double lo, double hi,
                            double e, int pts) {
    const auto& r = fracwave::gauss_jacobi(pts, e, 0.0);
    const double half = 0.5 * (hi - lo);
    double s = 0.0;
    for (std::size_t q = 0; q < r.size(); ++q)
        s += r.weights[q] * f(lo + half * (1.0 - r.nodes[q]));
    return std::pow(half, e + 1.0) * s;
}

// int_lo^hi f(s) (hi-s)^e ds with the weight handled by a Jacobi rule
double jacobi_weighted_right(const std::function<double(double)>& f, double lo, double hi,
                             double e, int pts) {
    const auto& r = fracwave::gauss_jacobi(pts, e, 0.0);
    const double half = 0.5 * (hi - lo);
    double s = 0.0;
    for (std::size_t q = 0; q < r.size(); ++q)
        s += r.weights[q] * f(hi - half * (1.0 - r.nodes[q]));
    return std::pow(half, e + 1.0) * s;
}

// Reference for one coupling entry, independent of the library's closed
// forms.  Same-slab blocks differentiate the convolution numerically under a
// weighted outer rule; later-slab blocks swap the integration order so every
// singular factor is carried by a Jacobi weight or sits away from the domain.
double brute_entry(double mu, const TimeGrid& g, int i, int j, int am, int bm) {
    const double a = g.t[i - 1], b = g.t[i], ti = g.tau[i - 1];
    const double c = g.t[j - 1], d = g.t[j], tj = g.tau[j - 1];
    const auto lb = shifted_legendre_coeffs(bm - 1);
    auto phip = [&](double s) { return horner(lb, (s - a) / ti) / ti; };
    const double cg = std::exp(-fracwave::ln_gamma(1.0 - mu));

    if (j == i) {
        auto G = [&](double t) {
            return cg * jacobi_weighted_right(phip, a, t, -mu, 12);
        };
        auto f = [&](double t) {
            const double h = std::min(t - a, b - t) / 256.0;
            const double D =
                (8.0 * (G(t + h) - G(t - h)) - (G(t + 2.0 * h) - G(t - 2.0 * h))) / (12.0 * h);
            return horner(shifted_legendre_coeffs(am), (t - c) / tj) * std::pow(t - a, mu) * D;
        };
        return jacobi_weighted_left(f, c, d, -mu, 24);
    }

    // beta_p(s): coefficients of psi_am(t) re-expanded in powers of (t-s)
    auto beta_p = [&](int p, double s) {
        const auto& w = shifted_legendre_coeffs(am);
        double acc = 0.0;
        for (std::size_t qq = static_cast<std::size_t>(p); qq < w.size(); ++qq)
            acc += w[qq] * oracles::binom(static_cast<int>(qq), p) *
                   std::pow((s - c) / tj, static_cast<double>(qq) - p);
        return acc / std::pow(tj, p);
    };
    const int deg = am;
    double total = 0.0;
    {
        std::function<double(double)> f1 = [&](double s) {
            double acc = 0.0;
            for (int p = 0; p <= deg; ++p)
                acc += beta_p(p, s) * std::pow(d - s, p - mu) / (p - mu);
            return phip(s) * acc;
        };
        total += oracles::graded_gl(f1, a, b, false, true, 40, 12);
    }
    for (int p = 0; p <= deg; ++p) {
        std::function<double(double)> f2 = [&](double s) { return phip(s) * beta_p(p, s); };
        if (c == b)
            total -= jacobi_weighted_right(f2, a, b, p - mu, 16) / (p - mu);
        else {
            std::function<double(double)> f3 = [&](double s) {
                return f2(s) * std::pow(c - s, p - mu);
            };
            total -= oracles::graded_gl(f3, a, b, false, true, 40, 12) / (p - mu);
        }
    }
    return -mu * cg * total;
}

PiecewisePolynomial random_pw(const TimeGrid& g, int degree, unsigned seed) {
    PiecewisePolynomial v(g, degree);
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    for (int j = 1; j <= g.J; ++j)
        for (int l = 0; l <= degree; ++l) v.coeff(j, l) = coef(rng);
    return v;
}

}  // namespace

TEST_CASE("power integral small-increment stability", "[fracops]") {
    CHECK(power_integral(2.0, 0.0, 0.5) == Catch::Approx(0.125 / 3.0).epsilon(1e-15));
    CHECK(power_integral(-0.5, 1.0, 1e-8) == Catch::Approx(9.9999999750000001e-9).epsilon(1e-13));
    CHECK(power_integral(-0.5, 0.0, 4.0) == Catch::Approx(4.0).epsilon(1e-14));
    CHECK_THROWS_AS(power_integral(-1.0, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(power_integral(0.5, -0.1, 1.0), std::invalid_argument);
}

TEST_CASE("polynomial power moments across evaluation branches", "[fracops]") {
    const std::vector<double> p{1.0, -0.3, 0.7, 0.2};
    auto poly = [&](double t0, double t1) {
        return [&p, t0, t1](double t) { return horner(p, (t - t0) / (t1 - t0)); };
    };

    // anchor at the interval start: weighted-rule reference is exact
    {
        const double got = poly_power_moment(p, -0.4, 0.3, 0.3, 0.5);
        const double want = jacobi_weighted_left(poly(0.3, 0.5), 0.3, 0.5, -0.4, 12);
        CHECK(got == Catch::Approx(want).epsilon(1e-14));
    }
    // distant anchor: series branch
    {
        const double got = poly_power_moment(p, -0.7, 0.0, 10.0, 10.5);
        std::function<double(double)> f = [&](double t) {
            return std::pow(t, -0.7) * poly(10.0, 10.5)(t);
        };
        const double want = oracles::graded_gl(f, 10.0, 10.5, false, false, 8, 12);
        CHECK(got == Catch::Approx(want).epsilon(1e-13));
    }
    // adjacent anchor: expansion branch
    {
        const double got = poly_power_moment(p, -0.7, 0.0, 0.1, 1.1);
        std::function<double(double)> f = [&](double t) {
            return std::pow(t, -0.7) * poly(0.1, 1.1)(t);
        };
        const double want = oracles::graded_gl(f, 0.1, 1.1, true, false, 44, 12);
        CHECK(got == Catch::Approx(want).epsilon(1e-12));
    }
    // positive fractional exponent
    {
        const double got = poly_power_moment(p, 1.3, 0.2, 0.6, 0.9);
        std::function<double(double)> f = [&](double t) {
            return std::pow(t - 0.2, 1.3) * poly(0.6, 0.9)(t);
        };
        const double want = oracles::graded_gl(f, 0.6, 0.9, false, false, 8, 12);
        CHECK(got == Catch::Approx(want).epsilon(1e-13));
    }
    CHECK_THROWS_AS(poly_power_moment(p, 0.5, 1.0, 0.5, 0.9), std::invalid_argument);
}

TEST_CASE("kernel moment closed forms and branches", "[fracops]") {
    CHECK(kernel_moment(0.0, 0, 0.0, 1.0, 2.0) == Catch::Approx(1.0).epsilon(1e-14));
    CHECK(kernel_moment(0.5, 0, 0.0, 1.0, 1.0) == Catch::Approx(2.0).epsilon(1e-14));
    CHECK(kernel_moment(0.5, 1, 0.0, 1.0, 2.0) ==
          Catch::Approx(0.43790283299492013).epsilon(1e-13));

    // both sides of the series/difference switch against quadrature
    for (double t : {1.31, 1.35}) {
        std::function<double(double)> f = [&](double s) {
            return std::pow(t - s, -0.3) * s * s;
        };
        const double want = oracles::graded_gl(f, 0.0, 1.0, false, true, 44, 12);
        CHECK(kernel_moment(0.3, 2, 0.0, 1.0, t) == Catch::Approx(want).epsilon(1e-12));
    }
    // negative exponents arise from integrals of order above one
    {
        std::function<double(double)> f = [](double s) {
            return std::pow(1.5 - s, 1.5) * (s - 0.2);
        };
        const double want = oracles::graded_gl(f, 0.2, 0.9, false, false, 8, 12);
        CHECK(kernel_moment(-1.5, 1, 0.2, 0.9, 1.5) == Catch::Approx(want).epsilon(1e-13));
    }
    CHECK_THROWS_AS(kernel_moment(1.0, 0, 0.0, 1.0, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(kernel_moment(0.5, 0, 1.0, 1.0, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(kernel_moment(0.5, 0, 0.0, 2.0, 1.0), std::invalid_argument);
}

TEST_CASE("fractional integral of simple profiles", "[fracops]") {
    auto g3 = make_grid(3, 1.0, 1.0);
    PiecewisePolynomial one(g3, 0);
    for (int j = 1; j <= 3; ++j) one.coeff(j, 0) = 1.0;
    CHECK(rl_integral_pw(1.0, one, 0.7) == Catch::Approx(0.7).epsilon(1e-14));
    CHECK(rl_integral_pw(0.5, one, 1.0) == Catch::Approx(1.1283791670955126).epsilon(1e-13));

    // power profile: exact shift of the exponent
    auto g1 = make_grid(1, 1.0, 1.0);
    const auto sq = fracwave::interpolate_ptau(g1, 3, [](double t) { return t * t; });
    for (double alpha : {0.5, 1.5, 2.5}) {
        for (double t : {0.3, 0.77, 1.0}) {
            const double want =
                std::exp(fracwave::ln_gamma(3.0) - fracwave::ln_gamma(3.0 + alpha)) *
                std::pow(t, 2.0 + alpha);
            CHECK(rl_integral_pw(alpha, sq, t) == Catch::Approx(want).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(rl_integral_pw(0.5, one, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(rl_integral_pw(0.5, one, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(rl_integral_pw(3.5, one, 0.5), std::invalid_argument);
}

TEST_CASE("fractional integral of a kinked profile against quadrature", "[fracops]") {
    auto grid = fracwave::grid_from_breakpoints({0.0, 0.4, 1.0});
    const auto v = fracwave::interpolate_ptau(
        grid, 2, [](double t) { return t < 0.4 ? t : 0.4; });
    const double alpha = 0.75, t = 0.9;
    const double cg = std::exp(-fracwave::ln_gamma(alpha));
    std::function<double(double)> seg1 = [&](double s) {
        return std::pow(t - s, alpha - 1.0) * s;
    };
    const double want =
        cg * (oracles::graded_gl(seg1, 0.0, 0.4, false, false, 20, 12) +
              jacobi_weighted_right([](double) { return 0.4; }, 0.4, t, alpha - 1.0, 24));
    CHECK(rl_integral_pw(alpha, v, t) == Catch::Approx(want).margin(1e-9));
}

TEST_CASE("repeated fractional integration composes orders", "[fracops]") {
    auto grid = make_grid(4, 1.6, 1.0);
    const auto v = random_pw(grid, 2, 41);
    for (auto [alpha, beta] : {std::pair{0.5, 0.5}, std::pair{0.3, 0.9}}) {
        const double cg = std::exp(-fracwave::ln_gamma(alpha));
        for (int n = 1; n <= 20; ++n) {
            const double t = n / 20.0;
            std::vector<double> cuts{0.0};
            for (int j = 1; j < grid.J; ++j)
                if (grid.t[j] < t) cuts.push_back(grid.t[j]);
            std::function<double(double)> w = [&](double s) {
                return rl_integral_pw(beta, v, s);
            };
            std::function<double(double)> f = [&](double s) {
                return std::pow(t - s, alpha - 1.0) * w(s);
            };
            double lhs = 0.0;
            for (std::size_t p = 0; p + 1 < cuts.size(); ++p)
                lhs += oracles::graded_gl(f, cuts[p], cuts[p + 1], true, true, 30, 12);
            // keep the kernel weight exact on the final stretch and stop the
            // leading kink of the inner integral short of the weighted rule
            const double lo = cuts.back(), mid = 0.5 * (lo + t);
            lhs += oracles::graded_gl(f, lo, mid, true, false, 30, 12);
            lhs += jacobi_weighted_right(w, mid, t, alpha - 1.0, 24);
            lhs *= cg;
            CHECK(lhs == Catch::Approx(rl_integral_pw(alpha + beta, v, t)).margin(1e-9));
        }
    }
}

TEST_CASE("fractional derivative closed-form values", "[fracops]") {
    auto g1 = make_grid(1, 1.0, 1.0);
    const auto lin = fracwave::interpolate_ptau(g1, 2, [](double t) { return t; });
    const double want_t =
        std::pow(0.5, 0.75) * std::exp(-fracwave::ln_gamma(1.75));
    CHECK(want_t == Catch::Approx(0.6469674697107177).epsilon(1e-14));
    CHECK(rl_derivative_pw(0.25, lin, 0.5) == Catch::Approx(want_t).epsilon(1e-13));

    auto g2 = make_grid(2, 1.0, 1.0);
    PiecewisePolynomial c(g2, 0);
    c.coeff(1, 0) = 3.0;
    c.coeff(2, 0) = 3.0;
    CHECK(rl_derivative_pw(0.3, c, 0.4) ==
          Catch::Approx(3.0 * 1.0141187137602983).epsilon(1e-13));

    // mirrored profile, mirrored operator
    const auto rev = fracwave::interpolate_ptau(g1, 2, [](double t) { return 1.0 - t; });
    CHECK(rl_derivative_pw(0.25, rev, 0.5, Side::right) ==
          Catch::Approx(0.6469674697107177).epsilon(1e-12));

    CHECK_THROWS_AS(rl_derivative_pw(0.25, c, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(rl_derivative_pw(0.25, c, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(rl_derivative_pw(1.2, c, 0.4), std::invalid_argument);
}

TEST_CASE("fractional derivative against differentiated integral", "[fracops]") {
    auto grid = make_grid(6, 1.0, 1.0);
    const auto v = random_pw(grid, 2, 97);
    for (double alpha : {0.2, 0.5, 0.8}) {
        for (double t : {0.09, 0.41, 0.63, 0.93}) {
            double dist = 1.0;
            for (double bp : grid.t) dist = std::min(dist, std::abs(t - bp));
            const double h = dist / 256.0;
            auto G = [&](double x) { return rl_integral_pw(1.0 - alpha, v, x); };
            const double want =
                (8.0 * (G(t + h) - G(t - h)) - (G(t + 2.0 * h) - G(t - 2.0 * h))) / (12.0 * h);
            CHECK(rl_derivative_pw(alpha, v, t) == Catch::Approx(want).margin(1e-8));
        }
    }
}

TEST_CASE("history decomposition includes the initial-slope kernel term", "[fracops]") {
    const double gamma = 1.4, mu = gamma - 1.0;
    auto grid = make_grid(5, 1.7, 1.0);
    auto v = random_pw(grid, 2, 58);
    for (int j = 2; j <= grid.J; ++j) {
        const double step = v.eval_slab(j - 1, 1.0) - v.eval_slab(j, 0.0);
        v.coeff(j, 0) += step;
    }
    const auto vp = v.derivative();
    const auto z = vp.derivative();
    const double cg = std::exp(-fracwave::ln_gamma(2.0 - gamma));
    for (double t : {0.13, 0.37, 0.52, 0.81, 0.97}) {
        const double lhs = rl_derivative_pw(mu, vp, t);
        double rhs = rl_integral_pw(2.0 - gamma, z, t) +
                     vp.eval_slab(1, 0.0) * std::pow(t, 1.0 - gamma) * cg;
        for (int j = 1; j < grid.J; ++j)
            if (grid.t[j] < t) rhs += vp.jump(j) * std::pow(t - grid.t[j], 1.0 - gamma) * cg;
        CHECK(lhs == Catch::Approx(rhs).margin(1e-9 * (1.0 + std::abs(lhs))));
    }
}

TEST_CASE("coupling block causality and closed-form diagonal", "[fracops]") {
    auto grid = make_grid(4, 2.0, 1.0);
    const auto zero = frac_coupling_block(0.25, grid, 3, 2, 2);
    for (const auto& row : zero.F)
        for (double e : row) CHECK(e == 0.0);

    for (int j = 1; j <= 4; ++j) {
        const double tau = grid.tau[j - 1];
        const auto blk = frac_coupling_block(0.25, grid, j, j, 1);
        const double want = std::pow(tau, -0.5) * std::exp(-fracwave::ln_gamma(1.5));
        CHECK(blk.F[0][0] == Catch::Approx(want).epsilon(1e-13));
    }

    auto g1 = make_grid(1, 1.0, 1.0);
    const auto blk = frac_coupling_block(0.25, g1, 1, 1, 2);
    CHECK(blk.F[0][0] == Catch::Approx(1.1283791670955126).epsilon(1e-13));
    CHECK(blk.F[0][1] == Catch::Approx(0.37612638903183753).epsilon(1e-13));
    CHECK(blk.F[1][0] == Catch::Approx(-0.37612638903183753).epsilon(1e-13));
    CHECK(blk.F[1][1] == Catch::Approx(0.67702750025730756).epsilon(1e-13));
}

TEST_CASE("coupling block frozen cross-slab reference", "[fracops]") {
    auto grid = make_grid(4, 1.0, 1.0);
    const auto blk = frac_coupling_block(0.25, grid, 1, 3, 2);
    CHECK(blk.F[0][0] == Catch::Approx(-0.21749805700853833).epsilon(5e-12));
    CHECK(blk.F[0][1] == Catch::Approx(-0.029307565011990796).epsilon(5e-12));
    CHECK(blk.F[1][0] == Catch::Approx(0.029307565011990796).epsilon(5e-12));
    CHECK(blk.F[1][1] == Catch::Approx(0.0064614928966278985).epsilon(5e-12));
    // the independent reference used below must agree with the same numbers
    CHECK(brute_entry(0.5, grid, 1, 3, 0, 1) ==
          Catch::Approx(-0.21749805700853833).margin(1e-10));
    CHECK(brute_entry(0.5, grid, 1, 3, 1, 2) ==
          Catch::Approx(0.0064614928966278985).margin(1e-10));
}

TEST_CASE("coupling blocks match brute-force references", "[fracops]") {
    struct Config {
        double mu;
        TimeGrid grid;
        int i, j, m;
    };
    std::vector<Config> cases;
    cases.push_back({0.5, make_grid(4, 1.0, 1.0), 1, 3, 2});
    cases.push_back({0.9, make_grid(4, 2.0, 1.0), 3, 3, 2});
    cases.push_back({0.9, make_grid(4, 1.0, 1.0), 2, 3, 2});
    cases.push_back({0.5, make_grid(8, 1.0, 1.0), 1, 5, 2});
    cases.push_back({0.4, make_grid(5, 2.0, 1.0), 2, 4, 3});
    cases.push_back({0.3, make_grid(10, 1.5, 1.0), 1, 9, 3});
    for (const auto& cfg : cases) {
        const auto blk = frac_coupling_block(cfg.mu / 2.0, cfg.grid, cfg.i, cfg.j, cfg.m);
        for (int am = 0; am < cfg.m; ++am) {
            for (int bm = 1; bm <= cfg.m; ++bm) {
                const double want = brute_entry(cfg.mu, cfg.grid, cfg.i, cfg.j, am, bm);
                INFO("mu=" << cfg.mu << " i=" << cfg.i << " j=" << cfg.j << " a=" << am
                           << " b=" << bm);
                CHECK(blk.F[am][bm - 1] ==
                      Catch::Approx(want).margin(1e-8 * (1.0 + std::abs(want))));
            }
        }
    }
}

TEST_CASE("coupling block scaling under grid dilation", "[fracops]") {
    const double gamma0 = 0.22, scale = 3.7;
    auto g1 = make_grid(5, 2.0, 1.0);
    auto g2 = make_grid(5, 2.0, scale);
    for (auto [i, j] : {std::pair{2, 4}, std::pair{3, 3}, std::pair{1, 5}}) {
        const auto b1 = frac_coupling_block(gamma0, g1, i, j, 2);
        const auto b2 = frac_coupling_block(gamma0, g2, i, j, 2);
        const double factor = std::pow(scale, -2.0 * gamma0);
        for (int am = 0; am < 2; ++am)
            for (int bm = 0; bm < 2; ++bm)
                CHECK(b2.F[am][bm] == Catch::Approx(b1.F[am][bm] * factor).epsilon(1e-10));
    }
}

TEST_CASE("coupling blocks are translation invariant on uniform grids", "[fracops]") {
    auto grid = make_grid(6, 1.0, 1.0);
    const auto ref_lag3 = frac_coupling_block(0.3, grid, 1, 4, 2);
    const auto ref_diag = frac_coupling_block(0.3, grid, 2, 2, 2);
    for (int shift = 1; shift <= 2; ++shift) {
        const auto blk = frac_coupling_block(0.3, grid, 1 + shift, 4 + shift, 2);
        const auto diag = frac_coupling_block(0.3, grid, 2 + shift, 2 + shift, 2);
        for (int am = 0; am < 2; ++am)
            for (int bm = 0; bm < 2; ++bm) {
                CHECK(blk.F[am][bm] == Catch::Approx(ref_lag3.F[am][bm]).epsilon(1e-11));
                CHECK(diag.F[am][bm] == Catch::Approx(ref_diag.F[am][bm]).epsilon(1e-11));
            }
    }
}

TEST_CASE("history kernel moments for the load", "[fracops]") {
    auto grid = make_grid(4, 1.0, 1.0);
    const auto w = omega_load(1.5, grid, 1, 0.0, 1);
    CHECK(w[0] == Catch::Approx(0.56418958354775629).epsilon(1e-13));

    const auto w2 = omega_load(1.3, grid, 3, 0.0, 2);
    const double cg = std::exp(-fracwave::ln_gamma(0.7));
    for (int am = 0; am < 2; ++am) {
        std::function<double(double)> f = [&](double t) {
            return horner(shifted_legendre_coeffs(am), (t - 0.5) / 0.25) *
                   std::pow(t, -0.3) * cg;
        };
        const double want = oracles::graded_gl(f, 0.5, 0.75, false, false, 8, 12);
        CHECK(w2[am] == Catch::Approx(want).epsilon(1e-12));
    }
    CHECK_THROWS_AS(omega_load(1.5, grid, 2, 0.5, 2), std::invalid_argument);
    CHECK_THROWS_AS(omega_load(2.0, grid, 2, 0.0, 2), std::invalid_argument);
}
