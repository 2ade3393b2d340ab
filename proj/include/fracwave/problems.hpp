#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fracwave/quadrature.hpp"
#include "fracwave/spacefem.hpp"
#include "fracwave/stepper.hpp"

namespace fracwave {

// Closed-form test solution u(x,y,t) = t^r * x y (1-x) (1-y) on the unit
// square, with the forcing that makes the model equation hold. Both initial
// fields vanish, so the memory term acts on u directly.
struct ManufacturedProblem {
    double gamma = 1.5;
    double r = 2.0;
    double T = 1.0;
    double forcing_coefficient = 0.0;  // Gamma(r+1) / Gamma(r+1-gamma)

    static double phi(double x, double y) { return x * y * (1.0 - x) * (1.0 - y); }

    static double lap_phi(double x, double y) {
        return -2.0 * (x * (1.0 - x) + y * (1.0 - y));
    }

    double u(double x, double y, double t) const { return std::pow(t, r) * phi(x, y); }

    double u_dt(double x, double y, double t) const {
        return r * std::pow(t, r - 1.0) * phi(x, y);
    }

    double u0(double, double) const { return 0.0; }

    double u1(double, double) const { return 0.0; }

    // Defined for t > 0; the first term blows up at t = 0 once r < gamma.
    double f(double x, double y, double t) const {
        return forcing_coefficient * std::pow(t, r - gamma) * phi(x, y) -
               std::pow(t, r) * lap_phi(x, y);
    }

    TimeProfile mass_profile() const {
        const double c = forcing_coefficient;
        return {r - gamma, [c](double) { return c; }};
    }

    TimeProfile stiffness_profile() const { return {r, {}}; }

    SeparatedLoad separated_load(const FeSpace& sp) const {
        SeparatedLoad load;
        load.profiles.push_back(mass_profile());
        load.spatial.push_back(load_vector(sp, [](double x, double y) { return phi(x, y); }));
        load.profiles.push_back(stiffness_profile());
        load.spatial.push_back(
            load_vector(sp, [](double x, double y) { return -lap_phi(x, y); }));
        return load;
    }
};

inline ManufacturedProblem manufactured_problem(double gamma, double r, double T) {
    if (!(gamma > 1.0 && gamma < 2.0))
        throw std::invalid_argument("manufactured_problem: gamma must lie in (1,2)");
    if (!(r > 1.0)) throw std::invalid_argument("manufactured_problem: r must exceed 1");
    if (!(r + 1.0 - gamma > 0.0))
        throw std::invalid_argument("manufactured_problem: r + 1 - gamma must be positive");
    if (!(T > 0.0)) throw std::invalid_argument("manufactured_problem: T must be positive");
    ManufacturedProblem p;
    p.gamma = gamma;
    p.r = r;
    p.T = T;
    p.forcing_coefficient = std::exp(ln_gamma(r + 1.0) - ln_gamma(r + 1.0 - gamma));
    return p;
}

// Solves y(t) = c0 + c1 t + (1/Gamma(gamma)) int_0^t (t-s)^(gamma-1)
// (g(s) - lambda y(s)) ds on a uniform grid covering the requested times.
// The unknown is taken slab-wise linear under the exact kernel weight, which
// makes the scheme second order in the step; requested times between nodes
// are filled in by linear interpolation.
inline std::vector<double> scalar_ode_reference(double gamma, double lambda, double c0,
                                                double c1,
                                                const std::function<double(double)>& g,
                                                const std::vector<double>& t_eval,
                                                int steps) {
    if (!(gamma > 1.0 && gamma < 2.0))
        throw std::invalid_argument("scalar_ode_reference: gamma must lie in (1,2)");
    if (steps < 16) throw std::invalid_argument("scalar_ode_reference: needs at least 16 steps");
    if (!g) throw std::invalid_argument("scalar_ode_reference: forcing must be callable");
    if (!std::isfinite(lambda) || !std::isfinite(c0) || !std::isfinite(c1))
        throw std::invalid_argument("scalar_ode_reference: data must be finite");

    double tmax = 0.0;
    for (double t : t_eval) {
        if (!std::isfinite(t) || t < 0.0)
            throw std::invalid_argument("scalar_ode_reference: times must be finite and >= 0");
        tmax = std::max(tmax, t);
    }
    if (t_eval.empty()) return {};
    if (tmax == 0.0) return std::vector<double>(t_eval.size(), c0);

    const std::size_t n_steps = static_cast<std::size_t>(steps);
    const double h = tmax / static_cast<double>(steps);
    const double ginv = std::exp(-ln_gamma(gamma));

    // Kernel weights for one slab at lag l: with d0 = l h, d1 = (l-1) h,
    //   W0 = int (t_n - s)^(gamma-1) ds          over the slab,
    //   W1 = int (t_n - s)^(gamma-1) (s - s_i) ds,
    // so the left node carries W0 - W1/h and the right node W1/h.
    std::vector<double> wl(n_steps + 1, 0.0), wr(n_steps + 1, 0.0);
    for (std::size_t l = 1; l <= n_steps; ++l) {
        const double d0 = static_cast<double>(l) * h;
        const double d1 = d0 - h;
        const double w0 = (std::pow(d0, gamma) - std::pow(d1, gamma)) / gamma;
        const double w1 =
            d0 * w0 - (std::pow(d0, gamma + 1.0) - std::pow(d1, gamma + 1.0)) / (gamma + 1.0);
        wr[l] = w1 / h;
        wl[l] = w0 - wr[l];
    }

    std::vector<double> y(n_steps + 1, 0.0), psi(n_steps + 1, 0.0);
    y[0] = c0;
    psi[0] = g(0.0) - lambda * c0;
    const double denom = 1.0 + lambda * wr[1] * ginv;
    if (!(std::abs(denom) > 1e-300))
        throw std::invalid_argument("scalar_ode_reference: degenerate implicit step");
    for (std::size_t n = 1; n <= n_steps; ++n) {
        const double tn = static_cast<double>(n) * h;
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            double w = wl[n - k];
            if (k >= 1) w += wr[n - k + 1];
            acc += psi[k] * w;
        }
        const double gn = g(tn);
        y[n] = (c0 + c1 * tn + ginv * (acc + wr[1] * gn)) / denom;
        psi[n] = gn - lambda * y[n];
    }

    std::vector<double> out;
    out.reserve(t_eval.size());
    for (double t : t_eval) {
        if (t <= 0.0) {
            out.push_back(c0);
            continue;
        }
        std::size_t i = static_cast<std::size_t>(t / h);
        if (i >= n_steps) i = n_steps - 1;
        const double theta = t / h - static_cast<double>(i);
        out.push_back(y[i] + theta * (y[i + 1] - y[i]));
    }
    return out;
}

}  // namespace fracwave
