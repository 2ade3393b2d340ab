#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace fracwave {

// Graded partition 0 = t_0 < t_1 < ... < t_J = T of (0, T).
struct TimeGrid {
    double T = 1.0;
    int J = 1;
    double sigma = 1.0;
    std::vector<double> t;    // J+1 breakpoints
    std::vector<double> tau;  // J slab lengths

    double slab_left(int j) const { return t[static_cast<std::size_t>(j) - 1]; }
    double slab_right(int j) const { return t[static_cast<std::size_t>(j)]; }
};

// Breakpoints t_j = (j/J)^sigma * T. sigma = 1 gives uniform slabs.
inline TimeGrid make_grid(int J, double sigma, double T) {
    if (J < 1) throw std::invalid_argument("make_grid: J must be >= 1");
    if (!(sigma >= 1.0)) throw std::invalid_argument("make_grid: sigma must be >= 1");
    if (!(T > 0.0)) throw std::invalid_argument("make_grid: T must be > 0");
    TimeGrid g;
    g.T = T;
    g.J = J;
    g.sigma = sigma;
    g.t.resize(static_cast<std::size_t>(J) + 1);
    g.tau.resize(static_cast<std::size_t>(J));
    g.t[0] = 0.0;
    for (int j = 1; j < J; ++j)
        g.t[static_cast<std::size_t>(j)] =
            T * std::exp(sigma * std::log(static_cast<double>(j) / J));
    g.t[static_cast<std::size_t>(J)] = T;
    for (int j = 1; j <= J; ++j) {
        g.tau[static_cast<std::size_t>(j) - 1] =
            g.t[static_cast<std::size_t>(j)] - g.t[static_cast<std::size_t>(j) - 1];
        if (!(g.tau[static_cast<std::size_t>(j) - 1] > 0.0))
            throw std::runtime_error("make_grid: degenerate slab");
    }
    return g;
}

// Grid with caller-supplied breakpoints; used for reversed-axis transforms.
inline TimeGrid grid_from_breakpoints(std::vector<double> t) {
    if (t.size() < 2) throw std::invalid_argument("grid_from_breakpoints: need >= 2 points");
    if (t.front() != 0.0) throw std::invalid_argument("grid_from_breakpoints: t[0] must be 0");
    TimeGrid g;
    g.J = static_cast<int>(t.size()) - 1;
    g.T = t.back();
    g.sigma = 0.0;  // not from the graded family
    g.t = std::move(t);
    g.tau.resize(static_cast<std::size_t>(g.J));
    for (int j = 1; j <= g.J; ++j) {
        g.tau[static_cast<std::size_t>(j) - 1] =
            g.t[static_cast<std::size_t>(j)] - g.t[static_cast<std::size_t>(j) - 1];
        if (!(g.tau[static_cast<std::size_t>(j) - 1] > 0.0))
            throw std::invalid_argument("grid_from_breakpoints: breakpoints must increase");
    }
    return g;
}

// Critical grading exponent (2m+1-gamma)/(2r-gamma).
inline double sigma_star(int m, double r, double gamma) {
    if (m < 1) throw std::invalid_argument("sigma_star: m must be >= 1");
    if (!(gamma > 1.0 && gamma < 2.0))
        throw std::invalid_argument("sigma_star: gamma must lie in (1,2)");
    if (!(2.0 * r > gamma)) throw std::invalid_argument("sigma_star: need 2r > gamma");
    // Both parts are scaled by ten before dividing so parameters with one
    // decimal digit (1.4, 1.6, ...) hit their rational quotient exactly.
    const double num = 10.0 * (2.0 * m + 1.0) - 10.0 * gamma;
    const double den = 2.0 * (10.0 * r) - 10.0 * gamma;
    return num / den;
}

}  // namespace fracwave
