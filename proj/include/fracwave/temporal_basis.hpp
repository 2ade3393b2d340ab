#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "quadrature.hpp"
#include "timegrid.hpp"

namespace fracwave {

namespace detail {

// Monomial coefficients (ascending powers of theta) of the shifted Legendre
// polynomial of degree n on [0,1], normalized so that L_n(1) = 1.
inline const std::vector<double>& shifted_legendre_coeffs(int n) {
    static const std::vector<std::vector<double>> table = [] {
        std::vector<std::vector<double>> t;
        t.push_back({1.0});
        t.push_back({-1.0, 2.0});
        for (int k = 1; k < 12; ++k) {
            // (k+1) L_{k+1} = (2k+1)(2θ−1) L_k − k L_{k−1}
            const auto& cur = t[static_cast<std::size_t>(k)];
            const auto& prev = t[static_cast<std::size_t>(k) - 1];
            std::vector<double> next(static_cast<std::size_t>(k) + 2, 0.0);
            for (std::size_t i = 0; i < cur.size(); ++i) {
                next[i + 1] += (2.0 * k + 1.0) * 2.0 * cur[i];
                next[i] -= (2.0 * k + 1.0) * cur[i];
            }
            for (std::size_t i = 0; i < prev.size(); ++i) next[i] -= k * prev[i];
            for (auto& c : next) c /= (k + 1.0);
            t.push_back(std::move(next));
        }
        return t;
    }();
    if (n < 0 || n > 12) throw std::invalid_argument("shifted_legendre_coeffs: degree out of range");
    return table[static_cast<std::size_t>(n)];
}

inline double horner(const std::vector<double>& c, double x) {
    double v = 0.0;
    for (std::size_t i = c.size(); i-- > 0;) v = v * x + c[i];
    return v;
}

inline std::vector<double> integrate_from_zero(const std::vector<double>& c) {
    std::vector<double> out(c.size() + 1, 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) out[i + 1] = c[i] / (i + 1.0);
    return out;
}

inline std::vector<double> differentiate(const std::vector<double>& c) {
    if (c.size() <= 1) return {0.0};
    std::vector<double> out(c.size() - 1);
    for (std::size_t i = 1; i < c.size(); ++i) out[i - 1] = c[i] * static_cast<double>(i);
    return out;
}

}  // namespace detail

// Test space modes on the reference slab: shifted Legendre of degree a, a = 0..m-1.
struct TestBasis {
    int m = 1;

    explicit TestBasis(int m_) : m(m_) {
        if (m < 1 || m > 3) throw std::invalid_argument("TestBasis: m must be in {1,2,3}");
        for (int a = 0; a < m; ++a) coeffs.push_back(detail::shifted_legendre_coeffs(a));
    }

    double eval(int a, double theta) const {
        if (a < 0 || a >= m) throw std::invalid_argument("TestBasis::eval: mode out of range");
        if (theta < 0.0 || theta > 1.0) throw std::invalid_argument("TestBasis::eval: theta out of [0,1]");
        return detail::horner(coeffs[static_cast<std::size_t>(a)], theta);
    }

    const std::vector<double>& monomial(int a) const {
        if (a < 0 || a >= m) throw std::invalid_argument("TestBasis::monomial: mode out of range");
        return coeffs[static_cast<std::size_t>(a)];
    }

    std::vector<std::vector<double>> coeffs;
};

// Trial space modes on the reference slab: integrated Legendre polynomials,
// so each mode vanishes at theta = 0 and its derivative is a Legendre mode.
struct TrialBasis {
    int m = 1;

    explicit TrialBasis(int m_) : m(m_) {
        if (m < 1 || m > 3) throw std::invalid_argument("TrialBasis: m must be in {1,2,3}");
        for (int b = 1; b <= m; ++b) {
            deriv_coeffs.push_back(detail::shifted_legendre_coeffs(b - 1));
            coeffs.push_back(detail::integrate_from_zero(deriv_coeffs.back()));
        }
    }

    double eval(int b, double theta, int derivative = 0) const {
        if (b < 1 || b > m) throw std::invalid_argument("TrialBasis::eval: mode out of range");
        if (theta < 0.0 || theta > 1.0) throw std::invalid_argument("TrialBasis::eval: theta out of [0,1]");
        if (derivative == 0) return detail::horner(coeffs[static_cast<std::size_t>(b) - 1], theta);
        if (derivative == 1) return detail::horner(deriv_coeffs[static_cast<std::size_t>(b) - 1], theta);
        throw std::invalid_argument("TrialBasis::eval: derivative must be 0 or 1");
    }

    const std::vector<double>& monomial(int b) const {
        if (b < 1 || b > m) throw std::invalid_argument("TrialBasis::monomial: mode out of range");
        return coeffs[static_cast<std::size_t>(b) - 1];
    }

    std::vector<std::vector<double>> coeffs;        // modes 1..m, value
    std::vector<std::vector<double>> deriv_coeffs;  // modes 1..m, theta-derivative
};

inline double eval_trial(const TrialBasis& basis, int b, double theta, int derivative = 0) {
    return basis.eval(b, theta, derivative);
}

inline double eval_test(const TestBasis& basis, int a, double theta) {
    return basis.eval(a, theta);
}

// Overlap integrals int_0^1 test_a * trial_b dtheta, a = 0..m-1, b = 1..m.
inline std::vector<std::vector<double>> trial_test_overlap(int m) {
    TrialBasis trial(m);
    TestBasis test(m);
    const auto& rule = gauss_legendre(m + 2);
    std::vector<std::vector<double>> g(static_cast<std::size_t>(m),
                                       std::vector<double>(static_cast<std::size_t>(m), 0.0));
    for (std::size_t q = 0; q < rule.size(); ++q) {
        const double theta = 0.5 * (rule.nodes[q] + 1.0);
        const double w = 0.5 * rule.weights[q];
        for (int a = 0; a < m; ++a)
            for (int b = 1; b <= m; ++b)
                g[static_cast<std::size_t>(a)][static_cast<std::size_t>(b) - 1] +=
                    w * test.eval(a, theta) * trial.eval(b, theta);
    }
    return g;
}

// Slab-wise polynomial in shifted-Legendre modal form. Stores its own grid.
class PiecewisePolynomial {
public:
    PiecewisePolynomial(TimeGrid grid, int degree)
        : grid_(std::move(grid)), degree_(degree) {
        if (degree_ < 0 || degree_ > 12)
            throw std::invalid_argument("PiecewisePolynomial: degree out of range");
        coeffs_.assign(static_cast<std::size_t>(grid_.J) * (degree_ + 1), 0.0);
    }

    int degree() const { return degree_; }
    const TimeGrid& grid() const { return grid_; }

    double& coeff(int j, int l) { return coeffs_[index(j, l)]; }
    double coeff(int j, int l) const { return coeffs_[index(j, l)]; }

    // Monomial coefficients in the local coordinate theta of slab j.
    std::vector<double> slab_monomial(int j) const {
        check_slab(j);
        std::vector<double> mono(static_cast<std::size_t>(degree_) + 1, 0.0);
        for (int l = 0; l <= degree_; ++l) {
            const auto& lc = detail::shifted_legendre_coeffs(l);
            const double c = coeff(j, l);
            for (std::size_t i = 0; i < lc.size(); ++i) mono[i] += c * lc[i];
        }
        return mono;
    }

    // Value (or time derivative) at local coordinate theta of slab j.
    double eval_slab(int j, double theta, int derivative = 0) const {
        std::vector<double> mono = slab_monomial(j);
        double scale = 1.0;
        for (int d = 0; d < derivative; ++d) {
            mono = detail::differentiate(mono);
            scale /= grid_.tau[static_cast<std::size_t>(j) - 1];
        }
        return scale * detail::horner(mono, theta);
    }

    // Breakpoints evaluate from the slab on their left; t = 0 uses slab 1.
    double eval(double t, int derivative = 0) const {
        if (t < 0.0 || t > grid_.T)
            throw std::invalid_argument("PiecewisePolynomial::eval: t out of [0,T]");
        const auto it = std::lower_bound(grid_.t.begin(), grid_.t.end(), t);
        int j = static_cast<int>(it - grid_.t.begin());
        j = std::max(1, std::min(j, grid_.J));
        const double theta =
            (t - grid_.t[static_cast<std::size_t>(j) - 1]) / grid_.tau[static_cast<std::size_t>(j) - 1];
        return eval_slab(j, std::min(1.0, std::max(0.0, theta)), derivative);
    }

    double right_value(int j) const { return eval_slab(j, 1.0); }
    double left_start_value(int j) const { return eval_slab(j, 0.0); }

    // Jump at interior breakpoint t_j: limit from slab j+1 minus limit from slab j.
    double jump(int j) const {
        if (j < 1 || j >= grid_.J)
            throw std::invalid_argument("PiecewisePolynomial::jump: interior breakpoints only");
        return eval_slab(j + 1, 0.0) - eval_slab(j, 1.0);
    }

    PiecewisePolynomial derivative() const {
        PiecewisePolynomial out(grid_, std::max(0, degree_ - 1));
        for (int j = 1; j <= grid_.J; ++j) {
            const double inv_tau = 1.0 / grid_.tau[static_cast<std::size_t>(j) - 1];
            for (int k = 0; k < std::max(1, degree_); ++k) {
                double s = 0.0;
                for (int l = k + 1; l <= degree_; l += 2) s += 2.0 * (2.0 * k + 1.0) * coeff(j, l);
                if (out.degree_ >= k) out.coeff(j, k) = inv_tau * s;
            }
        }
        return out;
    }

    double slab_l2_sq(int j) const {
        check_slab(j);
        double s = 0.0;
        for (int l = 0; l <= degree_; ++l) s += coeff(j, l) * coeff(j, l) / (2.0 * l + 1.0);
        return s * grid_.tau[static_cast<std::size_t>(j) - 1];
    }

private:
    std::size_t index(int j, int l) const {
        check_slab(j);
        if (l < 0 || l > degree_) throw std::invalid_argument("PiecewisePolynomial: mode out of range");
        return static_cast<std::size_t>(j - 1) * (degree_ + 1) + static_cast<std::size_t>(l);
    }
    void check_slab(int j) const {
        if (j < 1 || j > grid_.J) throw std::invalid_argument("PiecewisePolynomial: slab out of range");
    }

    TimeGrid grid_;
    int degree_;
    std::vector<double> coeffs_;
};

// Reversed time axis: out(s) = in(T - s) on the mirrored grid.
inline PiecewisePolynomial reflect(const PiecewisePolynomial& in) {
    const TimeGrid& g = in.grid();
    std::vector<double> bp(static_cast<std::size_t>(g.J) + 1);
    bp[0] = 0.0;
    for (int i = 1; i <= g.J; ++i)
        bp[static_cast<std::size_t>(i)] = g.T - g.t[static_cast<std::size_t>(g.J - i)];
    bp[static_cast<std::size_t>(g.J)] = g.T;
    PiecewisePolynomial out(grid_from_breakpoints(std::move(bp)), in.degree());
    for (int i = 1; i <= g.J; ++i) {
        const int j = g.J - i + 1;
        double sign = 1.0;
        for (int l = 0; l <= in.degree(); ++l) {
            out.coeff(i, l) = sign * in.coeff(j, l);
            sign = -sign;
        }
    }
    return out;
}

// Projection onto slab-wise degree m-1 polynomials: L2-orthogonal to degree
// m-2 on each slab and matching v at each slab's right endpoint.
template <class F>
PiecewisePolynomial interpolate_ptau(const TimeGrid& grid, int m, F&& v,
                                     const std::vector<double>* v_at_breakpoints = nullptr) {
    if (m < 1 || m > 3) throw std::invalid_argument("interpolate_ptau: m must be in {1,2,3}");
    if (v_at_breakpoints && static_cast<int>(v_at_breakpoints->size()) != grid.J)
        throw std::invalid_argument("interpolate_ptau: breakpoint values must have J entries");
    PiecewisePolynomial out(grid, m - 1);
    const auto& rule = gauss_legendre(8);
    for (int j = 1; j <= grid.J; ++j) {
        const double a = grid.t[static_cast<std::size_t>(j) - 1];
        const double tau = grid.tau[static_cast<std::size_t>(j) - 1];
        const double vend = v_at_breakpoints ? (*v_at_breakpoints)[static_cast<std::size_t>(j) - 1]
                                             : v(grid.t[static_cast<std::size_t>(j)]);
        double partial = 0.0;
        for (int l = 0; l <= m - 2; ++l) {
            const auto& lc = detail::shifted_legendre_coeffs(l);
            double mom = 0.0;
            for (std::size_t q = 0; q < rule.size(); ++q) {
                const double theta = 0.5 * (rule.nodes[q] + 1.0);
                mom += 0.5 * rule.weights[q] * v(a + theta * tau) * detail::horner(lc, theta);
            }
            out.coeff(j, l) = (2.0 * l + 1.0) * mom;
            partial += out.coeff(j, l);
        }
        out.coeff(j, m - 1) = vend - partial;
    }
    return out;
}

}  // namespace fracwave
