#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fracwave/fracops.hpp"
#include "fracwave/quadrature.hpp"
#include "fracwave/spacefem.hpp"
#include "fracwave/temporal_basis.hpp"
#include "fracwave/timegrid.hpp"

namespace fracwave {

// Time factor of one separated load term, g(t) = t^exponent * smooth(t).
// A null smooth factor means 1. The exponent must stay above -1 so the
// factor is integrable on the first slab.
struct TimeProfile {
    double exponent = 0.0;
    std::function<double(double)> smooth;

    double value(double t) const {
        const double s = smooth ? smooth(t) : 1.0;
        return exponent == 0.0 ? s : std::pow(t, exponent) * s;
    }
};

// Right-hand side sum_k profiles[k](t) * field_k, with each field given
// through its test pairings spatial[k][i] = <field_k, w_i>.
struct SeparatedLoad {
    std::vector<TimeProfile> profiles;
    std::vector<std::vector<double>> spatial;
};

struct MarchConfig {
    double gamma = 1.5;
    int m = 1;
    TimeGrid grid;
    FeSpace space;
    std::vector<double> u0;  // start coefficients; empty means zero
    std::vector<double> u1;  // projected initial slope coefficients; empty means zero
    SeparatedLoad load;
    double tol = 1e-12;
};

struct Trajectory {
    TimeGrid grid;
    FeSpace space;
    int m = 1;
    std::vector<double> start;
    // coeff[j-1][b-1] holds the slab-j coefficients of trial mode b; only
    // mode 1 moves the breakpoint value because the higher modes vanish at
    // both slab ends.
    std::vector<std::vector<std::vector<double>>> coeff;

    std::vector<double> at_breakpoint(int j) const {
        if (j < 0 || j > static_cast<int>(coeff.size()))
            throw std::invalid_argument("Trajectory::at_breakpoint: index out of range");
        std::vector<double> u = start;
        for (int i = 1; i <= j; ++i) {
            const auto& inc = coeff[static_cast<std::size_t>(i) - 1][0];
            for (std::size_t k = 0; k < u.size(); ++k) u[k] += inc[k];
        }
        return u;
    }
};

// One slab of the coupled space-time system. Block (a,b) of the matrix is
// F[a][b-1] * mass + G[a][b-1] * stiffness; rhs is stored test-block major
// with homogeneous rows on constrained dofs.
struct SlabSystem {
    int j = 1;
    int m = 1;
    std::array<std::array<double, 3>, 3> F{};
    std::array<std::array<double, 3>, 3> G{};
    std::vector<double> rhs;
};

namespace detail {

// Coupling blocks depend only on the slab lag on uniform grids, so every
// request is routed through the lag representative there. That makes the
// reuse explicit and keeps recomputation from stored history bit-stable.
struct HistoryBlocks {
    double gamma0;
    int m;
    const TimeGrid* grid;
    bool by_lag;
    std::map<int, FracCouplingBlock> cache;

    HistoryBlocks(double g0, const TimeGrid& g, int m_)
        : gamma0(g0), m(m_), grid(&g), by_lag(g.sigma == 1.0) {}

    FracCouplingBlock get(int i, int j) {
        if (!by_lag) return frac_coupling_block(gamma0, *grid, i, j, m);
        const int lag = j - i;
        auto it = cache.find(lag);
        if (it == cache.end())
            it = cache.emplace(lag, frac_coupling_block(gamma0, *grid, 1, 1 + lag, m)).first;
        return it->second;
    }
};

// Moments int_{I_j} g(t) psi_a(t) dt, a = 0..m-1. On the first slab a power
// factor is carried by the matching Jacobi weight; elsewhere the integrand
// is analytic and Gauss-Legendre applies.
inline std::array<double, 3> slab_moments(const TimeGrid& grid, int j, int m,
                                          const TimeProfile& g) {
    const TestBasis test(m);
    const double left = grid.slab_left(j);
    const double tau = grid.tau[static_cast<std::size_t>(j) - 1];
    std::array<double, 3> out{};
    if (j == 1 && g.exponent != 0.0) {
        const auto& rule = gauss_jacobi(16, g.exponent, 0.0);
        const double scale = std::pow(0.5 * tau, g.exponent + 1.0);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const double theta = 0.5 * (1.0 - rule.nodes[q]);
            const double v = scale * rule.weights[q] * (g.smooth ? g.smooth(tau * theta) : 1.0);
            for (int a = 0; a < m; ++a)
                out[static_cast<std::size_t>(a)] += v * test.eval(a, theta);
        }
    } else {
        const auto& rule = gauss_legendre(16);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const double theta = 0.5 * (rule.nodes[q] + 1.0);
            const double v = 0.5 * tau * rule.weights[q] * g.value(left + tau * theta);
            for (int a = 0; a < m; ++a)
                out[static_cast<std::size_t>(a)] += v * test.eval(a, theta);
        }
    }
    return out;
}

inline void require_same_pattern(const SparseMatrix& M, const SparseMatrix& A) {
    if (M.n != A.n || M.row_offsets != A.row_offsets || M.col_indices != A.col_indices)
        throw std::logic_error("stepper: mass and stiffness sparsity patterns differ");
}

inline SparseMatrix combine_real(const SparseMatrix& M, const SparseMatrix& A, double cm,
                                 double ca) {
    SparseMatrix C = M;
    for (std::size_t e = 0; e < C.values.size(); ++e)
        C.values[e] = cm * M.values[e] + ca * A.values[e];
    return C;
}

inline void apply_csr(const std::vector<int>& row_offsets, const std::vector<int>& cols,
                      const std::vector<std::complex<double>>& vals,
                      const std::vector<std::complex<double>>& x,
                      std::vector<std::complex<double>>& y) {
    const int n = static_cast<int>(row_offsets.size()) - 1;
    y.assign(x.size(), std::complex<double>(0.0, 0.0));
    for (int r = 0; r < n; ++r) {
        std::complex<double> s(0.0, 0.0);
        for (int e = row_offsets[static_cast<std::size_t>(r)];
             e < row_offsets[static_cast<std::size_t>(r) + 1]; ++e)
            s += vals[static_cast<std::size_t>(e)] *
                 x[static_cast<std::size_t>(cols[static_cast<std::size_t>(e)])];
        y[static_cast<std::size_t>(r)] = s;
    }
}

// Conjugate orthogonal CG for the complex symmetric system
// (lam * mass + stiffness) x = b with Jacobi preconditioning. Exits false on
// breakdown or when the iteration cap is reached.
inline bool cocg_shifted(const SparseMatrix& M, const SparseMatrix& A, std::complex<double> lam,
                         const std::vector<std::complex<double>>& b, double tol,
                         std::vector<std::complex<double>>& x) {
    const int N = M.n;
    std::vector<std::complex<double>> vals(M.values.size());
    for (std::size_t e = 0; e < vals.size(); ++e)
        vals[e] = lam * M.values[e] + A.values[e];
    std::vector<std::complex<double>> diag(static_cast<std::size_t>(N), 1.0);
    for (int r = 0; r < N; ++r)
        for (int e = M.row_offsets[static_cast<std::size_t>(r)];
             e < M.row_offsets[static_cast<std::size_t>(r) + 1]; ++e)
            if (M.col_indices[static_cast<std::size_t>(e)] == r) {
                const auto d = vals[static_cast<std::size_t>(e)];
                if (std::abs(d) > 1e-300) diag[static_cast<std::size_t>(r)] = d;
            }
    x.assign(static_cast<std::size_t>(N), std::complex<double>(0.0, 0.0));
    double bnorm = 0.0;
    for (const auto& v : b) bnorm += std::norm(v);
    bnorm = std::sqrt(bnorm);
    if (bnorm == 0.0) return true;

    std::vector<std::complex<double>> r = b, z(static_cast<std::size_t>(N)), p, q;
    for (int i = 0; i < N; ++i)
        z[static_cast<std::size_t>(i)] =
            r[static_cast<std::size_t>(i)] / diag[static_cast<std::size_t>(i)];
    p = z;
    std::complex<double> rho(0.0, 0.0);
    for (int i = 0; i < N; ++i)
        rho += r[static_cast<std::size_t>(i)] * z[static_cast<std::size_t>(i)];

    const int cap = 30 * N + 300;
    int resyncs = 0;
    for (int it = 0; it < cap; ++it) {
        apply_csr(M.row_offsets, M.col_indices, vals, p, q);
        std::complex<double> sigma(0.0, 0.0);
        for (int i = 0; i < N; ++i)
            sigma += p[static_cast<std::size_t>(i)] * q[static_cast<std::size_t>(i)];
        if (std::abs(sigma) < 1e-300 || std::abs(rho) < 1e-300) return false;
        const std::complex<double> alpha = rho / sigma;
        double rnorm = 0.0;
        for (int i = 0; i < N; ++i) {
            x[static_cast<std::size_t>(i)] += alpha * p[static_cast<std::size_t>(i)];
            r[static_cast<std::size_t>(i)] -= alpha * q[static_cast<std::size_t>(i)];
            rnorm += std::norm(r[static_cast<std::size_t>(i)]);
        }
        if (std::sqrt(rnorm) <= tol * bnorm) {
            apply_csr(M.row_offsets, M.col_indices, vals, x, q);
            double tn = 0.0;
            for (int i = 0; i < N; ++i)
                tn += std::norm(b[static_cast<std::size_t>(i)] - q[static_cast<std::size_t>(i)]);
            tn = std::sqrt(tn);
            if (tn <= 5.0 * tol * bnorm) return true;
            if (++resyncs > 3) return false;
            for (int i = 0; i < N; ++i)
                r[static_cast<std::size_t>(i)] =
                    b[static_cast<std::size_t>(i)] - q[static_cast<std::size_t>(i)];
        }
        std::complex<double> rho2(0.0, 0.0);
        for (int i = 0; i < N; ++i) {
            z[static_cast<std::size_t>(i)] =
                r[static_cast<std::size_t>(i)] / diag[static_cast<std::size_t>(i)];
            rho2 += r[static_cast<std::size_t>(i)] * z[static_cast<std::size_t>(i)];
        }
        const std::complex<double> beta = rho2 / rho;
        rho = rho2;
        for (int i = 0; i < N; ++i)
            p[static_cast<std::size_t>(i)] =
                z[static_cast<std::size_t>(i)] + beta * p[static_cast<std::size_t>(i)];
    }
    return false;
}

// Best-effort Jacobi PCG used inside preconditioners; returns the current
// iterate when the cap is reached instead of failing.
inline void pcg_loose(const SparseMatrix& A, const std::vector<double>& b, double tol, int cap,
                      std::vector<double>& x) {
    const int N = A.n;
    std::vector<double> diag(static_cast<std::size_t>(N), 1.0);
    for (int r = 0; r < N; ++r) {
        const double d = A.at(r, r);
        if (d != 0.0) diag[static_cast<std::size_t>(r)] = d;
    }
    x.assign(static_cast<std::size_t>(N), 0.0);
    double bnorm = 0.0;
    for (double v : b) bnorm += v * v;
    bnorm = std::sqrt(bnorm);
    if (bnorm == 0.0) return;
    std::vector<double> r = b, z(static_cast<std::size_t>(N)), p, Ap;
    for (int i = 0; i < N; ++i)
        z[static_cast<std::size_t>(i)] =
            r[static_cast<std::size_t>(i)] / diag[static_cast<std::size_t>(i)];
    p = z;
    double rz = 0.0;
    for (int i = 0; i < N; ++i)
        rz += r[static_cast<std::size_t>(i)] * z[static_cast<std::size_t>(i)];
    for (int it = 0; it < cap; ++it) {
        A.multiply(p, Ap);
        double pAp = 0.0;
        for (int i = 0; i < N; ++i)
            pAp += p[static_cast<std::size_t>(i)] * Ap[static_cast<std::size_t>(i)];
        if (!(pAp > 0.0)) return;
        const double alpha = rz / pAp;
        double rnorm = 0.0;
        for (int i = 0; i < N; ++i) {
            x[static_cast<std::size_t>(i)] += alpha * p[static_cast<std::size_t>(i)];
            r[static_cast<std::size_t>(i)] -= alpha * Ap[static_cast<std::size_t>(i)];
            rnorm += r[static_cast<std::size_t>(i)] * r[static_cast<std::size_t>(i)];
        }
        if (std::sqrt(rnorm) <= tol * bnorm) return;
        double rz2 = 0.0;
        for (int i = 0; i < N; ++i) {
            z[static_cast<std::size_t>(i)] =
                r[static_cast<std::size_t>(i)] / diag[static_cast<std::size_t>(i)];
            rz2 += r[static_cast<std::size_t>(i)] * z[static_cast<std::size_t>(i)];
        }
        const double beta = rz2 / rz;
        rz = rz2;
        for (int i = 0; i < N; ++i)
            p[static_cast<std::size_t>(i)] =
                z[static_cast<std::size_t>(i)] + beta * p[static_cast<std::size_t>(i)];
    }
}

inline std::array<std::complex<double>, 3> cubic_roots(double a2, double a1, double a0) {
    const double radius = 1.0 + std::max({std::abs(a2), std::abs(a1), std::abs(a0)});
    const std::complex<double> seed(0.4, 0.9);
    std::array<std::complex<double>, 3> z;
    std::complex<double> zz(1.0, 0.0);
    for (int k = 0; k < 3; ++k) {
        zz *= seed;
        z[static_cast<std::size_t>(k)] = radius * zz;
    }
    for (int it = 0; it < 500; ++it) {
        double delta = 0.0, scale = 0.0;
        for (int k = 0; k < 3; ++k) {
            const std::complex<double> zk = z[static_cast<std::size_t>(k)];
            const std::complex<double> pv = ((zk + a2) * zk + a1) * zk + a0;
            std::complex<double> den(1.0, 0.0);
            for (int l = 0; l < 3; ++l)
                if (l != k) den *= zk - z[static_cast<std::size_t>(l)];
            if (std::abs(den) < 1e-300) den = std::complex<double>(1e-300, 0.0);
            const std::complex<double> step = pv / den;
            z[static_cast<std::size_t>(k)] -= step;
            delta = std::max(delta, std::abs(step));
            scale = std::max(scale, std::abs(z[static_cast<std::size_t>(k)]));
        }
        if (delta <= 1e-15 * (1.0 + scale)) break;
    }
    return z;
}

struct PencilEig {
    bool ok = false;
    int m = 1;
    std::array<std::complex<double>, 3> lam{};
    std::array<std::complex<double>, 9> V{};     // row-major, columns are eigenvectors
    std::array<std::complex<double>, 9> Vinv{};
};

// Eigen-decomposition of the small real matrix W = G^{-1} F. The complex
// pair of a cubic or quadratic with real coefficients is symmetrized to an
// exact conjugate pair so the per-mode solves can share work.
inline PencilEig pencil_eig(const std::array<std::array<double, 3>, 3>& W, int m) {
    PencilEig out;
    out.m = m;
    if (m == 1) {
        out.lam[0] = W[0][0];
        out.V[0] = 1.0;
        out.Vinv[0] = 1.0;
        out.ok = true;
        return out;
    }
    if (m == 2) {
        const double tr = W[0][0] + W[1][1];
        const double det = W[0][0] * W[1][1] - W[0][1] * W[1][0];
        const double disc = tr * tr - 4.0 * det;
        if (disc >= 0.0) {
            const double s = std::sqrt(disc);
            out.lam[0] = 0.5 * (tr - s);
            out.lam[1] = 0.5 * (tr + s);
        } else {
            const double s = std::sqrt(-disc);
            out.lam[0] = std::complex<double>(0.5 * tr, 0.5 * s);
            out.lam[1] = std::conj(out.lam[0]);
        }
    } else {
        const double c2 = W[0][0] + W[1][1] + W[2][2];
        const double c1 = (W[0][0] * W[1][1] - W[0][1] * W[1][0]) +
                          (W[0][0] * W[2][2] - W[0][2] * W[2][0]) +
                          (W[1][1] * W[2][2] - W[1][2] * W[2][1]);
        const double c0 = W[0][0] * (W[1][1] * W[2][2] - W[1][2] * W[2][1]) -
                          W[0][1] * (W[1][0] * W[2][2] - W[1][2] * W[2][0]) +
                          W[0][2] * (W[1][0] * W[2][1] - W[1][1] * W[2][0]);
        auto roots = cubic_roots(-c2, c1, -c0);
        double maxabs = 0.0;
        for (const auto& r : roots) maxabs = std::max(maxabs, std::abs(r));
        const double imtol = 1e-9 * (1.0 + maxabs);
        if (std::abs(roots[0].imag()) <= imtol && std::abs(roots[1].imag()) <= imtol &&
            std::abs(roots[2].imag()) <= imtol) {
            std::array<double, 3> re{roots[0].real(), roots[1].real(), roots[2].real()};
            std::sort(re.begin(), re.end());
            for (int k = 0; k < 3; ++k) out.lam[static_cast<std::size_t>(k)] = re[static_cast<std::size_t>(k)];
        } else {
            int kr = 0;
            for (int k = 1; k < 3; ++k)
                if (std::abs(roots[static_cast<std::size_t>(k)].imag()) <
                    std::abs(roots[static_cast<std::size_t>(kr)].imag()))
                    kr = k;
            const int ka = (kr + 1) % 3, kb = (kr + 2) % 3;
            const double pre = 0.5 * (roots[static_cast<std::size_t>(ka)].real() +
                                      roots[static_cast<std::size_t>(kb)].real());
            const double pim = 0.5 * (std::abs(roots[static_cast<std::size_t>(ka)].imag()) +
                                      std::abs(roots[static_cast<std::size_t>(kb)].imag()));
            out.lam[0] = roots[static_cast<std::size_t>(kr)].real();
            out.lam[1] = std::complex<double>(pre, pim);
            out.lam[2] = std::conj(out.lam[1]);
        }
    }

    double maxabs = 0.0;
    for (int k = 0; k < m; ++k) maxabs = std::max(maxabs, std::abs(out.lam[static_cast<std::size_t>(k)]));
    for (int k = 0; k < m; ++k)
        for (int l = k + 1; l < m; ++l)
            if (std::abs(out.lam[static_cast<std::size_t>(k)] - out.lam[static_cast<std::size_t>(l)]) <=
                1e-8 * (1.0 + maxabs))
                return out;

    // eigenvectors, sharing the conjugate pair
    for (int k = 0; k < m; ++k) {
        const std::complex<double> lam = out.lam[static_cast<std::size_t>(k)];
        int partner = -1;
        for (int l = 0; l < k; ++l)
            if (lam.imag() != 0.0 &&
                std::abs(out.lam[static_cast<std::size_t>(l)] - std::conj(lam)) <=
                    1e-12 * (1.0 + maxabs))
                partner = l;
        if (partner >= 0) {
            for (int r = 0; r < m; ++r)
                out.V[static_cast<std::size_t>(r * m + k)] =
                    std::conj(out.V[static_cast<std::size_t>(r * m + partner)]);
            continue;
        }
        std::array<std::complex<double>, 3> v{};
        double best = -1.0;
        if (m == 2) {
            const std::complex<double> B00 = W[0][0] - lam, B11 = W[1][1] - lam;
            const std::array<std::array<std::complex<double>, 2>, 2> cand{
                {{W[0][1], -B00}, {B11, -std::complex<double>(W[1][0])}}};
            for (const auto& cv : cand) {
                const double nn = std::norm(cv[0]) + std::norm(cv[1]);
                if (nn > best) {
                    best = nn;
                    v[0] = cv[0];
                    v[1] = cv[1];
                }
            }
        } else {
            std::array<std::array<std::complex<double>, 3>, 3> B;
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    B[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] =
                        (r == c) ? W[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] - lam
                                 : std::complex<double>(W[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]);
            const std::array<std::pair<int, int>, 3> rows{{{0, 1}, {0, 2}, {1, 2}}};
            for (const auto& pr : rows) {
                const auto& r0 = B[static_cast<std::size_t>(pr.first)];
                const auto& r1 = B[static_cast<std::size_t>(pr.second)];
                const std::array<std::complex<double>, 3> cv{r0[1] * r1[2] - r0[2] * r1[1],
                                                             r0[2] * r1[0] - r0[0] * r1[2],
                                                             r0[0] * r1[1] - r0[1] * r1[0]};
                const double nn = std::norm(cv[0]) + std::norm(cv[1]) + std::norm(cv[2]);
                if (nn > best) {
                    best = nn;
                    v = cv;
                }
            }
        }
        if (!(best > 1e-28 * (1.0 + maxabs) * (1.0 + maxabs))) return out;
        int imax = 0;
        for (int r = 1; r < m; ++r)
            if (std::abs(v[static_cast<std::size_t>(r)]) > std::abs(v[static_cast<std::size_t>(imax)]))
                imax = r;
        const std::complex<double> piv = v[static_cast<std::size_t>(imax)];
        for (int r = 0; r < m; ++r)
            out.V[static_cast<std::size_t>(r * m + k)] = v[static_cast<std::size_t>(r)] / piv;
    }

    // invert V by Gauss-Jordan with partial pivoting
    std::array<std::complex<double>, 9> Aw = out.V;
    std::array<std::complex<double>, 9> inv{};
    for (int r = 0; r < m; ++r) inv[static_cast<std::size_t>(r * m + r)] = 1.0;
    double maxent = 0.0;
    for (int e = 0; e < m * m; ++e) maxent = std::max(maxent, std::abs(Aw[static_cast<std::size_t>(e)]));
    for (int k = 0; k < m; ++k) {
        int piv = k;
        for (int r = k + 1; r < m; ++r)
            if (std::abs(Aw[static_cast<std::size_t>(r * m + k)]) >
                std::abs(Aw[static_cast<std::size_t>(piv * m + k)]))
                piv = r;
        if (std::abs(Aw[static_cast<std::size_t>(piv * m + k)]) <= 1e-13 * (1.0 + maxent)) return out;
        if (piv != k)
            for (int c = 0; c < m; ++c) {
                std::swap(Aw[static_cast<std::size_t>(k * m + c)], Aw[static_cast<std::size_t>(piv * m + c)]);
                std::swap(inv[static_cast<std::size_t>(k * m + c)], inv[static_cast<std::size_t>(piv * m + c)]);
            }
        const std::complex<double> d = Aw[static_cast<std::size_t>(k * m + k)];
        for (int c = 0; c < m; ++c) {
            Aw[static_cast<std::size_t>(k * m + c)] /= d;
            inv[static_cast<std::size_t>(k * m + c)] /= d;
        }
        for (int r = 0; r < m; ++r) {
            if (r == k) continue;
            const std::complex<double> f = Aw[static_cast<std::size_t>(r * m + k)];
            if (f == std::complex<double>(0.0, 0.0)) continue;
            for (int c = 0; c < m; ++c) {
                Aw[static_cast<std::size_t>(r * m + c)] -= f * Aw[static_cast<std::size_t>(k * m + c)];
                inv[static_cast<std::size_t>(r * m + c)] -= f * inv[static_cast<std::size_t>(k * m + c)];
            }
        }
    }
    out.Vinv = inv;
    double n1v = 0.0, n1i = 0.0;
    for (int c = 0; c < m; ++c) {
        double sv = 0.0, si = 0.0;
        for (int r = 0; r < m; ++r) {
            sv += std::abs(out.V[static_cast<std::size_t>(r * m + c)]);
            si += std::abs(out.Vinv[static_cast<std::size_t>(r * m + c)]);
        }
        n1v = std::max(n1v, sv);
        n1i = std::max(n1i, si);
    }
    if (n1v * n1i > 1e9) return out;
    out.ok = true;
    return out;
}

// Residual of the coupled slab system for a candidate set of mode vectors.
inline double block_residual(const SparseMatrix& M, const SparseMatrix& A, const SlabSystem& sys,
                             const std::vector<std::vector<double>>& c, std::vector<double>& res) {
    const int m = sys.m, N = M.n;
    res = sys.rhs;
    std::vector<double> Mx, Ax;
    for (int b = 0; b < m; ++b) {
        M.multiply(c[static_cast<std::size_t>(b)], Mx);
        A.multiply(c[static_cast<std::size_t>(b)], Ax);
        for (int a = 0; a < m; ++a) {
            const double fa = sys.F[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
            const double ga = sys.G[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
            double* out = res.data() + static_cast<std::ptrdiff_t>(a) * N;
            if (fa != 0.0)
                for (int i = 0; i < N; ++i) out[i] -= fa * Mx[static_cast<std::size_t>(i)];
            if (ga != 0.0)
                for (int i = 0; i < N; ++i) out[i] -= ga * Ax[static_cast<std::size_t>(i)];
        }
    }
    double nn = 0.0;
    for (double v : res) nn += v * v;
    return std::sqrt(nn);
}

// Direct solution of the coupled slab system by diagonalizing the small
// temporal pencil: G^{-1} F = V diag(lam) V^{-1} turns the block matrix into
// independent shifted systems (lam_k * mass + stiffness), each complex
// symmetric. One defect-correction pass absorbs transform round-off.
inline bool solve_slab_modes(const SparseMatrix& M, const SparseMatrix& A, const SlabSystem& sys,
                             double tol, std::vector<std::vector<double>>& c) {
    const int m = sys.m, N = M.n;
    std::vector<double> Gm(static_cast<std::size_t>(m) * m), Fm(static_cast<std::size_t>(m) * m),
        eye(static_cast<std::size_t>(m) * m, 0.0);
    for (int a = 0; a < m; ++a) {
        eye[static_cast<std::size_t>(a * m + a)] = 1.0;
        for (int b = 0; b < m; ++b) {
            Fm[static_cast<std::size_t>(a * m + b)] =
                sys.F[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
            Gm[static_cast<std::size_t>(a * m + b)] =
                sys.G[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
        }
    }
    std::vector<double> Wv, Ginv;
    try {
        Wv = solve_dense(Gm, Fm, m, m);
        Ginv = solve_dense(Gm, eye, m, m);
    } catch (const std::runtime_error&) {
        return false;
    }
    std::array<std::array<double, 3>, 3> W{};
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            W[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] =
                Wv[static_cast<std::size_t>(a * m + b)];
    const PencilEig eig = pencil_eig(W, m);
    if (!eig.ok) return false;

    const double inner_tol = std::max(0.1 * tol, 1e-14);
    auto modes_solve = [&](const std::vector<double>& rhs,
                           std::vector<std::vector<double>>& out) -> bool {
        std::vector<std::vector<double>> g(static_cast<std::size_t>(m),
                                           std::vector<double>(static_cast<std::size_t>(N), 0.0));
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) {
                const double w = Ginv[static_cast<std::size_t>(a * m + b)];
                if (w == 0.0) continue;
                const double* src = rhs.data() + static_cast<std::ptrdiff_t>(b) * N;
                auto& dst = g[static_cast<std::size_t>(a)];
                for (int i = 0; i < N; ++i) dst[static_cast<std::size_t>(i)] += w * src[i];
            }
        std::vector<std::vector<std::complex<double>>> h(
            static_cast<std::size_t>(m),
            std::vector<std::complex<double>>(static_cast<std::size_t>(N)));
        for (int k = 0; k < m; ++k)
            for (int a = 0; a < m; ++a) {
                const std::complex<double> w = eig.Vinv[static_cast<std::size_t>(k * m + a)];
                if (w == std::complex<double>(0.0, 0.0)) continue;
                const auto& src = g[static_cast<std::size_t>(a)];
                auto& dst = h[static_cast<std::size_t>(k)];
                for (int i = 0; i < N; ++i) dst[static_cast<std::size_t>(i)] += w * src[static_cast<std::size_t>(i)];
            }
        std::vector<std::vector<std::complex<double>>> z(static_cast<std::size_t>(m));
        for (int k = 0; k < m; ++k) {
            const std::complex<double> lam = eig.lam[static_cast<std::size_t>(k)];
            int partner = -1;
            for (int l = 0; l < k; ++l)
                if (lam.imag() != 0.0 &&
                    std::abs(eig.lam[static_cast<std::size_t>(l)] - std::conj(lam)) <= 1e-12 * (1.0 + std::abs(lam)))
                    partner = l;
            if (partner >= 0) {
                z[static_cast<std::size_t>(k)] = z[static_cast<std::size_t>(partner)];
                for (auto& v : z[static_cast<std::size_t>(k)]) v = std::conj(v);
                continue;
            }
            if (!cocg_shifted(M, A, lam, h[static_cast<std::size_t>(k)], inner_tol,
                              z[static_cast<std::size_t>(k)]))
                return false;
        }
        out.assign(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(N), 0.0));
        std::vector<std::complex<double>> acc(static_cast<std::size_t>(N));
        for (int b = 0; b < m; ++b) {
            std::fill(acc.begin(), acc.end(), std::complex<double>(0.0, 0.0));
            for (int k = 0; k < m; ++k) {
                const std::complex<double> w = eig.V[static_cast<std::size_t>(b * m + k)];
                if (w == std::complex<double>(0.0, 0.0)) continue;
                const auto& src = z[static_cast<std::size_t>(k)];
                for (int i = 0; i < N; ++i) acc[static_cast<std::size_t>(i)] += w * src[static_cast<std::size_t>(i)];
            }
            auto& dst = out[static_cast<std::size_t>(b)];
            for (int i = 0; i < N; ++i) dst[static_cast<std::size_t>(i)] = acc[static_cast<std::size_t>(i)].real();
        }
        return true;
    };

    double bnorm = 0.0;
    for (double v : sys.rhs) bnorm += v * v;
    bnorm = std::sqrt(bnorm);
    if (!modes_solve(sys.rhs, c)) return false;
    std::vector<double> res;
    for (int pass = 0;; ++pass) {
        const double rn = block_residual(M, A, sys, c, res);
        if (rn <= 2.0 * tol * bnorm) return true;
        if (pass == 2) return false;
        std::vector<std::vector<double>> dc;
        if (!modes_solve(res, dc)) return false;
        for (int b = 0; b < m; ++b)
            for (int i = 0; i < N; ++i)
                c[static_cast<std::size_t>(b)][static_cast<std::size_t>(i)] +=
                    dc[static_cast<std::size_t>(b)][static_cast<std::size_t>(i)];
    }
}

// Fallback for slabs whose pencil is too ill-conditioned to diagonalize:
// flexible GMRES on the coupled system with a block-diagonal preconditioner
// applied by a short inner PCG sweep.
inline bool solve_slab_fgmres(const SparseMatrix& M, const SparseMatrix& A, const SlabSystem& sys,
                              double tol, std::vector<std::vector<double>>& c) {
    const int m = sys.m, N = M.n, dim = m * N;
    std::vector<SparseMatrix> P;
    P.reserve(static_cast<std::size_t>(m));
    for (int a = 0; a < m; ++a)
        P.push_back(combine_real(M, A, sys.F[static_cast<std::size_t>(a)][static_cast<std::size_t>(a)],
                                 sys.G[static_cast<std::size_t>(a)][static_cast<std::size_t>(a)]));

    std::vector<double> xb(static_cast<std::size_t>(N)), Mx, Ax;
    auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
        y.assign(static_cast<std::size_t>(dim), 0.0);
        for (int b = 0; b < m; ++b) {
            std::copy(x.begin() + static_cast<std::ptrdiff_t>(b) * N,
                      x.begin() + static_cast<std::ptrdiff_t>(b + 1) * N, xb.begin());
            M.multiply(xb, Mx);
            A.multiply(xb, Ax);
            for (int a = 0; a < m; ++a) {
                const double fa = sys.F[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
                const double ga = sys.G[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
                double* out = y.data() + static_cast<std::ptrdiff_t>(a) * N;
                if (fa != 0.0)
                    for (int i = 0; i < N; ++i) out[i] += fa * Mx[static_cast<std::size_t>(i)];
                if (ga != 0.0)
                    for (int i = 0; i < N; ++i) out[i] += ga * Ax[static_cast<std::size_t>(i)];
            }
        }
    };
    std::vector<double> rb(static_cast<std::size_t>(N)), zb;
    auto precondition = [&](const std::vector<double>& r, std::vector<double>& z) {
        z.resize(static_cast<std::size_t>(dim));
        for (int a = 0; a < m; ++a) {
            std::copy(r.begin() + static_cast<std::ptrdiff_t>(a) * N,
                      r.begin() + static_cast<std::ptrdiff_t>(a + 1) * N, rb.begin());
            pcg_loose(P[static_cast<std::size_t>(a)], rb, 1e-4, 60, zb);
            std::copy(zb.begin(), zb.end(), z.begin() + static_cast<std::ptrdiff_t>(a) * N);
        }
    };

    double bnorm = 0.0;
    for (double v : sys.rhs) bnorm += v * v;
    bnorm = std::sqrt(bnorm);
    c.assign(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(N), 0.0));
    if (bnorm == 0.0) return true;

    const int kmax = 300;
    std::vector<std::vector<double>> V, Z;
    std::vector<std::vector<double>> H;
    std::vector<double> cs(static_cast<std::size_t>(kmax), 0.0), sn(static_cast<std::size_t>(kmax), 0.0),
        gvec(static_cast<std::size_t>(kmax) + 1, 0.0);
    V.emplace_back(sys.rhs);
    for (double& v : V[0]) v /= bnorm;
    gvec[0] = bnorm;
    std::vector<double> w;
    int steps = 0;
    for (int k = 0; k < kmax; ++k) {
        Z.emplace_back();
        precondition(V[static_cast<std::size_t>(k)], Z.back());
        apply(Z.back(), w);
        H.emplace_back(static_cast<std::size_t>(k) + 2, 0.0);
        auto& hk = H.back();
        for (int i = 0; i <= k; ++i) {
            double d = 0.0;
            const auto& vi = V[static_cast<std::size_t>(i)];
            for (int r = 0; r < dim; ++r) d += w[static_cast<std::size_t>(r)] * vi[static_cast<std::size_t>(r)];
            hk[static_cast<std::size_t>(i)] = d;
            for (int r = 0; r < dim; ++r) w[static_cast<std::size_t>(r)] -= d * vi[static_cast<std::size_t>(r)];
        }
        double wn = 0.0;
        for (double v : w) wn += v * v;
        wn = std::sqrt(wn);
        hk[static_cast<std::size_t>(k) + 1] = wn;
        for (int i = 0; i < k; ++i) {
            const double t = cs[static_cast<std::size_t>(i)] * hk[static_cast<std::size_t>(i)] +
                             sn[static_cast<std::size_t>(i)] * hk[static_cast<std::size_t>(i) + 1];
            hk[static_cast<std::size_t>(i) + 1] = -sn[static_cast<std::size_t>(i)] * hk[static_cast<std::size_t>(i)] +
                                                  cs[static_cast<std::size_t>(i)] * hk[static_cast<std::size_t>(i) + 1];
            hk[static_cast<std::size_t>(i)] = t;
        }
        const double denom = std::hypot(hk[static_cast<std::size_t>(k)], hk[static_cast<std::size_t>(k) + 1]);
        if (denom == 0.0) return false;
        cs[static_cast<std::size_t>(k)] = hk[static_cast<std::size_t>(k)] / denom;
        sn[static_cast<std::size_t>(k)] = hk[static_cast<std::size_t>(k) + 1] / denom;
        hk[static_cast<std::size_t>(k)] = denom;
        hk[static_cast<std::size_t>(k) + 1] = 0.0;
        gvec[static_cast<std::size_t>(k) + 1] = -sn[static_cast<std::size_t>(k)] * gvec[static_cast<std::size_t>(k)];
        gvec[static_cast<std::size_t>(k)] = cs[static_cast<std::size_t>(k)] * gvec[static_cast<std::size_t>(k)];
        steps = k + 1;
        if (std::abs(gvec[static_cast<std::size_t>(k) + 1]) <= tol * bnorm) break;
        if (wn == 0.0) break;
        V.emplace_back(w);
        for (double& v : V.back()) v /= wn;
    }

    std::vector<double> y(static_cast<std::size_t>(steps), 0.0);
    for (int i = steps - 1; i >= 0; --i) {
        double s = gvec[static_cast<std::size_t>(i)];
        for (int l = i + 1; l < steps; ++l)
            s -= H[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(l)];
        y[static_cast<std::size_t>(i)] = s / H[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
    }
    std::vector<double> x(static_cast<std::size_t>(dim), 0.0);
    for (int l = 0; l < steps; ++l) {
        const auto& zl = Z[static_cast<std::size_t>(l)];
        const double yl = y[static_cast<std::size_t>(l)];
        for (int r = 0; r < dim; ++r) x[static_cast<std::size_t>(r)] += yl * zl[static_cast<std::size_t>(r)];
    }
    for (int b = 0; b < m; ++b)
        std::copy(x.begin() + static_cast<std::ptrdiff_t>(b) * N,
                  x.begin() + static_cast<std::ptrdiff_t>(b + 1) * N,
                  c[static_cast<std::size_t>(b)].begin());
    std::vector<double> res;
    return block_residual(M, A, sys, c, res) <= 10.0 * tol * bnorm;
}

inline void solve_slab(const SparseMatrix& M, const SparseMatrix& A, const SlabSystem& sys,
                       double tol, std::vector<std::vector<double>>& c) {
    const int m = sys.m, N = M.n;
    c.assign(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(N), 0.0));
    double bnorm = 0.0;
    for (double v : sys.rhs) bnorm += v * v;
    if (bnorm == 0.0) return;
    if (m == 1) {
        const SparseMatrix C = combine_real(M, A, sys.F[0][0], sys.G[0][0]);
        c[0] = sparse_solve(C, sys.rhs, tol);
        return;
    }
    if (solve_slab_modes(M, A, sys, tol, c)) return;
    if (solve_slab_fgmres(M, A, sys, tol, c)) return;
    std::vector<double> res;
    const double rn = block_residual(M, A, sys, c, res);
    throw SolverFailure(rn / std::sqrt(bnorm));
}

inline SlabSystem build_slab_system(const SparseMatrix& Mm, const SparseMatrix& Am,
                                    const std::vector<double>& slope_pairings,
                                    const MarchConfig& cfg, int j,
                                    const std::vector<std::vector<std::vector<double>>>& mass_history,
                                    const std::vector<double>& u_prev, HistoryBlocks& blocks) {
    const int m = cfg.m;
    const int N = cfg.space.ndof;
    const double tau = cfg.grid.tau[static_cast<std::size_t>(j) - 1];
    SlabSystem sys;
    sys.j = j;
    sys.m = m;
    const FracCouplingBlock diag = blocks.get(j, j);
    const auto ghat = trial_test_overlap(m);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
            sys.F[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] =
                diag.F[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
            sys.G[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] =
                tau * ghat[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
        }
    sys.rhs.assign(static_cast<std::size_t>(m) * N, 0.0);

    for (std::size_t k = 0; k < cfg.load.profiles.size(); ++k) {
        const auto mom = slab_moments(cfg.grid, j, m, cfg.load.profiles[k]);
        const auto& spat = cfg.load.spatial[k];
        for (int a = 0; a < m; ++a) {
            const double w = mom[static_cast<std::size_t>(a)];
            if (w == 0.0) continue;
            double* out = sys.rhs.data() + static_cast<std::ptrdiff_t>(a) * N;
            for (int i = 0; i < N; ++i) out[i] += w * spat[static_cast<std::size_t>(i)];
        }
    }

    if (!slope_pairings.empty()) {
        const auto om = omega_load(cfg.gamma, cfg.grid, j, 0.0, m);
        for (int a = 0; a < m; ++a) {
            const double w = om[static_cast<std::size_t>(a)];
            double* out = sys.rhs.data() + static_cast<std::ptrdiff_t>(a) * N;
            for (int i = 0; i < N; ++i) out[i] += w * slope_pairings[static_cast<std::size_t>(i)];
        }
    }

    for (int i = 1; i < j; ++i) {
        const FracCouplingBlock blk = blocks.get(i, j);
        for (int a = 0; a < m; ++a) {
            double* out = sys.rhs.data() + static_cast<std::ptrdiff_t>(a) * N;
            for (int b = 0; b < m; ++b) {
                const double f = blk.F[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
                if (f == 0.0) continue;
                const auto& mc = mass_history[static_cast<std::size_t>(i) - 1][static_cast<std::size_t>(b)];
                for (int r = 0; r < N; ++r) out[r] -= f * mc[static_cast<std::size_t>(r)];
            }
        }
    }

    std::vector<double> Au;
    Am.multiply(u_prev, Au);
    for (int i = 0; i < N; ++i) sys.rhs[static_cast<std::size_t>(i)] -= tau * Au[static_cast<std::size_t>(i)];

    for (int a = 0; a < m; ++a)
        for (int i = 0; i < N; ++i)
            if (cfg.space.dirichlet_mask[static_cast<std::size_t>(i)])
                sys.rhs[static_cast<std::size_t>(a) * static_cast<std::size_t>(N) +
                        static_cast<std::size_t>(i)] = 0.0;
    return sys;
}

inline void check_stepper_inputs(double gamma, int m, const TimeGrid& grid) {
    if (!(gamma > 1.0 && gamma < 2.0))
        throw std::invalid_argument("stepper: gamma must lie in (1,2)");
    if (m < 1 || m > 3) throw std::invalid_argument("stepper: m must be in {1,2,3}");
    if (grid.J < 1 || grid.t.size() != static_cast<std::size_t>(grid.J) + 1)
        throw std::invalid_argument("stepper: grid is not initialized");
}

inline void check_march_config(const MarchConfig& cfg) {
    check_stepper_inputs(cfg.gamma, cfg.m, cfg.grid);
    const int N = cfg.space.ndof;
    if (N <= 0 || cfg.space.dirichlet_mask.size() != static_cast<std::size_t>(N))
        throw std::invalid_argument("stepper: space is not initialized");
    if (!(cfg.tol > 0.0)) throw std::invalid_argument("stepper: tol must be positive");
    if (!cfg.u0.empty() && cfg.u0.size() != static_cast<std::size_t>(N))
        throw std::invalid_argument("stepper: u0 size mismatch");
    if (!cfg.u1.empty() && cfg.u1.size() != static_cast<std::size_t>(N))
        throw std::invalid_argument("stepper: u1 size mismatch");
    if (cfg.load.profiles.size() != cfg.load.spatial.size())
        throw std::invalid_argument("stepper: load profiles and spatial pairings differ in count");
    for (const auto& p : cfg.load.profiles)
        if (!(p.exponent > -1.0))
            throw std::invalid_argument("stepper: load profile exponent must exceed -1");
    for (const auto& s : cfg.load.spatial)
        if (s.size() != static_cast<std::size_t>(N))
            throw std::invalid_argument("stepper: load pairing size mismatch");
}

// Pairings <u1, w_i> with constrained rows cleared; empty when u1 is absent
// or identically zero.
inline std::vector<double> slope_pairings(const SparseMatrix& Mfull, const MarchConfig& cfg) {
    if (cfg.u1.empty()) return {};
    bool any = false;
    for (double v : cfg.u1)
        if (v != 0.0) {
            any = true;
            break;
        }
    if (!any) return {};
    std::vector<double> y;
    Mfull.multiply(cfg.u1, y);
    for (std::size_t i = 0; i < y.size(); ++i)
        if (cfg.space.dirichlet_mask[i]) y[i] = 0.0;
    return y;
}

}  // namespace detail

inline SlabSystem assemble_slab_system(int j, const MarchConfig& cfg, const Trajectory& history) {
    detail::check_march_config(cfg);
    if (j < 1 || j > cfg.grid.J)
        throw std::invalid_argument("assemble_slab_system: slab out of range");
    if (static_cast<int>(history.coeff.size()) < j - 1)
        throw std::invalid_argument("assemble_slab_system: history does not reach the slab");
    const int N = cfg.space.ndof;
    if (!history.start.empty() && history.start.size() != static_cast<std::size_t>(N))
        throw std::invalid_argument("assemble_slab_system: history start size mismatch");

    Operators ops = assemble_operators(cfg.space);
    const SparseMatrix Mfull = ops.mass;
    apply_dirichlet(ops.mass, cfg.space.dirichlet_mask);
    apply_dirichlet(ops.stiffness, cfg.space.dirichlet_mask);
    const std::vector<double> slope = detail::slope_pairings(Mfull, cfg);

    std::vector<std::vector<std::vector<double>>> mass_history;
    std::vector<double> u_prev =
        history.start.empty() ? std::vector<double>(static_cast<std::size_t>(N), 0.0) : history.start;
    for (int i = 1; i < j; ++i) {
        const auto& slab = history.coeff[static_cast<std::size_t>(i) - 1];
        if (static_cast<int>(slab.size()) != cfg.m ||
            slab[0].size() != static_cast<std::size_t>(N))
            throw std::invalid_argument("assemble_slab_system: history coefficient shape mismatch");
        std::vector<std::vector<double>> row;
        row.reserve(static_cast<std::size_t>(cfg.m));
        for (int b = 0; b < cfg.m; ++b) {
            std::vector<double> mc;
            ops.mass.multiply(slab[static_cast<std::size_t>(b)], mc);
            row.push_back(std::move(mc));
        }
        mass_history.push_back(std::move(row));
        for (int r = 0; r < N; ++r)
            u_prev[static_cast<std::size_t>(r)] += slab[0][static_cast<std::size_t>(r)];
    }
    detail::HistoryBlocks blocks(0.5 * (cfg.gamma - 1.0), cfg.grid, cfg.m);
    return detail::build_slab_system(ops.mass, ops.stiffness, slope, cfg, j, mass_history, u_prev,
                                     blocks);
}

inline Trajectory march(const MarchConfig& cfg) {
    detail::check_march_config(cfg);
    const int N = cfg.space.ndof, m = cfg.m, J = cfg.grid.J;

    Operators ops = assemble_operators(cfg.space);
    const SparseMatrix Mfull = ops.mass;
    apply_dirichlet(ops.mass, cfg.space.dirichlet_mask);
    apply_dirichlet(ops.stiffness, cfg.space.dirichlet_mask);
    detail::require_same_pattern(ops.mass, ops.stiffness);
    const std::vector<double> slope = detail::slope_pairings(Mfull, cfg);

    Trajectory traj;
    traj.grid = cfg.grid;
    traj.space = cfg.space;
    traj.m = m;
    traj.start = cfg.u0.empty() ? std::vector<double>(static_cast<std::size_t>(N), 0.0) : cfg.u0;

    std::vector<std::vector<std::vector<double>>> mass_history;
    mass_history.reserve(static_cast<std::size_t>(J));
    std::vector<double> u_prev = traj.start;
    detail::HistoryBlocks blocks(0.5 * (cfg.gamma - 1.0), cfg.grid, m);

    for (int j = 1; j <= J; ++j) {
        const SlabSystem sys = detail::build_slab_system(ops.mass, ops.stiffness, slope, cfg, j,
                                                         mass_history, u_prev, blocks);
        std::vector<std::vector<double>> c;
        try {
            detail::solve_slab(ops.mass, ops.stiffness, sys, cfg.tol, c);
        } catch (const SolverFailure& err) {
            throw SolverFailure(err.residual, "march: slab " + std::to_string(j));
        }
        std::vector<std::vector<double>> row;
        row.reserve(static_cast<std::size_t>(m));
        for (int b = 0; b < m; ++b) {
            std::vector<double> mc;
            ops.mass.multiply(c[static_cast<std::size_t>(b)], mc);
            row.push_back(std::move(mc));
        }
        mass_history.push_back(std::move(row));
        for (int r = 0; r < N; ++r)
            u_prev[static_cast<std::size_t>(r)] += c[0][static_cast<std::size_t>(r)];
        traj.coeff.push_back(std::move(c));
    }
    return traj;
}

// Scalar twin of the field march: mass 1 and stiffness lambda, solved slab
// by slab with small direct systems. Used for cross-validation.
struct ScalarConfig {
    double gamma = 1.5;
    int m = 1;
    TimeGrid grid;
    double lambda = 1.0;
    double c0 = 0.0;
    double c1 = 0.0;
    TimeProfile g;
};

struct ScalarTrajectory {
    TimeGrid grid;
    int m = 1;
    double start = 0.0;
    std::vector<std::array<double, 3>> coeff;

    double at_breakpoint(int j) const {
        if (j < 0 || j > static_cast<int>(coeff.size()))
            throw std::invalid_argument("ScalarTrajectory::at_breakpoint: index out of range");
        double y = start;
        for (int i = 1; i <= j; ++i) y += coeff[static_cast<std::size_t>(i) - 1][0];
        return y;
    }

    double value(double t) const {
        if (t < 0.0 || t > grid.T * (1.0 + 1e-12))
            throw std::invalid_argument("ScalarTrajectory::value: t out of range");
        if (t <= 0.0) return start;
        int j = static_cast<int>(std::lower_bound(grid.t.begin() + 1, grid.t.end(), t) -
                                 grid.t.begin());
        j = std::min(j, grid.J);
        const double theta =
            std::min(1.0, std::max(0.0, (t - grid.slab_left(j)) /
                                            grid.tau[static_cast<std::size_t>(j) - 1]));
        const TrialBasis trial(m);
        double y = at_breakpoint(j - 1);
        for (int b = 1; b <= m; ++b)
            y += coeff[static_cast<std::size_t>(j) - 1][static_cast<std::size_t>(b) - 1] *
                 trial.eval(b, theta);
        return y;
    }
};

inline ScalarTrajectory march_scalar(const ScalarConfig& cfg) {
    detail::check_stepper_inputs(cfg.gamma, cfg.m, cfg.grid);
    if (!(cfg.lambda > 0.0)) throw std::invalid_argument("march_scalar: lambda must be positive");
    if (!(cfg.g.exponent > -1.0))
        throw std::invalid_argument("march_scalar: load profile exponent must exceed -1");
    const int m = cfg.m, J = cfg.grid.J;
    const auto ghat = trial_test_overlap(m);
    detail::HistoryBlocks blocks(0.5 * (cfg.gamma - 1.0), cfg.grid, m);

    ScalarTrajectory out;
    out.grid = cfg.grid;
    out.m = m;
    out.start = cfg.c0;
    double y = cfg.c0;
    for (int j = 1; j <= J; ++j) {
        const double tau = cfg.grid.tau[static_cast<std::size_t>(j) - 1];
        const FracCouplingBlock diag = blocks.get(j, j);
        std::vector<double> A(static_cast<std::size_t>(m) * m), rhs(static_cast<std::size_t>(m));
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b)
                A[static_cast<std::size_t>(a * m + b)] =
                    diag.F[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] +
                    cfg.lambda * tau * ghat[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
        const auto mom = detail::slab_moments(cfg.grid, j, m, cfg.g);
        std::vector<double> om;
        if (cfg.c1 != 0.0) om = omega_load(cfg.gamma, cfg.grid, j, 0.0, m);
        for (int a = 0; a < m; ++a) {
            double r = mom[static_cast<std::size_t>(a)];
            if (cfg.c1 != 0.0) r += om[static_cast<std::size_t>(a)] * cfg.c1;
            rhs[static_cast<std::size_t>(a)] = r;
        }
        for (int i = 1; i < j; ++i) {
            const FracCouplingBlock blk = blocks.get(i, j);
            for (int a = 0; a < m; ++a)
                for (int b = 0; b < m; ++b)
                    rhs[static_cast<std::size_t>(a)] -=
                        blk.F[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] *
                        out.coeff[static_cast<std::size_t>(i) - 1][static_cast<std::size_t>(b)];
        }
        rhs[0] -= tau * cfg.lambda * y;
        const std::vector<double> x = detail::solve_dense(A, rhs, m, 1);
        std::array<double, 3> row{};
        for (int b = 0; b < m; ++b) row[static_cast<std::size_t>(b)] = x[static_cast<std::size_t>(b)];
        out.coeff.push_back(row);
        y += row[0];
    }
    return out;
}

}  // namespace fracwave
