#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <fracwave/quadrature.hpp>

namespace fracwave {

struct TriMesh {
    std::vector<std::array<double, 2>> vertices;
    std::vector<std::array<int, 3>> triangles;  // counterclockwise
    std::vector<bool> boundary_vertex;
};

// M x M grid of squares, each split along the lower-left to upper-right
// diagonal. h = sqrt(2)/M.
inline TriMesh build_unit_square_mesh(int M) {
    if (M < 1) throw std::invalid_argument("build_unit_square_mesh: M must be >= 1");
    TriMesh mesh;
    const int V = (M + 1) * (M + 1);
    mesh.vertices.resize(static_cast<std::size_t>(V));
    mesh.boundary_vertex.resize(static_cast<std::size_t>(V));
    for (int j = 0; j <= M; ++j) {
        for (int i = 0; i <= M; ++i) {
            const int v = j * (M + 1) + i;
            mesh.vertices[static_cast<std::size_t>(v)] = {static_cast<double>(i) / M,
                                                          static_cast<double>(j) / M};
            mesh.boundary_vertex[static_cast<std::size_t>(v)] =
                (i == 0 || i == M || j == 0 || j == M);
        }
    }
    mesh.triangles.reserve(static_cast<std::size_t>(2 * M * M));
    for (int j = 0; j < M; ++j) {
        for (int i = 0; i < M; ++i) {
            const int v00 = j * (M + 1) + i;
            const int v10 = v00 + 1;
            const int v01 = v00 + M + 1;
            const int v11 = v01 + 1;
            mesh.triangles.push_back({v00, v10, v11});
            mesh.triangles.push_back({v00, v11, v01});
        }
    }
    return mesh;
}

namespace detail {

// dense row-major solve of A X = B with partial pivoting; returns X (n x m)
inline std::vector<double> solve_dense(std::vector<double> A, std::vector<double> B, int n,
                                       int m) {
    for (int k = 0; k < n; ++k) {
        int piv = k;
        for (int r = k + 1; r < n; ++r)
            if (std::abs(A[static_cast<std::size_t>(r) * n + k]) >
                std::abs(A[static_cast<std::size_t>(piv) * n + k]))
                piv = r;
        if (A[static_cast<std::size_t>(piv) * n + k] == 0.0)
            throw std::runtime_error("solve_dense: singular matrix");
        if (piv != k) {
            for (int c = 0; c < n; ++c)
                std::swap(A[static_cast<std::size_t>(k) * n + c],
                          A[static_cast<std::size_t>(piv) * n + c]);
            for (int c = 0; c < m; ++c)
                std::swap(B[static_cast<std::size_t>(k) * m + c],
                          B[static_cast<std::size_t>(piv) * m + c]);
        }
        for (int r = k + 1; r < n; ++r) {
            const double f =
                A[static_cast<std::size_t>(r) * n + k] / A[static_cast<std::size_t>(k) * n + k];
            if (f == 0.0) continue;
            for (int c = k; c < n; ++c)
                A[static_cast<std::size_t>(r) * n + c] -=
                    f * A[static_cast<std::size_t>(k) * n + c];
            for (int c = 0; c < m; ++c)
                B[static_cast<std::size_t>(r) * m + c] -=
                    f * B[static_cast<std::size_t>(k) * m + c];
        }
    }
    std::vector<double> X(static_cast<std::size_t>(n) * m);
    for (int r = n - 1; r >= 0; --r) {
        for (int c = 0; c < m; ++c) {
            double s = B[static_cast<std::size_t>(r) * m + c];
            for (int k = r + 1; k < n; ++k)
                s -= A[static_cast<std::size_t>(r) * n + k] * X[static_cast<std::size_t>(k) * m + c];
            X[static_cast<std::size_t>(r) * m + c] = s / A[static_cast<std::size_t>(r) * n + r];
        }
    }
    return X;
}

// Lagrange basis and quadrature tables on the reference triangle
// (0,0)-(1,0)-(0,1). The rule collapses the triangle onto a square and pairs
// a weighted Gauss rule in the radial direction with a Gauss-Legendre rule,
// 7 points each, exact for total degree 13.
struct RefElement {
    int n = 1;
    int nloc = 3;
    int nq = 0;
    std::vector<std::array<int, 2>> node_steps;
    std::vector<std::array<int, 2>> powers;
    std::vector<std::vector<double>> coeff;               // [l][k] monomial coefficients
    std::vector<double> qw;                               // [q]
    std::vector<std::array<double, 2>> qp;                // [q]
    std::vector<std::vector<double>> val;                 // [q][l]
    std::vector<std::vector<std::array<double, 2>>> grd;  // [q][l]
};

inline RefElement build_ref_element(int n) {
    RefElement ref;
    ref.n = n;
    ref.nloc = (n + 1) * (n + 2) / 2;
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i + j <= n; ++i) {
            ref.node_steps.push_back({i, j});
            ref.powers.push_back({i, j});
        }

    const int L = ref.nloc;
    std::vector<double> V(static_cast<std::size_t>(L) * L), I(static_cast<std::size_t>(L) * L);
    for (int r = 0; r < L; ++r) {
        const double x = static_cast<double>(ref.node_steps[static_cast<std::size_t>(r)][0]) / n;
        const double y = static_cast<double>(ref.node_steps[static_cast<std::size_t>(r)][1]) / n;
        for (int k = 0; k < L; ++k)
            V[static_cast<std::size_t>(r) * L + k] =
                std::pow(x, ref.powers[static_cast<std::size_t>(k)][0]) *
                std::pow(y, ref.powers[static_cast<std::size_t>(k)][1]);
        I[static_cast<std::size_t>(r) * L + r] = 1.0;
    }
    std::vector<double> C = solve_dense(V, I, L, L);
    // two rounds of refinement keep the partition of unity near machine level
    for (int pass = 0; pass < 2; ++pass) {
        std::vector<double> R(static_cast<std::size_t>(L) * L);
        for (int r = 0; r < L; ++r)
            for (int c = 0; c < L; ++c) {
                double s = (r == c) ? 1.0 : 0.0;
                for (int k = 0; k < L; ++k)
                    s -= V[static_cast<std::size_t>(r) * L + k] *
                         C[static_cast<std::size_t>(k) * L + c];
                R[static_cast<std::size_t>(r) * L + c] = s;
            }
        const std::vector<double> D = solve_dense(V, R, L, L);
        for (std::size_t e = 0; e < C.size(); ++e) C[e] += D[e];
    }
    ref.coeff.assign(static_cast<std::size_t>(L), std::vector<double>(static_cast<std::size_t>(L)));
    for (int l = 0; l < L; ++l)
        for (int k = 0; k < L; ++k)
            ref.coeff[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)] =
                C[static_cast<std::size_t>(k) * L + l];

    const int k = 7;
    const auto& radial = gauss_jacobi(k, 0.0, 1.0);
    const auto& angular = gauss_legendre(k);
    for (int q = 0; q < k; ++q) {
        const double u = 0.5 * (radial.nodes[static_cast<std::size_t>(q)] + 1.0);
        const double wu = 0.25 * radial.weights[static_cast<std::size_t>(q)];
        for (int r = 0; r < k; ++r) {
            const double v = 0.5 * (angular.nodes[static_cast<std::size_t>(r)] + 1.0);
            const double wv = 0.5 * angular.weights[static_cast<std::size_t>(r)];
            ref.qp.push_back({u * (1.0 - v), u * v});
            ref.qw.push_back(wu * wv);
        }
    }
    ref.nq = static_cast<int>(ref.qp.size());

    ref.val.assign(static_cast<std::size_t>(ref.nq),
                   std::vector<double>(static_cast<std::size_t>(L)));
    ref.grd.assign(static_cast<std::size_t>(ref.nq),
                   std::vector<std::array<double, 2>>(static_cast<std::size_t>(L)));
    for (int q = 0; q < ref.nq; ++q) {
        const double x = ref.qp[static_cast<std::size_t>(q)][0];
        const double y = ref.qp[static_cast<std::size_t>(q)][1];
        for (int l = 0; l < L; ++l) {
            double f = 0.0, fx = 0.0, fy = 0.0;
            for (int kk = 0; kk < L; ++kk) {
                const int p = ref.powers[static_cast<std::size_t>(kk)][0];
                const int s = ref.powers[static_cast<std::size_t>(kk)][1];
                const double ck = ref.coeff[static_cast<std::size_t>(l)][static_cast<std::size_t>(kk)];
                if (ck == 0.0) continue;
                const double xp = std::pow(x, p), ys = std::pow(y, s);
                f += ck * xp * ys;
                if (p > 0) fx += ck * p * std::pow(x, p - 1) * ys;
                if (s > 0) fy += ck * s * xp * std::pow(y, s - 1);
            }
            ref.val[static_cast<std::size_t>(q)][static_cast<std::size_t>(l)] = f;
            ref.grd[static_cast<std::size_t>(q)][static_cast<std::size_t>(l)] = {fx, fy};
        }
    }
    return ref;
}

inline const RefElement& ref_element(int n) {
    static std::mutex mtx;
    static std::map<int, RefElement> cache;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, build_ref_element(n)).first;
    return it->second;
}

}  // namespace detail

struct FeSpace {
    TriMesh mesh;
    int n = 1;
    int ndof = 0;
    std::vector<std::array<double, 2>> dof_coords;
    std::vector<std::vector<int>> elem_dofs;
    std::vector<bool> dirichlet_mask;
};

inline FeSpace build_fe_space(const TriMesh& mesh, int n) {
    if (n < 1 || n > 4) throw std::invalid_argument("build_fe_space: n must be in {1,2,3,4}");
    const auto& ref = detail::ref_element(n);
    FeSpace sp;
    sp.mesh = mesh;
    sp.n = n;
    std::map<std::pair<long long, long long>, int> ids;
    auto dof_at = [&](double x, double y) {
        const std::pair<long long, long long> key{std::llround(x * 1e12),
                                                  std::llround(y * 1e12)};
        auto it = ids.find(key);
        if (it != ids.end()) return it->second;
        const int id = sp.ndof++;
        ids.emplace(key, id);
        sp.dof_coords.push_back({x, y});
        return id;
    };
    sp.elem_dofs.resize(mesh.triangles.size());
    for (std::size_t e = 0; e < mesh.triangles.size(); ++e) {
        const auto& tri = mesh.triangles[e];
        const auto& p0 = mesh.vertices[static_cast<std::size_t>(tri[0])];
        const auto& p1 = mesh.vertices[static_cast<std::size_t>(tri[1])];
        const auto& p2 = mesh.vertices[static_cast<std::size_t>(tri[2])];
        sp.elem_dofs[e].resize(static_cast<std::size_t>(ref.nloc));
        for (int r = 0; r < ref.nloc; ++r) {
            const double s = static_cast<double>(ref.node_steps[static_cast<std::size_t>(r)][0]) / n;
            const double t = static_cast<double>(ref.node_steps[static_cast<std::size_t>(r)][1]) / n;
            const double x = p0[0] + (p1[0] - p0[0]) * s + (p2[0] - p0[0]) * t;
            const double y = p0[1] + (p1[1] - p0[1]) * s + (p2[1] - p0[1]) * t;
            sp.elem_dofs[e][static_cast<std::size_t>(r)] = dof_at(x, y);
        }
    }

    std::map<std::pair<int, int>, int> edge_count;
    for (const auto& tri : mesh.triangles)
        for (int s = 0; s < 3; ++s) {
            const int a = tri[static_cast<std::size_t>(s)];
            const int b = tri[static_cast<std::size_t>((s + 1) % 3)];
            ++edge_count[{std::min(a, b), std::max(a, b)}];
        }
    sp.dirichlet_mask.assign(static_cast<std::size_t>(sp.ndof), false);
    for (std::size_t e = 0; e < mesh.triangles.size(); ++e) {
        const auto& tri = mesh.triangles[e];
        for (int s = 0; s < 3; ++s) {
            const int a = tri[static_cast<std::size_t>(s)];
            const int b = tri[static_cast<std::size_t>((s + 1) % 3)];
            if (edge_count[{std::min(a, b), std::max(a, b)}] != 1) continue;
            for (int r = 0; r < ref.nloc; ++r) {
                const int i = ref.node_steps[static_cast<std::size_t>(r)][0];
                const int j = ref.node_steps[static_cast<std::size_t>(r)][1];
                const bool on_edge = (s == 0 && j == 0) || (s == 1 && i + j == n) ||
                                     (s == 2 && i == 0);
                if (on_edge)
                    sp.dirichlet_mask[static_cast<std::size_t>(sp.elem_dofs[e][static_cast<std::size_t>(r)])] =
                        true;
            }
        }
    }
    return sp;
}

struct SparseMatrix {
    int n = 0;
    std::vector<int> row_offsets;
    std::vector<int> col_indices;
    std::vector<double> values;

    void multiply(const std::vector<double>& x, std::vector<double>& y) const {
        y.assign(static_cast<std::size_t>(n), 0.0);
        for (int r = 0; r < n; ++r) {
            double s = 0.0;
            for (int e = row_offsets[static_cast<std::size_t>(r)];
                 e < row_offsets[static_cast<std::size_t>(r) + 1]; ++e)
                s += values[static_cast<std::size_t>(e)] *
                     x[static_cast<std::size_t>(col_indices[static_cast<std::size_t>(e)])];
            y[static_cast<std::size_t>(r)] = s;
        }
    }

    double at(int r, int c) const {
        const auto lo = col_indices.begin() + row_offsets[static_cast<std::size_t>(r)];
        const auto hi = col_indices.begin() + row_offsets[static_cast<std::size_t>(r) + 1];
        const auto it = std::lower_bound(lo, hi, c);
        if (it == hi || *it != c) return 0.0;
        return values[static_cast<std::size_t>(it - col_indices.begin())];
    }
};

namespace detail {

inline SparseMatrix compress_rows(const std::vector<std::map<int, double>>& rows) {
    SparseMatrix A;
    A.n = static_cast<int>(rows.size());
    A.row_offsets.resize(rows.size() + 1, 0);
    std::size_t nnz = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        nnz += rows[r].size();
        A.row_offsets[r + 1] = static_cast<int>(nnz);
    }
    A.col_indices.reserve(nnz);
    A.values.reserve(nnz);
    for (const auto& row : rows)
        for (const auto& [c, v] : row) {
            A.col_indices.push_back(c);
            A.values.push_back(v);
        }
    return A;
}

struct ElementGeometry {
    double det = 0.0;        // twice the signed area
    double it[2][2] = {};    // inverse transpose of the affine map
};

inline ElementGeometry element_geometry(const TriMesh& mesh, std::size_t e) {
    const auto& tri = mesh.triangles[e];
    const auto& p0 = mesh.vertices[static_cast<std::size_t>(tri[0])];
    const auto& p1 = mesh.vertices[static_cast<std::size_t>(tri[1])];
    const auto& p2 = mesh.vertices[static_cast<std::size_t>(tri[2])];
    const double a = p1[0] - p0[0], b = p2[0] - p0[0];
    const double c = p1[1] - p0[1], d = p2[1] - p0[1];
    ElementGeometry g;
    g.det = a * d - b * c;
    if (!(g.det > 0.0))
        throw std::invalid_argument("element_geometry: triangle must be counterclockwise");
    g.it[0][0] = d / g.det;
    g.it[0][1] = -c / g.det;
    g.it[1][0] = -b / g.det;
    g.it[1][1] = a / g.det;
    return g;
}

}  // namespace detail

struct Operators {
    SparseMatrix mass;
    SparseMatrix stiffness;
};

inline Operators assemble_operators(const FeSpace& sp) {
    const auto& ref = detail::ref_element(sp.n);
    const int L = ref.nloc;
    std::vector<std::map<int, double>> mrows(static_cast<std::size_t>(sp.ndof));
    std::vector<std::map<int, double>> arows(static_cast<std::size_t>(sp.ndof));
    std::vector<double> mloc(static_cast<std::size_t>(L) * L);
    std::vector<double> aloc(static_cast<std::size_t>(L) * L);
    std::vector<std::array<double, 2>> g(static_cast<std::size_t>(L));
    for (std::size_t e = 0; e < sp.mesh.triangles.size(); ++e) {
        const auto geo = detail::element_geometry(sp.mesh, e);
        std::fill(mloc.begin(), mloc.end(), 0.0);
        std::fill(aloc.begin(), aloc.end(), 0.0);
        for (int q = 0; q < ref.nq; ++q) {
            const double w = ref.qw[static_cast<std::size_t>(q)] * geo.det;
            const auto& vq = ref.val[static_cast<std::size_t>(q)];
            const auto& gq = ref.grd[static_cast<std::size_t>(q)];
            for (int l = 0; l < L; ++l)
                g[static_cast<std::size_t>(l)] = {
                    geo.it[0][0] * gq[static_cast<std::size_t>(l)][0] +
                        geo.it[0][1] * gq[static_cast<std::size_t>(l)][1],
                    geo.it[1][0] * gq[static_cast<std::size_t>(l)][0] +
                        geo.it[1][1] * gq[static_cast<std::size_t>(l)][1]};
            for (int a = 0; a < L; ++a)
                for (int b = 0; b < L; ++b) {
                    mloc[static_cast<std::size_t>(a) * L + b] +=
                        w * vq[static_cast<std::size_t>(a)] * vq[static_cast<std::size_t>(b)];
                    aloc[static_cast<std::size_t>(a) * L + b] +=
                        w * (g[static_cast<std::size_t>(a)][0] * g[static_cast<std::size_t>(b)][0] +
                             g[static_cast<std::size_t>(a)][1] * g[static_cast<std::size_t>(b)][1]);
                }
        }
        for (int a = 0; a < L; ++a) {
            const int ga = sp.elem_dofs[e][static_cast<std::size_t>(a)];
            for (int b = 0; b < L; ++b) {
                const int gb = sp.elem_dofs[e][static_cast<std::size_t>(b)];
                mrows[static_cast<std::size_t>(ga)][gb] += mloc[static_cast<std::size_t>(a) * L + b];
                arows[static_cast<std::size_t>(ga)][gb] += aloc[static_cast<std::size_t>(a) * L + b];
            }
        }
    }
    return {detail::compress_rows(mrows), detail::compress_rows(arows)};
}

// zero out masked rows and columns and place ones on the masked diagonal
inline void apply_dirichlet(SparseMatrix& A, const std::vector<bool>& mask) {
    if (static_cast<int>(mask.size()) != A.n)
        throw std::invalid_argument("apply_dirichlet: mask size mismatch");
    for (int r = 0; r < A.n; ++r)
        for (int e = A.row_offsets[static_cast<std::size_t>(r)];
             e < A.row_offsets[static_cast<std::size_t>(r) + 1]; ++e) {
            const int c = A.col_indices[static_cast<std::size_t>(e)];
            if (mask[static_cast<std::size_t>(r)] || mask[static_cast<std::size_t>(c)])
                A.values[static_cast<std::size_t>(e)] =
                    (r == c && mask[static_cast<std::size_t>(r)]) ? 1.0 : 0.0;
        }
}

struct SolverFailure : std::runtime_error {
    double residual;
    explicit SolverFailure(double r)
        : std::runtime_error("sparse_solve: no convergence, relative residual " +
                             std::to_string(r)),
          residual(r) {}
    SolverFailure(double r, const std::string& where)
        : std::runtime_error(where + ": no convergence, relative residual " + std::to_string(r)),
          residual(r) {}
};

// diagonally preconditioned conjugate gradients
inline std::vector<double> sparse_solve(const SparseMatrix& A, const std::vector<double>& rhs,
                                        double tol) {
    const int N = A.n;
    if (static_cast<int>(rhs.size()) != N)
        throw std::invalid_argument("sparse_solve: rhs size mismatch");
    std::vector<double> diag(static_cast<std::size_t>(N), 1.0);
    for (int r = 0; r < N; ++r) {
        const double d = A.at(r, r);
        if (d != 0.0) diag[static_cast<std::size_t>(r)] = d;
    }
    std::vector<double> x(static_cast<std::size_t>(N), 0.0);
    double bnorm = 0.0;
    for (double v : rhs) bnorm += v * v;
    bnorm = std::sqrt(bnorm);
    if (bnorm == 0.0) return x;

    std::vector<double> r = rhs, z(static_cast<std::size_t>(N)), p, Ap;
    for (int i = 0; i < N; ++i)
        z[static_cast<std::size_t>(i)] =
            r[static_cast<std::size_t>(i)] / diag[static_cast<std::size_t>(i)];
    p = z;
    double rz = 0.0;
    for (int i = 0; i < N; ++i)
        rz += r[static_cast<std::size_t>(i)] * z[static_cast<std::size_t>(i)];

    const int cap = 25 * N + 100;
    double resid = 1.0;
    for (int it = 0; it < cap; ++it) {
        A.multiply(p, Ap);
        double pAp = 0.0;
        for (int i = 0; i < N; ++i)
            pAp += p[static_cast<std::size_t>(i)] * Ap[static_cast<std::size_t>(i)];
        if (!(pAp > 0.0)) break;
        const double alpha = rz / pAp;
        double rnorm = 0.0;
        for (int i = 0; i < N; ++i) {
            x[static_cast<std::size_t>(i)] += alpha * p[static_cast<std::size_t>(i)];
            r[static_cast<std::size_t>(i)] -= alpha * Ap[static_cast<std::size_t>(i)];
            rnorm += r[static_cast<std::size_t>(i)] * r[static_cast<std::size_t>(i)];
        }
        resid = std::sqrt(rnorm) / bnorm;
        if (resid <= tol) {
            A.multiply(x, Ap);
            double tn = 0.0;
            for (int i = 0; i < N; ++i) {
                r[static_cast<std::size_t>(i)] =
                    rhs[static_cast<std::size_t>(i)] - Ap[static_cast<std::size_t>(i)];
                tn += r[static_cast<std::size_t>(i)] * r[static_cast<std::size_t>(i)];
            }
            resid = std::sqrt(tn) / bnorm;
            if (resid <= 2.0 * tol) return x;
        }
        double rznew = 0.0;
        for (int i = 0; i < N; ++i) {
            z[static_cast<std::size_t>(i)] =
                r[static_cast<std::size_t>(i)] / diag[static_cast<std::size_t>(i)];
            rznew += r[static_cast<std::size_t>(i)] * z[static_cast<std::size_t>(i)];
        }
        const double beta = rznew / rz;
        rz = rznew;
        for (int i = 0; i < N; ++i)
            p[static_cast<std::size_t>(i)] =
                z[static_cast<std::size_t>(i)] + beta * p[static_cast<std::size_t>(i)];
    }
    throw SolverFailure(resid);
}

inline std::vector<double> load_vector(const FeSpace& sp,
                                       const std::function<double(double, double)>& f) {
    const auto& ref = detail::ref_element(sp.n);
    std::vector<double> out(static_cast<std::size_t>(sp.ndof), 0.0);
    for (std::size_t e = 0; e < sp.mesh.triangles.size(); ++e) {
        const auto geo = detail::element_geometry(sp.mesh, e);
        const auto& tri = sp.mesh.triangles[e];
        const auto& p0 = sp.mesh.vertices[static_cast<std::size_t>(tri[0])];
        const auto& p1 = sp.mesh.vertices[static_cast<std::size_t>(tri[1])];
        const auto& p2 = sp.mesh.vertices[static_cast<std::size_t>(tri[2])];
        for (int q = 0; q < ref.nq; ++q) {
            const double xh = ref.qp[static_cast<std::size_t>(q)][0];
            const double yh = ref.qp[static_cast<std::size_t>(q)][1];
            const double x = p0[0] + (p1[0] - p0[0]) * xh + (p2[0] - p0[0]) * yh;
            const double y = p0[1] + (p1[1] - p0[1]) * xh + (p2[1] - p0[1]) * yh;
            const double w = ref.qw[static_cast<std::size_t>(q)] * geo.det * f(x, y);
            for (int l = 0; l < ref.nloc; ++l)
                out[static_cast<std::size_t>(sp.elem_dofs[e][static_cast<std::size_t>(l)])] +=
                    w * ref.val[static_cast<std::size_t>(q)][static_cast<std::size_t>(l)];
        }
    }
    return out;
}

inline std::vector<double> gradient_load(
    const FeSpace& sp, const std::function<std::array<double, 2>(double, double)>& grad_v) {
    const auto& ref = detail::ref_element(sp.n);
    std::vector<double> out(static_cast<std::size_t>(sp.ndof), 0.0);
    for (std::size_t e = 0; e < sp.mesh.triangles.size(); ++e) {
        const auto geo = detail::element_geometry(sp.mesh, e);
        const auto& tri = sp.mesh.triangles[e];
        const auto& p0 = sp.mesh.vertices[static_cast<std::size_t>(tri[0])];
        const auto& p1 = sp.mesh.vertices[static_cast<std::size_t>(tri[1])];
        const auto& p2 = sp.mesh.vertices[static_cast<std::size_t>(tri[2])];
        for (int q = 0; q < ref.nq; ++q) {
            const double xh = ref.qp[static_cast<std::size_t>(q)][0];
            const double yh = ref.qp[static_cast<std::size_t>(q)][1];
            const double x = p0[0] + (p1[0] - p0[0]) * xh + (p2[0] - p0[0]) * yh;
            const double y = p0[1] + (p1[1] - p0[1]) * xh + (p2[1] - p0[1]) * yh;
            const auto gv = grad_v(x, y);
            const double w = ref.qw[static_cast<std::size_t>(q)] * geo.det;
            const auto& gq = ref.grd[static_cast<std::size_t>(q)];
            for (int l = 0; l < ref.nloc; ++l) {
                const double gx = geo.it[0][0] * gq[static_cast<std::size_t>(l)][0] +
                                  geo.it[0][1] * gq[static_cast<std::size_t>(l)][1];
                const double gy = geo.it[1][0] * gq[static_cast<std::size_t>(l)][0] +
                                  geo.it[1][1] * gq[static_cast<std::size_t>(l)][1];
                out[static_cast<std::size_t>(sp.elem_dofs[e][static_cast<std::size_t>(l)])] +=
                    w * (gv[0] * gx + gv[1] * gy);
            }
        }
    }
    return out;
}

inline std::vector<double> ritz_projection(
    const FeSpace& sp, const std::function<std::array<double, 2>(double, double)>& grad_v) {
    auto ops = assemble_operators(sp);
    std::vector<double> rhs = gradient_load(sp, grad_v);
    apply_dirichlet(ops.stiffness, sp.dirichlet_mask);
    for (int i = 0; i < sp.ndof; ++i)
        if (sp.dirichlet_mask[static_cast<std::size_t>(i)]) rhs[static_cast<std::size_t>(i)] = 0.0;
    return sparse_solve(ops.stiffness, rhs, 1e-12);
}

inline std::vector<double> l2_projection(const FeSpace& sp,
                                         const std::function<double(double, double)>& v) {
    auto ops = assemble_operators(sp);
    const std::vector<double> rhs = load_vector(sp, v);
    return sparse_solve(ops.mass, rhs, 1e-12);
}

inline std::vector<double> nodal_interpolant(const FeSpace& sp,
                                             const std::function<double(double, double)>& v) {
    std::vector<double> out(static_cast<std::size_t>(sp.ndof));
    for (int i = 0; i < sp.ndof; ++i)
        out[static_cast<std::size_t>(i)] =
            v(sp.dof_coords[static_cast<std::size_t>(i)][0],
              sp.dof_coords[static_cast<std::size_t>(i)][1]);
    return out;
}

enum class SpatialNorm { L2, H1semi };

inline double spatial_error(const FeSpace& sp, const std::vector<double>& coeffs,
                            const std::function<double(double, double)>& exact,
                            const std::function<std::array<double, 2>(double, double)>& exact_grad,
                            SpatialNorm norm) {
    if (static_cast<int>(coeffs.size()) != sp.ndof)
        throw std::invalid_argument("spatial_error: coefficient size mismatch");
    const auto& ref = detail::ref_element(sp.n);
    double acc = 0.0;
    for (std::size_t e = 0; e < sp.mesh.triangles.size(); ++e) {
        const auto geo = detail::element_geometry(sp.mesh, e);
        const auto& tri = sp.mesh.triangles[e];
        const auto& p0 = sp.mesh.vertices[static_cast<std::size_t>(tri[0])];
        const auto& p1 = sp.mesh.vertices[static_cast<std::size_t>(tri[1])];
        const auto& p2 = sp.mesh.vertices[static_cast<std::size_t>(tri[2])];
        for (int q = 0; q < ref.nq; ++q) {
            const double xh = ref.qp[static_cast<std::size_t>(q)][0];
            const double yh = ref.qp[static_cast<std::size_t>(q)][1];
            const double x = p0[0] + (p1[0] - p0[0]) * xh + (p2[0] - p0[0]) * yh;
            const double y = p0[1] + (p1[1] - p0[1]) * xh + (p2[1] - p0[1]) * yh;
            const double w = ref.qw[static_cast<std::size_t>(q)] * geo.det;
            if (norm == SpatialNorm::L2) {
                double uh = 0.0;
                for (int l = 0; l < ref.nloc; ++l)
                    uh += coeffs[static_cast<std::size_t>(
                              sp.elem_dofs[e][static_cast<std::size_t>(l)])] *
                          ref.val[static_cast<std::size_t>(q)][static_cast<std::size_t>(l)];
                const double d = uh - exact(x, y);
                acc += w * d * d;
            } else {
                double ghx = 0.0, ghy = 0.0;
                const auto& gq = ref.grd[static_cast<std::size_t>(q)];
                for (int l = 0; l < ref.nloc; ++l) {
                    const double cl = coeffs[static_cast<std::size_t>(
                        sp.elem_dofs[e][static_cast<std::size_t>(l)])];
                    ghx += cl * gq[static_cast<std::size_t>(l)][0];
                    ghy += cl * gq[static_cast<std::size_t>(l)][1];
                }
                const double gx = geo.it[0][0] * ghx + geo.it[0][1] * ghy;
                const double gy = geo.it[1][0] * ghx + geo.it[1][1] * ghy;
                const auto ge = exact_grad(x, y);
                const double dx = gx - ge[0], dy = gy - ge[1];
                acc += w * (dx * dx + dy * dy);
            }
        }
    }
    return std::sqrt(acc);
}

}  // namespace fracwave
