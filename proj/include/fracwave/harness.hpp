#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "fracwave/problems.hpp"
#include "fracwave/quadrature.hpp"
#include "fracwave/spacefem.hpp"
#include "fracwave/stepper.hpp"
#include "fracwave/temporal_basis.hpp"
#include "fracwave/timegrid.hpp"

namespace fracwave {

struct RunConfig {
    double gamma = 1.5;
    double r = 2.0;
    int m = 1;
    int n = 1;
    int J = 16;
    double sigma = 1.0;
    int cells = 8;
    double T = 1.0;
    double tol = 1e-10;
    std::string out;
};

struct ErrorReport {
    double E1 = 0.0;
    double E2 = 0.0;
    double order1 = std::numeric_limits<double>::quiet_NaN();
    double order2 = std::numeric_limits<double>::quiet_NaN();
    double seconds = 0.0;
};

namespace detail {

inline void check_trajectory_shape(const Trajectory& traj) {
    if (traj.grid.J < 1 || traj.grid.t.empty())
        throw std::invalid_argument("compute_errors: trajectory grid is empty");
    if (traj.space.ndof <= 0)
        throw std::invalid_argument("compute_errors: trajectory space is empty");
    if (static_cast<int>(traj.coeff.size()) != traj.grid.J)
        throw std::invalid_argument("compute_errors: trajectory is incomplete");
    if (traj.m < 1 || traj.m > 3)
        throw std::invalid_argument("compute_errors: unsupported trial degree");
}

// Accumulates int_{I_j} |U' - p'(t) w|^2_{L2} dt and the breakpoint H1 gaps
// against a separable reference p(t) * w, with w given by coefficients. The
// temporal factors are supplied as callables so both the manufactured field
// and discrete reproductions share one loop.
struct SeparableReference {
    std::function<double(double)> value;       // p(t)
    std::function<double(double)> slope;       // p'(t)
    std::vector<double> field;                 // coefficients of w
    double field_mass = 0.0;                   // <w, w>_{L2}, exact if known
    std::vector<double> field_pair;            // <w, N_i> load pairings
};

inline double slab_error_sq(const Trajectory& traj, const SparseMatrix& mass,
                            const SeparableReference& ref, int j, double jacobi_exponent) {
    const int m = traj.m;
    const double tau = traj.grid.tau[static_cast<std::size_t>(j) - 1];
    const double a = traj.grid.t[static_cast<std::size_t>(j) - 1];
    const auto& modes = traj.coeff[static_cast<std::size_t>(j) - 1];

    std::vector<std::vector<double>> mc(static_cast<std::size_t>(m));
    for (int b = 0; b < m; ++b)
        mass.multiply(modes[static_cast<std::size_t>(b)], mc[static_cast<std::size_t>(b)]);
    std::vector<double> mode_mass(static_cast<std::size_t>(m) * m, 0.0);
    std::vector<double> mode_pair(static_cast<std::size_t>(m), 0.0);
    for (int b = 0; b < m; ++b) {
        for (int c = 0; c < m; ++c) {
            double dot = 0.0;
            for (std::size_t i = 0; i < mc[static_cast<std::size_t>(c)].size(); ++i)
                dot += modes[static_cast<std::size_t>(b)][i] * mc[static_cast<std::size_t>(c)][i];
            mode_mass[static_cast<std::size_t>(b * m + c)] = dot;
        }
        double dot = 0.0;
        for (std::size_t i = 0; i < ref.field_pair.size(); ++i)
            dot += modes[static_cast<std::size_t>(b)][i] * ref.field_pair[i];
        mode_pair[static_cast<std::size_t>(b)] = dot;
    }

    const TestBasis basis(m);
    const bool weighted = j == 1 && jacobi_exponent < 0.0;
    const auto& rule = weighted ? gauss_jacobi(m + 4, jacobi_exponent, 0.0) : gauss_legendre(m + 4);
    double acc = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
        double t, wt;
        if (weighted) {
            const double theta = 0.5 * (1.0 - rule.nodes[q]);
            t = theta * tau;
            wt = rule.weights[q] * std::pow(0.5 * tau, jacobi_exponent + 1.0) *
                 std::pow(t, -jacobi_exponent);
        } else {
            const double theta = 0.5 * (rule.nodes[q] + 1.0);
            t = a + theta * tau;
            wt = 0.5 * tau * rule.weights[q];
        }
        const double theta = (t - a) / tau;
        double db[3] = {0.0, 0.0, 0.0};
        for (int b = 0; b < m; ++b) db[b] = basis.eval(b, theta) / tau;

        double discrete_sq = 0.0, cross = 0.0;
        for (int b = 0; b < m; ++b) {
            cross += db[b] * mode_pair[static_cast<std::size_t>(b)];
            for (int c = 0; c < m; ++c)
                discrete_sq += db[b] * db[c] * mode_mass[static_cast<std::size_t>(b * m + c)];
        }
        const double s = ref.slope(t);
        acc += wt * (s * s * ref.field_mass - 2.0 * s * cross + discrete_sq);
    }
    return acc;
}

}  // namespace detail

// Error functionals against the closed-form field of a manufactured problem:
// E1 is the space-time L2 norm of the slope gap, E2 the largest breakpoint
// H1-seminorm gap.
inline ErrorReport compute_errors(const Trajectory& traj, const ManufacturedProblem& prob) {
    detail::check_trajectory_shape(traj);
    if (traj.grid.T != prob.T)
        throw std::invalid_argument("compute_errors: trajectory and problem final times differ");

    const Operators ops = assemble_operators(traj.space);
    detail::SeparableReference ref;
    const double r = prob.r;
    ref.value = [r](double t) { return std::pow(t, r); };
    ref.slope = [r](double t) { return r * std::pow(t, r - 1.0); };
    // per axis: int x^2 (1-x)^2 dx = 1/30
    ref.field_mass = 1.0 / 900.0;
    ref.field_pair = load_vector(
        traj.space, [](double x, double y) { return ManufacturedProblem::phi(x, y); });

    const double jacobi_exponent = std::min(0.0, 2.0 * r - 2.0);
    double e1_sq = 0.0;
    for (int j = 1; j <= traj.grid.J; ++j)
        e1_sq += detail::slab_error_sq(traj, ops.mass, ref, j, jacobi_exponent);

    double e2 = 0.0;
    std::vector<double> state = traj.start;
    if (state.empty()) state.assign(static_cast<std::size_t>(traj.space.ndof), 0.0);
    for (int j = 1; j <= traj.grid.J; ++j) {
        const auto& step = traj.coeff[static_cast<std::size_t>(j) - 1][0];
        for (std::size_t i = 0; i < state.size(); ++i) state[i] += step[i];
        const double tj = traj.grid.t[static_cast<std::size_t>(j)];
        const double scale = std::pow(tj, r);
        const double gap = spatial_error(
            traj.space, state,
            [scale](double x, double y) { return scale * ManufacturedProblem::phi(x, y); },
            [scale](double x, double y) {
                return std::array<double, 2>{scale * (1.0 - 2.0 * x) * y * (1.0 - y),
                                             scale * x * (1.0 - x) * (1.0 - 2.0 * y)};
            },
            SpatialNorm::H1semi);
        e2 = std::max(e2, gap);
    }

    ErrorReport report;
    report.E1 = std::sqrt(std::max(e1_sq, 0.0));
    report.E2 = e2;
    return report;
}

// Same functionals against a discrete separable reference p(t) * w_h, where
// w_h is a coefficient vector on the trajectory's own space. Used by the
// reproduction checks, whose exact fields live in the FE space itself.
inline ErrorReport compute_errors(const Trajectory& traj,
                                  const std::function<double(double)>& p,
                                  const std::function<double(double)>& p_slope,
                                  const std::vector<double>& field) {
    detail::check_trajectory_shape(traj);
    if (static_cast<int>(field.size()) != traj.space.ndof)
        throw std::invalid_argument("compute_errors: reference field size mismatch");

    const Operators ops = assemble_operators(traj.space);
    detail::SeparableReference ref;
    ref.value = p;
    ref.slope = p_slope;
    ref.field = field;
    std::vector<double> mw;
    ops.mass.multiply(field, mw);
    for (std::size_t i = 0; i < field.size(); ++i) ref.field_mass += field[i] * mw[i];
    ref.field_pair = mw;

    double e1_sq = 0.0;
    for (int j = 1; j <= traj.grid.J; ++j)
        e1_sq += detail::slab_error_sq(traj, ops.mass, ref, j, 0.0);

    double e2_sq = 0.0;
    std::vector<double> state = traj.start;
    if (state.empty()) state.assign(static_cast<std::size_t>(traj.space.ndof), 0.0);
    std::vector<double> gap(state.size());
    for (int j = 1; j <= traj.grid.J; ++j) {
        const auto& step = traj.coeff[static_cast<std::size_t>(j) - 1][0];
        for (std::size_t i = 0; i < state.size(); ++i) state[i] += step[i];
        const double scale = p(traj.grid.t[static_cast<std::size_t>(j)]);
        for (std::size_t i = 0; i < state.size(); ++i) gap[i] = state[i] - scale * field[i];
        std::vector<double> ag;
        ops.stiffness.multiply(gap, ag);
        double sq = 0.0;
        for (std::size_t i = 0; i < gap.size(); ++i) sq += gap[i] * ag[i];
        e2_sq = std::max(e2_sq, sq);
    }

    ErrorReport report;
    report.E1 = std::sqrt(std::max(e1_sq, 0.0));
    report.E2 = std::sqrt(std::max(e2_sq, 0.0));
    return report;
}

struct RunResult {
    Trajectory traj;
    ErrorReport report;
};

inline RunResult run_single(const RunConfig& cfg) {
    const auto started = std::chrono::steady_clock::now();
    const auto prob = manufactured_problem(cfg.gamma, cfg.r, cfg.T);

    MarchConfig mc;
    mc.gamma = cfg.gamma;
    mc.m = cfg.m;
    mc.grid = make_grid(cfg.J, cfg.sigma, cfg.T);
    mc.space = build_fe_space(build_unit_square_mesh(cfg.cells), cfg.n);
    mc.load = prob.separated_load(mc.space);
    mc.tol = cfg.tol;

    RunResult out;
    out.traj = march(mc);
    out.report = compute_errors(out.traj, prob);
    out.report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return out;
}

inline double convergence_order(double e_prev, double e_curr, double p_prev, double p_curr) {
    if (!(e_prev > 0.0) || !(e_curr > 0.0) || !(p_prev > 0.0) || !(p_curr > 0.0) ||
        p_prev == p_curr)
        return std::numeric_limits<double>::quiet_NaN();
    return std::log(e_prev / e_curr) / std::log(p_curr / p_prev);
}

enum class SweepAxis { time, space };

struct SweepRow {
    int level = 0;
    int J = 0;
    int inv_h = 0;
    bool failed = false;
    std::string note;
    ErrorReport report;
};

struct SweepTable {
    SweepAxis axis = SweepAxis::time;
    std::vector<SweepRow> rows;
};

inline SweepTable convergence_sweep(const RunConfig& base, const std::vector<int>& levels,
                                    SweepAxis axis) {
    if (levels.size() < 2)
        throw std::invalid_argument("convergence_sweep: needs at least two levels");
    for (int v : levels)
        if (v < 1) throw std::invalid_argument("convergence_sweep: levels must be positive");

    SweepTable table;
    table.axis = axis;
    for (std::size_t idx = 0; idx < levels.size(); ++idx) {
        RunConfig cfg = base;
        if (axis == SweepAxis::time)
            cfg.J = levels[idx];
        else
            cfg.cells = levels[idx];

        SweepRow row;
        row.level = static_cast<int>(idx) + 1;
        row.J = cfg.J;
        row.inv_h = cfg.cells;
        try {
            row.report = run_single(cfg).report;
        } catch (const SolverFailure& err) {
            row.failed = true;
            row.note = err.what();
        }
        table.rows.push_back(std::move(row));
    }

    for (std::size_t idx = 1; idx < table.rows.size(); ++idx) {
        auto& curr = table.rows[idx];
        const auto& prev = table.rows[idx - 1];
        if (curr.failed || prev.failed) continue;
        const double p_prev = static_cast<double>(levels[idx - 1]);
        const double p_curr = static_cast<double>(levels[idx]);
        curr.report.order1 = convergence_order(prev.report.E1, curr.report.E1, p_prev, p_curr);
        curr.report.order2 = convergence_order(prev.report.E2, curr.report.E2, p_prev, p_curr);
    }
    return table;
}

namespace detail {

inline std::string format_sci(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

inline std::string format_fixed(double v, int places) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*f", places, v);
    return buf;
}

}  // namespace detail

// One row per refinement level; the seconds column can be suppressed where
// byte-stable output is needed.
inline std::string csv_table(const SweepTable& table, bool with_seconds = true) {
    std::string out = "level,J,inv_h,E1,order1,E2,order2,seconds\n";
    for (const auto& row : table.rows) {
        out += std::to_string(row.level) + ',' + std::to_string(row.J) + ',' +
               std::to_string(row.inv_h) + ',';
        if (!row.failed) {
            out += detail::format_sci(row.report.E1) + ',';
            if (std::isfinite(row.report.order1)) out += detail::format_fixed(row.report.order1, 4);
            out += ',';
            out += detail::format_sci(row.report.E2) + ',';
            if (std::isfinite(row.report.order2)) out += detail::format_fixed(row.report.order2, 4);
            out += ',';
            if (with_seconds) out += detail::format_fixed(row.report.seconds, 3);
        } else {
            out += ",,,,";
        }
        out += '\n';
    }
    return out;
}

inline void write_csv(const std::string& path, const SweepTable& table,
                      bool with_seconds = true) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("write_csv: cannot open " + path);
    file << csv_table(table, with_seconds);
    if (!file) throw std::runtime_error("write_csv: write failed for " + path);
}

}  // namespace fracwave
