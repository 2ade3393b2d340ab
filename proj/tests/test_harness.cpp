#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <fracwave/harness.hpp>
#include <fracwave/validate.hpp>

#include "oracles.hpp"

using fracwave::apply_dirichlet;
using fracwave::assemble_operators;
using fracwave::build_fe_space;
using fracwave::build_unit_square_mesh;
using fracwave::compute_errors;
using fracwave::convergence_order;
using fracwave::convergence_sweep;
using fracwave::csv_table;
using fracwave::ErrorReport;
using fracwave::make_grid;
using fracwave::ManufacturedProblem;
using fracwave::manufactured_problem;
using fracwave::march;
using fracwave::MarchConfig;
using fracwave::nodal_interpolant;
using fracwave::RunConfig;
using fracwave::run_single;
using fracwave::SweepAxis;
using fracwave::SweepRow;
using fracwave::SweepTable;
using fracwave::TimeProfile;
using fracwave::Trajectory;

namespace {

const double pi = std::acos(-1.0);

Trajectory zero_trajectory(int J, double sigma, int cells, int n, int m) {
    Trajectory traj;
    traj.grid = make_grid(J, sigma, 1.0);
    traj.space = build_fe_space(build_unit_square_mesh(cells), n);
    traj.m = m;
    traj.start.assign(static_cast<std::size_t>(traj.space.ndof), 0.0);
    traj.coeff.assign(static_cast<std::size_t>(J),
                      std::vector<std::vector<double>>(
                          static_cast<std::size_t>(m),
                          std::vector<double>(static_cast<std::size_t>(traj.space.ndof), 0.0)));
    return traj;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        std::vector<std::string> fields;
        std::string field;
        std::istringstream cells(line);
        while (std::getline(cells, field, ',')) fields.push_back(field);
        if (!line.empty() && line.back() == ',') fields.push_back("");
        rows.push_back(std::move(fields));
    }
    return rows;
}

}  // namespace

TEST_CASE("a resting trajectory measures the closed-form field norms", "[harness]") {
    const auto traj = zero_trajectory(4, 2.0, 4, 2, 2);
    const auto prob = manufactured_problem(1.5, 2.0, 1.0);
    const auto rep = compute_errors(traj, prob);
    CHECK(rep.E1 == Catch::Approx(0.03849001794597505).epsilon(1e-12));
    CHECK(rep.E2 == Catch::Approx(0.14907119849998598).epsilon(1e-12));
    CHECK(std::isnan(rep.order1));
    CHECK(std::isnan(rep.order2));
}

TEST_CASE("mismatched discretizations are rejected", "[harness]") {
    auto traj = zero_trajectory(3, 1.0, 3, 1, 1);
    const auto prob = manufactured_problem(1.5, 2.0, 2.0);
    CHECK_THROWS_AS(compute_errors(traj, prob), std::invalid_argument);

    traj.coeff.pop_back();
    CHECK_THROWS_AS(compute_errors(traj, manufactured_problem(1.5, 2.0, 1.0)),
                    std::invalid_argument);

    const auto whole = zero_trajectory(3, 1.0, 3, 1, 1);
    const std::vector<double> short_field(2, 0.0);
    CHECK_THROWS_AS(compute_errors(
                        whole, [](double t) { return t; }, [](double) { return 1.0; },
                        short_field),
                    std::invalid_argument);

    RunConfig base;
    CHECK_THROWS_AS(convergence_sweep(base, {16}, SweepAxis::time), std::invalid_argument);
    CHECK_THROWS_AS(convergence_sweep(base, {16, 0}, SweepAxis::time), std::invalid_argument);
}

TEST_CASE("the rate formula recovers a synthetic order", "[harness]") {
    CHECK(convergence_order(1e-2, 2.5e-3, 16.0, 32.0) == Catch::Approx(2.000).epsilon(1e-12));
    CHECK(std::isnan(convergence_order(0.0, 1e-3, 16.0, 32.0)));
    CHECK(std::isnan(convergence_order(1e-2, 1e-3, 16.0, 16.0)));
}

TEST_CASE("an exactly reproduced field measures at roundoff", "[harness]") {
    const auto space = build_fe_space(build_unit_square_mesh(3), 1);
    const auto field = nodal_interpolant(space, [](double x, double y) {
        return std::sin(pi * x) * std::sin(pi * y);
    });
    auto ops = assemble_operators(space);
    apply_dirichlet(ops.stiffness, space.dirichlet_mask);

    MarchConfig cfg;
    cfg.gamma = 1.5;
    cfg.m = 1;
    cfg.grid = make_grid(3, 1.0, 1.0);
    cfg.space = space;
    cfg.u1 = field;
    std::vector<double> stiff_pair;
    ops.stiffness.multiply(field, stiff_pair);
    cfg.load.profiles.push_back(TimeProfile{1.0, {}});
    cfg.load.spatial.push_back(stiff_pair);
    cfg.tol = 1e-12;

    const auto traj = march(cfg);
    const auto rep = compute_errors(
        traj, [](double t) { return t; }, [](double) { return 1.0; }, field);
    CHECK(rep.E1 <= 1e-8);
    CHECK(rep.E2 <= 1e-8);
}

TEST_CASE("sweeps order rows by level and repeat byte-identically", "[harness]") {
    RunConfig base;
    base.gamma = 1.5;
    base.r = 2.0;
    base.m = 1;
    base.n = 1;
    base.sigma = 1.0;
    base.cells = 5;
    base.tol = 1e-11;

    const std::vector<int> levels = {4, 8};
    const auto first = convergence_sweep(base, levels, SweepAxis::time);
    const auto second = convergence_sweep(base, levels, SweepAxis::time);

    REQUIRE(first.rows.size() == 2);
    CHECK(first.rows[0].level == 1);
    CHECK(first.rows[1].level == 2);
    CHECK(first.rows[0].J == 4);
    CHECK(first.rows[1].J == 8);
    CHECK(first.rows[0].inv_h == 5);
    CHECK(std::isnan(first.rows[0].report.order1));
    CHECK(std::isfinite(first.rows[1].report.order1));
    CHECK(first.rows[1].report.order1 > 0.0);

    REQUIRE(first.rows[0].report.E1 == second.rows[0].report.E1);
    REQUIRE(first.rows[1].report.E1 == second.rows[1].report.E1);
    REQUIRE(first.rows[1].report.E2 == second.rows[1].report.E2);
    REQUIRE(csv_table(first, false) == csv_table(second, false));
}

TEST_CASE("unsolvable levels are marked and kept in the table", "[harness]") {
    RunConfig base;
    base.m = 1;
    base.n = 1;
    base.cells = 4;
    base.tol = 1e-30;

    const auto table = convergence_sweep(base, {4, 8}, SweepAxis::time);
    REQUIRE(table.rows.size() == 2);
    for (const auto& row : table.rows) {
        CHECK(row.failed);
        CHECK(row.note.find("slab") != std::string::npos);
        CHECK(std::isnan(row.report.order1));
    }
    const auto rows = parse_csv(csv_table(table));
    REQUIRE(rows.size() == 3);
    REQUIRE(rows[1].size() == 8);
    CHECK(rows[1][3].empty());
    CHECK(rows[2][5].empty());
}

TEST_CASE("the CSV table freezes its schema and formats", "[harness]") {
    SweepTable table;
    table.axis = SweepAxis::time;
    SweepRow row;
    row.level = 1;
    row.J = 16;
    row.inv_h = 8;
    row.report.E1 = 1e-2;
    row.report.E2 = 3e-2;
    row.report.seconds = 0.25;
    table.rows.push_back(row);
    row.level = 2;
    row.J = 32;
    row.report.E1 = 2.5e-3;
    row.report.E2 = 1.5e-2;
    row.report.order1 = convergence_order(1e-2, 2.5e-3, 16.0, 32.0);
    row.report.order2 = convergence_order(3e-2, 1.5e-2, 16.0, 32.0);
    row.report.seconds = 0.5;
    table.rows.push_back(row);

    const std::string expected =
        "level,J,inv_h,E1,order1,E2,order2,seconds\n"
        "1,16,8,1.000e-02,,3.000e-02,,\n"
        "2,32,8,2.500e-03,2.0000,1.500e-02,1.0000,\n";
    CHECK(csv_table(table, false) == expected);

    const std::string timed = csv_table(table, true);
    CHECK(timed.find("0.250\n") != std::string::npos);
    CHECK(timed.find("0.500\n") != std::string::npos);
}

TEST_CASE("stored rates recompute from the stored errors", "[harness]") {
    RunConfig base;
    base.gamma = 1.4;
    base.r = 2.0;
    base.m = 1;
    base.n = 1;
    base.sigma = 1.0;
    base.cells = 4;

    const auto table = convergence_sweep(base, {4, 8, 16}, SweepAxis::time);
    const auto rows = parse_csv(csv_table(table));
    REQUIRE(rows.size() == 4);
    for (std::size_t i = 2; i < rows.size(); ++i) {
        const double e_prev = std::stod(rows[i - 1][3]);
        const double e_curr = std::stod(rows[i][3]);
        const double j_prev = std::stod(rows[i - 1][1]);
        const double j_curr = std::stod(rows[i][1]);
        const double stored = std::stod(rows[i][4]);
        const double redone = convergence_order(e_prev, e_curr, j_prev, j_curr);
        INFO("row " << i);
        CHECK(std::abs(redone - stored) <= 5e-4);
    }
}

TEST_CASE("the property suite passes end to end", "[harness]") {
    for (const auto& result : fracwave::checks::run_all()) {
        INFO(result.name << ": " << result.detail);
        CHECK(result.pass);
    }
}
