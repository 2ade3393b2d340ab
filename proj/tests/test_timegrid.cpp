#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <fracwave/timegrid.hpp>

using fracwave::grid_from_breakpoints;
using fracwave::make_grid;
using fracwave::sigma_star;

TEST_CASE("uniform grid breakpoints", "[timegrid]") {
    const auto g = make_grid(4, 1.0, 1.0);
    REQUIRE(g.t.size() == 5);
    const double expect[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
    for (int j = 0; j <= 4; ++j) CHECK(g.t[j] == Catch::Approx(expect[j]).margin(1e-15));
    for (int j = 0; j < 4; ++j) CHECK(g.tau[j] == Catch::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("quadratic grading examples", "[timegrid]") {
    const auto g2 = make_grid(2, 2.0, 1.0);
    CHECK(g2.t[1] == Catch::Approx(0.25).epsilon(1e-14));
    CHECK(g2.t[2] == 1.0);

    const auto g3 = make_grid(3, 2.0, 2.0);
    CHECK(g3.t[1] == Catch::Approx(2.0 / 9.0).epsilon(1e-14));
    CHECK(g3.t[2] == Catch::Approx(8.0 / 9.0).epsilon(1e-14));
    CHECK(g3.t[3] == 2.0);
}

TEST_CASE("grid invariants across parameters", "[timegrid]") {
    for (double sigma : {1.0, 1.5, 2.0, 3.4}) {
        for (int J : {1, 2, 7, 64, 257}) {
            const auto g = make_grid(J, sigma, 2.5);
            CHECK(g.t.front() == 0.0);
            CHECK(g.t.back() == 2.5);
            double sum = 0.0;
            for (int j = 1; j <= J; ++j) {
                CHECK(g.t[j] > g.t[j - 1]);
                const double ref = 2.5 * std::pow(static_cast<double>(j) / J, sigma);
                CHECK(g.t[j] == Catch::Approx(ref).epsilon(1e-14));
                sum += g.tau[j - 1];
            }
            CHECK(sum == Catch::Approx(2.5).epsilon(1e-13));
        }
    }
}

TEST_CASE("slab lengths grow monotonically when sigma > 1", "[timegrid]") {
    const auto g = make_grid(48, 2.3, 1.0);
    for (int j = 1; j < 48; ++j) CHECK(g.tau[j] > g.tau[j - 1]);
}

TEST_CASE("refinement nests breakpoint values", "[timegrid]") {
    const auto coarse = make_grid(12, 1.7, 1.0);
    const auto fine = make_grid(24, 1.7, 1.0);
    for (int j = 0; j <= 12; ++j)
        CHECK(coarse.t[j] == Catch::Approx(fine.t[2 * j]).margin(1e-16));
}

TEST_CASE("critical exponent values", "[timegrid]") {
    CHECK(sigma_star(2, 1.6, 1.4) == Catch::Approx(2.0).epsilon(1e-14));
    CHECK(sigma_star(2, 1.65, 1.6) == Catch::Approx(2.0).epsilon(1e-14));
    for (int m : {1, 2, 3})
        for (double gamma : {1.1, 1.5, 1.9})
            CHECK(sigma_star(m, m + 0.5, gamma) == Catch::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("grid and exponent argument validation", "[timegrid]") {
    CHECK_THROWS_AS(make_grid(0, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(4, 0.99, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(4, 1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(sigma_star(2, 0.7, 1.4), std::invalid_argument);
    CHECK_THROWS_AS(sigma_star(2, 1.6, 2.0), std::invalid_argument);
}

TEST_CASE("explicit breakpoint construction", "[timegrid]") {
    auto g = grid_from_breakpoints({0.0, 0.1, 0.4, 1.0});
    CHECK(g.J == 3);
    CHECK(g.T == 1.0);
    CHECK(g.tau[1] == Catch::Approx(0.3).epsilon(1e-14));
    CHECK_THROWS_AS(grid_from_breakpoints({0.0, 0.5, 0.5, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(grid_from_breakpoints({0.1, 0.5}), std::invalid_argument);
}
