#include <cmath>
#include <limits>
#include <random>

#include "cpgeo/errors.hpp"
#include "cpgeo/fmm_solver.hpp"
#include "doctest.h"

using namespace cpgeo;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kH = kTwoPi / 72;

Stencil make(std::initializer_list<double> weights) {
    Stencil s;
    int i = 1;
    for (double w : weights) s.entries.push_back({w, {i++, 0, 0}});
    return s;
}

SolverOptions quiet() {
    SolverOptions o;
    o.check_residual = false;
    return o;
}

// max relative error along the seed orientation, t in [20 h, tmax]
double ray_error(int n, double h, double beta, double tmax) {
    LiftedGrid g(n, n, 72, h);
    ScalarField psi(g, 1.0);
    const int c = n / 2;
    const auto r = solve(g, psi, beta, {{{c, c, 0}, 0.0}}, std::nullopt, quiet());
    double e = 0.0;
    for (int i = c + 1; i < n; ++i) {
        const double t = (i - c) * h;
        if (t < 20 * kH - 1e-9 || t > tmax + 1e-9) continue;
        e = std::max(e, std::abs(r.distance({i, c, 0}) - t) / t);
    }
    return e;
}

}  // namespace

TEST_CASE("local_update examples") {
    SUBCASE("single entry") {
        CHECK(local_update(make({4.0}), {1.5}, 0.5) == doctest::Approx(1.5 + std::sqrt(0.5 / 4.0)));
    }
    SUBCASE("two equal entries") {
        CHECK(local_update(make({3.0, 3.0}), {2.0, 2.0}, 0.5) ==
              doctest::Approx(2.0 + std::sqrt(0.5 / 6.0)));
    }
    SUBCASE("zero right-hand side gives the smallest neighbor") {
        CHECK(local_update(make({1.0, 2.0, 5.0}), {3.0, 0.7, 1.2}, 0.0) == 0.7);
    }
    SUBCASE("far neighbors stay inactive") {
        CHECK(local_update(make({1.0, 1.0}), {0.0, 10.0}, 1.0) == doctest::Approx(1.0));
    }
    SUBCASE("second neighbor joins once u passes it") {
        // u = 2 would exceed 0.5, so both are active: (u)^2 + (u - 0.5)^2 = 4
        const double u = local_update(make({1.0, 1.0}), {0.0, 0.5}, 4.0);
        CHECK(u * u + (u - 0.5) * (u - 0.5) == doctest::Approx(4.0));
        CHECK(u > 0.5);
    }
    SUBCASE("infinite neighbors are skipped") {
        CHECK(local_update(make({1.0, 1.0}), {kInf, 1.0}, 1.0) == doctest::Approx(2.0));
    }
    SUBCASE("no finite neighbor") {
        CHECK_THROWS_AS(local_update(make({1.0}), {kInf}, 1.0), SolverError);
    }
}

TEST_CASE("seed keeps its value and the front is monotone") {
    LiftedGrid g(31, 27, 36, 0.5);
    ScalarField psi(g, 1.0);
    const GridIndex s{12, 9, 5};
    const auto r = solve(g, psi, 2.0, {{s, 0.0}});
    CHECK(r.distance(s) == 0.0);
    CHECK(r.report.counters.monotonicity_violations == 0);
    CHECK(r.report.max_residual <= 1e-8);
    CHECK(r.report.accepted_count <= g.size());
    CHECK_FALSE(r.report.reached_target.has_value());
    for (double v : r.distance.values()) CHECK(v >= 0.0);
}

TEST_CASE("residual of the discrete equation with a varying prior") {
    LiftedGrid g(25, 25, 36, 0.3);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(0.2, 2.0), W(-1.0, 1.0);
    ScalarField psi(g), omega(g);
    for (std::size_t k = 0; k < g.size(); ++k) {
        psi[k] = U(rng);
        omega[k] = W(rng);
    }
    const SeedSet seeds{{{12, 12, 0}, 0.0}, {{3, 20, 10}, 0.25}};
    const auto r = solve(g, psi, omega, 3.0, seeds);
    CHECK(r.report.counters.monotonicity_violations == 0);
    CHECK(r.report.max_residual <= 1e-8);
    CHECK(discrete_residual(r.distance, psi, omega, 3.0, seeds) == doctest::Approx(r.report.max_residual));
    CHECK(r.distance({3, 20, 10}) == 0.25);
}

TEST_CASE("comparison principle") {
    LiftedGrid g(21, 21, 36, 0.4);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0.5, 1.5), D(0.0, 0.5);
    ScalarField psi(g), psi2(g), omega(g, 0.3);
    for (std::size_t k = 0; k < g.size(); ++k) {
        psi[k] = U(rng);
        psi2[k] = psi[k] + D(rng);
    }
    const SeedSet seeds{{{10, 10, 9}, 0.0}};
    const auto a = solve(g, psi, omega, 1.5, seeds);
    const auto b = solve(g, psi2, omega, 1.5, seeds);
    for (std::size_t k = 0; k < g.size(); ++k) {
        CHECK(b.distance[k] >= a.distance[k] * (1 - 1e-12));
    }
}

TEST_CASE("early stop at a target") {
    LiftedGrid g(41, 41, 36, 0.25);
    ScalarField psi(g, 1.0);
    const GridIndex t{30, 20, 0};
    const auto full = solve(g, psi, 2.0, {{{10, 20, 0}, 0.0}}, std::nullopt, quiet());
    const auto r = solve(g, psi, 2.0, {{{10, 20, 0}, 0.0}}, std::vector<GridIndex>{t}, quiet());
    REQUIRE(r.report.reached_target.has_value());
    CHECK(*r.report.reached_target == t);
    CHECK(*r.report.target_value == r.distance(t));
    CHECK(r.distance(t) == full.distance(t));
    CHECK(r.report.accepted_count < full.report.accepted_count);
    std::size_t inf = 0;
    for (double v : r.distance.values()) {
        if (std::isinf(v)) ++inf;
        else CHECK(v <= r.distance(t));
    }
    CHECK(inf == g.size() - r.report.accepted_count);
}

TEST_CASE("identical runs give identical fields") {
    LiftedGrid g(21, 21, 36, 0.5);
    ScalarField psi(g, 1.0), omega(g, -0.4);
    const SeedSet seeds{{{5, 5, 0}, 0.0}, {{15, 15, 18}, 0.0}};
    const auto a = solve(g, psi, omega, 1.0, seeds);
    const auto b = solve(g, psi, omega, 1.0, seeds);
    CHECK(a.distance.values() == b.distance.values());
    CHECK(a.report.counters.heap_comparisons == b.report.counters.heap_comparisons);
}

TEST_CASE("invalid input") {
    LiftedGrid g(10, 10, 12, 1.0);
    ScalarField psi(g, 1.0);
    ScalarField bad = psi;
    bad[17] = 0.0;
    CHECK_THROWS_AS(solve(g, bad, 1.0, {{{1, 1, 0}, 0.0}}), ValidationError);
    CHECK_THROWS_AS(solve(g, psi, 1.0, {{{10, 1, 0}, 0.0}}), ValidationError);
    CHECK_THROWS_AS(solve(g, psi, 1.0, {}), ValidationError);
    CHECK_THROWS_AS(solve(g, psi, 1.0, {{{1, 1, 0}, -1.0}}), ValidationError);
    CHECK_THROWS_AS(solve(g, psi, 0.0, {{{1, 1, 0}, 0.0}}), ValidationError);
    CHECK_THROWS_AS(solve(g, ScalarField(LiftedGrid(10, 10, 12, 0.5), 1.0), 1.0, {{{1, 1, 0}, 0.0}}),
                    ValidationError);
}

TEST_CASE("straight line along the seed orientation and refinement") {
    const double e1 = ray_error(81, kH, 20.0, 40 * kH);
    const double e2 = ray_error(161, kH / 2, 20.0, 40 * kH);
    CHECK(e1 <= 0.05);
    CHECK(e2 < e1);
    CHECK(std::log2(e1 / e2) >= 0.8);
}

TEST_CASE("operation counts stay within L K N log N") {
    const SolverOptions o = quiet();
    for (int n : {21, 41, 61}) {
        LiftedGrid g(n, n, 36, 0.3);
        ScalarField psi(g, 1.0), omega(g, 0.2);
        const auto r = solve(g, psi, omega, 2.0, {{{n / 2, n / 2, 0}, 0.0}}, std::nullopt, o);
        const double N = static_cast<double>(g.size());
        CHECK(r.report.counters.heap_pops <= g.size());
        CHECK(static_cast<double>(r.report.counters.heap_comparisons) <= 2.0 * o.L * 6 * N * std::log2(N));
        CHECK(static_cast<double>(r.report.counters.local_updates) <= o.L * 6 * N);
    }
}

TEST_CASE("bidirectional seeding") {
    SUBCASE("coincident endpoints stop at once") {
        LiftedGrid g(20, 20, 36, 1.0);
        ScalarField psi(g, 1.0), omega(g, 0.0);
        const LiftedPoint p(7, 8, 0.5);
        const auto r = solve_bidirectional(g, psi, omega, 2.0, p, p);
        CHECK(r.report.accepted_count == 1);
        CHECK(*r.report.target_value == 0.0);
        CHECK(r.seeds.size() == 2);
    }
    SUBCASE("corridor picks the aligned orientation and the choice survives reversal") {
        LiftedGrid g(61, 21, 36, 1.0);
        ScalarField psi(g, 50.0), omega(g, 0.0);
        for (int iy = 8; iy <= 12; ++iy) {
            for (int ix = 0; ix < 61; ++ix) {
                for (int it = 0; it < 36; ++it) psi({ix, iy, it}) = 1.0;
            }
        }
        const auto r = solve_bidirectional(g, psi, omega, 3.0, {10, 10, 0.0}, {50, 10, 0.0});
        CHECK(r.target.itheta == 0);
        CHECK(r.target.ix == 50);
        const auto m = solve_bidirectional(g, psi, omega, 3.0, {10, 10, kPi}, {50, 10, kPi});
        CHECK(m.target == r.target);
        CHECK(m.distance.values() == r.distance.values());
    }
    SUBCASE("oblique endpoints") {
        LiftedGrid g(41, 41, 36, 1.0);
        ScalarField psi(g, 1.0), omega(g, 0.0);
        const auto r = solve_bidirectional(g, psi, omega, 2.0, {10, 10, 0.8}, {30, 25, 2.0});
        const auto m = solve_bidirectional(g, psi, omega, 2.0, {10, 10, 0.8 + kPi}, {30, 25, 2.0 + kPi});
        CHECK(m.target == r.target);
        CHECK(*m.report.target_value == *r.report.target_value);
    }
}
