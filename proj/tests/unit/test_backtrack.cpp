#include <cmath>

#include "cpgeo/backtrack.hpp"
#include "cpgeo/errors.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace cpgeo;

namespace {

std::vector<LiftedPoint> circle(double R, int n, double sweep, int sign = 1) {
    std::vector<LiftedPoint> out;
    for (int i = 0; i < n; ++i) {
        const double a = sweep * i / (n - 1);
        out.emplace_back(R * std::sin(a), sign * R * (1 - std::cos(a)), sign * a);
    }
    return out;
}

}  // namespace

TEST_CASE("curvature of a sampled circle") {
    for (double R : {3.0, 10.0, 40.0}) {
        const auto k = estimate_curvature(circle(R, 150, 2.0));
        for (double v : k) CHECK(v == doctest::Approx(1 / R).epsilon(0.02));
    }
}

TEST_CASE("curvature of a straight line is zero") {
    std::vector<LiftedPoint> s;
    for (int i = 0; i < 50; ++i) s.emplace_back(0.7 * i, 0.3 * i, std::atan2(0.3, 0.7));
    for (double v : estimate_curvature(s, 3)) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("mirrored path negates curvature") {
    const auto a = estimate_curvature(circle(5.0, 80, 3.0, 1));
    const auto b = estimate_curvature(circle(5.0, 80, 3.0, -1));
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(-a[i]));
}

TEST_CASE("curvature across the angular seam and repeated samples") {
    auto s = circle(4.0, 120, 4.0);
    for (auto& p : s) p = LiftedPoint(p.x, p.y, p.theta - 2.0);  // crosses 0
    s.insert(s.begin() + 60, s[60]);
    s.insert(s.begin() + 60, s[60]);
    const auto k = estimate_curvature(s);
    for (double v : k) {
        CHECK(std::isfinite(v));
        CHECK(v == doctest::Approx(0.25).epsilon(0.02));
    }
    CHECK_THROWS_AS(estimate_curvature({s[0], s[1]}), ValidationError);
    CHECK_THROWS_AS(estimate_curvature(s, 0), ValidationError);
}

TEST_CASE("backtracking a straight segment") {
    const double h = kTwoPi / 72;
    LiftedGrid g(91, 31, 72, h);
    ScalarField psi(g, 1.0);
    const SeedSet seeds{{{10, 15, 0}, 0.0}};
    const auto r = solve(g, psi, 20.0, seeds);
    const LiftedPoint start = g.point_of({80, 15, 0});
    const auto path = backtrack(r.distance, 20.0, start, seeds);
    REQUIRE(path.size() > 10);
    CHECK(path.samples.back().x == start.x);
    CHECK(path.u.front() == 0.0);
    CHECK(path.u.back() == 1.0);
    CHECK(path.distance == doctest::Approx(r.distance({80, 15, 0})));
    const double y0 = g.y_of(15);
    for (const Point2& p : path.physical()) {
        CHECK(std::abs(p.y - y0) <= 2 * h);
        CHECK(p.x >= g.x_of(10) - 2 * h);
    }
    CHECK(std::abs(path.samples.front().x - g.x_of(10)) <= 2.0 * h);
    for (std::size_t i = 1; i < path.size(); ++i) {
        const double d = std::hypot(path.samples[i].x - path.samples[i - 1].x,
                                    path.samples[i].y - path.samples[i - 1].y);
        CHECK(d <= 0.5 * h + 1e-12);
    }
}

TEST_CASE("backtracking under a constant prior follows the arc") {
    // radius 2, 60 nodes per radius, fine angular axis
    const double w = 0.5, beta = 5.0;
    const int m = 60, mar = 8, n = m + 2 * mar;
    LiftedGrid g(n, n, 288, 2.0 / m);
    ScalarField psi(g, 1.0), omega(g, w);
    const SeedSet seeds{{{mar, mar, 0}, 0.0}};
    const GridIndex t{mar + m, mar + m, 72};
    const SolverOptions o{kDefaultQuadratureOrder, kDefaultRelaxation, false};
    const auto r = solve(g, psi, omega, beta, seeds, std::vector<GridIndex>{t}, o);
    const auto path = backtrack(r.distance, omega, beta, g.point_of(t), seeds);
    double mean = 0.0, dev = 0.0;
    for (double k : path.kappa) {
        mean += k;
        dev += std::abs(k - w);
    }
    mean /= path.size();
    dev /= path.size();
    CHECK(mean == doctest::Approx(w).epsilon(0.1));
    CHECK(dev <= 0.1 * w);
    const double cx = g.x_of(mar), cy = g.y_of(mar) + 2.0;
    for (const Point2& p : path.physical()) CHECK(std::abs(std::hypot(p.x - cx, p.y - cy) - 2.0) < 0.1);
}

TEST_CASE("backtracking from a seed") {
    LiftedGrid g(15, 15, 36, 1.0);
    ScalarField psi(g, 1.0);
    const SeedSet seeds{{{7, 7, 3}, 0.0}};
    const auto r = solve(g, psi, 1.0, seeds);
    const auto path = backtrack(r.distance, 1.0, g.point_of({7, 7, 3}), seeds);
    CHECK(path.size() == 1);
    CHECK(path.distance == 0.0);
    CHECK(path.kappa.size() == 1);
}

TEST_CASE("backtracking rejects bad starts") {
    LiftedGrid g(15, 15, 36, 1.0);
    ScalarField psi(g, 1.0);
    const SeedSet seeds{{{7, 7, 0}, 0.0}};
    const auto r = solve(g, psi, 1.0, seeds, std::vector<GridIndex>{{9, 7, 0}});
    CHECK_THROWS_AS(backtrack(r.distance, 1.0, {30.0, 2.0, 0.0}, seeds), ValidationError);
    CHECK_THROWS_AS(backtrack(r.distance, 1.0, g.point_of({1, 14, 20}), seeds), ValidationError);
    BacktrackOptions o;
    o.step = -1.0;
    CHECK_THROWS_AS(backtrack(r.distance, 1.0, g.point_of({9, 7, 0}), seeds, o), ValidationError);
}

TEST_CASE("path document") {
    LiftedGrid g(31, 11, 36, 1.0);
    ScalarField psi(g, 1.0);
    const SeedSet seeds{{{3, 5, 0}, 0.0}};
    const auto r = solve(g, psi, 2.0, seeds);
    const LiftedPoint start = g.point_of({25, 5, 0});
    const auto path = backtrack(r.distance, 2.0, start, seeds);
    const auto doc = nlohmann::json::parse(path_to_json(path, g, 2.0, g.point_of({3, 5, 0}), start));
    CHECK(doc["grid"]["nx"] == 31);
    CHECK(doc["grid"]["n_theta"] == 36);
    CHECK(doc["beta"] == 2.0);
    CHECK(doc["samples"].size() == path.size());
    CHECK(doc["samples"][0]["u"] == 0.0);
    CHECK(doc["samples"].back()["x"] == start.x);
    CHECK(doc["distance"].get<double>() == doctest::Approx(path.distance));
    CHECK(doc["target"]["x"] == start.x);
    CHECK(doc["source"]["x"] == 3.0);
    CHECK_FALSE(nlohmann::json::parse(path_to_json(path, g, 2.0)).contains("source"));
}
