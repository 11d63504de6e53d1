#include <cmath>

#include "cpgeo/errors.hpp"
#include "cpgeo/pipeline.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace cpgeo;

namespace {

std::vector<Point2> hline(double y, double x0, double x1) { return {{x0, y}, {x1, y}}; }

}  // namespace

TEST_CASE("endpoint angle is the argmin over the upper half of the slices") {
    const LiftedGrid g(8, 8, 72, 1.0);
    ScalarField psi(g, 1.0);
    psi(GridIndex{3, 4, 10}) = 0.2;
    CHECK(estimate_endpoint_angle(psi, {3.0, 4.0}) == doctest::Approx(10 * kTwoPi / 72));

    CHECK(estimate_endpoint_angle(ScalarField(g, 1.0), {3.0, 4.0}) == 0.0);

    // a lower minimum on the reversed half is ignored
    psi(GridIndex{3, 4, 50}) = 0.01;
    psi(GridIndex{3, 4, 20}) = 0.1;
    CHECK(estimate_endpoint_angle(psi, {3.0, 4.0}) == doctest::Approx(20 * kTwoPi / 72));
}

TEST_CASE("jaccard of tubes") {
    const auto a = hline(40.5, -10, 110);
    CHECK(jaccard(a, a, 100, 80) == 1.0);
    CHECK(jaccard(hline(10.5, -10, 110), hline(60.5, -10, 110), 100, 80) == 0.0);
    // offset by one radius: strip overlap r over union 3r
    CHECK(jaccard(a, hline(46.5, -10, 110), 100, 80, 6.0) == doctest::Approx(1.0 / 3).epsilon(0.03));
    CHECK_THROWS_AS(jaccard(a, {}, 100, 80), ValidationError);
    CHECK_THROWS_AS(jaccard(a, a, 100, 80, 0.0), ValidationError);
}

TEST_CASE("tube mask and Hausdorff distance") {
    const auto m = tube_mask({{5, 5}}, 11, 11, 2.0);
    int n = 0;
    for (auto v : m) n += v;
    CHECK(n == 13);
    CHECK(hausdorff(hline(0, 0, 10), hline(3, 0, 10)) == doctest::Approx(3.0));
    CHECK(hausdorff(hline(0, 0, 10), hline(0, 0, 12)) == doctest::Approx(2.0));
    CHECK_THROWS_AS(hausdorff({}, hline(0, 0, 1)), ValidationError);
}

TEST_CASE("config round trip and rejection") {
    TrackingConfig c;
    c.beta = 6.0;
    c.alpha = 4.0;
    c.prior_enabled = false;
    c.scales = {1.0, 2.0};
    c.endpoints = {{{{3.0, 4.0}, 0.5}, {{10.0, 12.0}, std::nullopt}}};
    c.bench.families = {"wave"};
    const TrackingConfig d = config_from_json(config_to_json(c));
    CHECK(config_to_json(d) == config_to_json(c));
    CHECK(d.endpoints[0].source.theta.value() == 0.5);
    CHECK_FALSE(d.endpoints[0].target.theta.has_value());

    CHECK(config_from_json(R"({"beta": 2})").beta == 2.0);
    CHECK_THROWS_AS(config_from_json(R"({"betta": 2})"), ValidationError);
    CHECK_THROWS_AS(config_from_json(R"({"bench": {"sead": 1}})"), ValidationError);
    CHECK_THROWS_AS(config_from_json(R"({"beta": "big"})"), ValidationError);
    CHECK_THROWS_AS(config_from_json(R"({"n_theta": 71})"), ValidationError);
    CHECK_THROWS_AS(config_from_json(R"({"eps": 1.5})"), ValidationError);
    CHECK_THROWS_AS(config_from_json(R"({"bench": {"families": ["zigzag"]}})"), ValidationError);
    CHECK_THROWS_AS(config_from_json("{"), ValidationError);
}

TEST_CASE("pixel scale defaults to the angular step") {
    TrackingConfig c;
    CHECK(c.h_x() == doctest::Approx(kTwoPi / 72));
    c.pixel_scale = 0.5;
    CHECK(c.h_x() == 0.5);
}

TEST_CASE("synthetic benchmark is deterministic and linear in variance") {
    const auto v = noise_levels();
    REQUIRE(v.size() == 16);
    CHECK(v.front() == 0.0);
    CHECK(v.back() == doctest::Approx(0.15));
    for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i] - v[i - 1] == doctest::Approx(0.01));

    const auto a = synth_benchmark(7, {0.0, 0.05}, {"uturn", "crossing"});
    const auto b = synth_benchmark(7, {0.0, 0.05}, {"uturn", "crossing"});
    REQUIRE(a.size() == 4);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].image.values() == b[i].image.values());
        CHECK(a[i].segmentation.values() == b[i].segmentation.values());
    }
    CHECK(a[0].image.values() == a[0].clean.values());
    CHECK(a[1].image.values() != a[1].clean.values());
    for (double x : a[0].clean.values()) CHECK((x == 0.0 || x == 0.7));
    CHECK(synth_benchmark(8, {0.05}, {"uturn"})[0].image.values() != a[1].image.values());
    // a subset reproduces the matching case of a larger run
    CHECK(synth_benchmark(7, {0.05}, {"crossing"})[0].image.values() == a[3].image.values());
    CHECK_THROWS_AS(synth_benchmark(7, {0.0}, {"zigzag"}), ValidationError);
}

TEST_CASE("straight path on a constant cost") {
    TrackingConfig c;
    const LiftedGrid g = pipeline_grid(c, 60, 30);
    const ScalarField psi(g, 1.0), omega(g, 0.0);
    const TrackResult r = track(c, psi, omega, {{{8, 15}, 0.0}, {{50, 15}, 0.0}});
    const auto p = r.path.physical();
    REQUIRE(p.size() > 10);
    for (const Point2& q : p) CHECK(std::abs(q.y - 15) <= 1.0);
    CHECK(std::hypot(p.front().x - 8, p.front().y - 15) <= 2.0);
    CHECK(std::hypot(p.back().x - 50, p.back().y - 15) <= 2.0);

    CHECK_THROWS_AS(track(c, psi, omega, {{{-1, 15}, 0.0}, {{50, 15}, 0.0}}), ValidationError);
    CHECK_THROWS_AS(track(c, psi, omega, {{{8, 15}, 0.0}, {{50, 30}, 0.0}}), ValidationError);
}

TEST_CASE("disabling the prior matches an explicit zero prior") {
    const auto cs = synth_benchmark(2026, {0.03}, {"near_touch"});
    const BenchCase& k = cs[0];
    TrackingConfig c;
    c.prior_enabled = false;
    c.endpoints = {k.endpoints};
    const auto viaflag = track_image(c, k.image, k.segmentation);
    const ScalarField psi = compute_cost(k.image, c);
    const auto explicit_zero = track(c, psi, ScalarField(psi.grid(), 0.0), k.endpoints);
    REQUIRE(viaflag.size() == 1);
    CHECK(viaflag[0].distance == explicit_zero.distance);
    REQUIRE(viaflag[0].path.size() == explicit_zero.path.size());
    for (std::size_t i = 0; i < explicit_zero.path.size(); ++i) {
        CHECK(viaflag[0].path.samples[i].x == explicit_zero.path.samples[i].x);
        CHECK(viaflag[0].path.samples[i].y == explicit_zero.path.samples[i].y);
    }
}

TEST_CASE("U-turn: the prior follows the tube, the classical model cuts across") {
    const BenchCase k = synth_benchmark(2026, {0.0}, {"uturn"})[0];
    TrackingConfig c;
    c.beta = 6.0;
    c.endpoints = {k.endpoints};
    const auto prior = track_image(c, k.image, k.segmentation);
    CHECK(jaccard(prior[0].path.physical(), k.truth, 128, 128) >= 0.85);
    // samples stay half a pixel apart even where the descent falls back to stencil jumps
    const auto p = prior[0].path.physical();
    for (std::size_t i = 1; i < p.size(); ++i) CHECK(std::hypot(p[i].x - p[i - 1].x, p[i].y - p[i - 1].y) <= 0.5 + 1e-9);
    c.prior_enabled = false;
    const auto classical = track_image(c, k.image, k.segmentation);
    CHECK(jaccard(classical[0].path.physical(), k.truth, 128, 128) <= 0.6);
}

TEST_CASE("path document and overlay") {
    TrackingConfig c;
    const LiftedGrid g = pipeline_grid(c, 40, 20);
    const TrackResult r = track(c, ScalarField(g, 1.0), ScalarField(g, 0.0), {{{5, 10}, 0.0}, {{30, 10}, 0.0}});
    const auto j = nlohmann::json::parse(track_to_json(r, c, 40, 20));
    CHECK(j.at("units") == "px");
    CHECK(j.at("grid").at("nx") == 40);
    CHECK(j.at("samples").size() == r.path.size());
    CHECK(j.at("pixel_scale").get<double>() == doctest::Approx(c.h_x()));

    Field2D img(40, 20, 0.0);
    const RgbImage o = render_overlay(img, {{&r.path, {255, 0, 0}}});
    CHECK(o.width == 40);
    CHECK(o.height == 20);
    CHECK(o.at(15, 10)[0] == 255);
    CHECK(o.at(15, 2)[0] == 0);
}

TEST_CASE("benchmark runs are summarised and written as CSV") {
    std::vector<BenchRun> runs{{"wave", 0, 0.0, 3, 4.5, true, 0.9, 1.0, {}},
                               {"wave", 0, 0.0, 3, 4.5, false, 0.5, 1.0, {}},
                               {"wave", 1, 0.01, 3, 4.5, true, 0.7, 1.0, {}},
                               {"wave", 1, 0.01, 3, 4.5, false, 0.1, 1.0, "no path, here"}};
    const BenchSummary s = summarize(runs);
    CHECK(s.mean_prior == doctest::Approx(0.8));
    CHECK(s.mean_classical == doctest::Approx(0.3));
    CHECK(s.std_prior == doctest::Approx(std::sqrt(0.02)));
    const std::string csv = bench_to_csv(runs);
    CHECK(csv.rfind("family,level,variance,alpha,beta,model,jaccard,seconds,max_residual,error\n", 0) == 0);
    CHECK(csv.find("no path; here") != std::string::npos);
}
