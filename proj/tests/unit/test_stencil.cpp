#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "cpgeo/errors.hpp"
#include "cpgeo/stencil.hpp"
#include "doctest.h"

using namespace cpgeo;

namespace {

Mat3 reconstruct(const SellingDecomposition& d) {
    Mat3 m{};
    for (const auto& p : d.pairs) {
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) m[r][c] += p.weight * p.offset[r] * p.offset[c];
        }
    }
    return m;
}

double frob_rel(const Mat3& a, const Mat3& b) {
    double num = 0.0, den = 0.0;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            num += (a[r][c] - b[r][c]) * (a[r][c] - b[r][c]);
            den += b[r][c] * b[r][c];
        }
    }
    return std::sqrt(num / den);
}

Mat3 random_spd(std::mt19937_64& rng, double cond) {
    std::normal_distribution<double> N(0, 1);
    // random rotation by Gram-Schmidt
    std::array<Vec3, 3> q;
    for (int i = 0; i < 3; ++i) {
        Vec3 v{N(rng), N(rng), N(rng)};
        for (int j = 0; j < i; ++j) {
            const double d = v[0] * q[j][0] + v[1] * q[j][1] + v[2] * q[j][2];
            for (int c = 0; c < 3; ++c) v[c] -= d * q[j][c];
        }
        const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        for (int c = 0; c < 3; ++c) q[i][c] = v[c] / n;
    }
    std::uniform_real_distribution<double> U(0, 1);
    const double lam[3] = {1.0, std::pow(cond, U(rng)), cond};
    Mat3 m{};
    for (int i = 0; i < 3; ++i) {
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) m[r][c] += lam[i] * q[i][r] * q[i][c];
        }
    }
    return m;
}

}  // namespace

TEST_CASE("Selling decomposition of the identity") {
    const auto d = selling_3d({{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}});
    std::multiset<double> w;
    std::set<IVec3> unit;
    for (const auto& p : d.pairs) {
        w.insert(p.weight);
        if (p.weight > 0) unit.insert({std::abs(p.offset[0]), std::abs(p.offset[1]), std::abs(p.offset[2])});
    }
    CHECK(w == std::multiset<double>{0, 0, 0, 1, 1, 1});
    CHECK(unit == std::set<IVec3>{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
}

TEST_CASE("Selling reconstruction on diagonal and random matrices") {
    const Mat3 D{{{1, 0, 0}, {0, 2, 0}, {0, 0, 3}}};
    const auto d = selling_3d(D);
    CHECK(frob_rel(reconstruct(d), D) < 1e-14);

    std::mt19937_64 rng(42);
    for (int k = 0; k < 500; ++k) {
        const Mat3 M = random_spd(rng, 1e4);
        const auto dm = selling_3d(M);
        for (const auto& p : dm.pairs) REQUIRE(p.weight >= 0.0);
        REQUIRE(frob_rel(reconstruct(dm), M) < 1e-10);
    }
}

TEST_CASE("Selling rejects indefinite input") {
    CHECK_THROWS_AS(selling_3d({{{1, 0, 0}, {0, -1, 0}, {0, 0, 1}}}), ValidationError);
    CHECK_THROWS_AS(selling_3d({{{1, 2, 0}, {0, 1, 0}, {0, 0, 1}}}), ValidationError);
}

TEST_CASE("relaxed tensor") {
    const Mat3 a = relaxed_tensor({1, 0, 0}, 0.5);
    CHECK(a[0][0] == doctest::Approx(1.0));
    CHECK(a[1][1] == doctest::Approx(0.25));
    CHECK(a[2][2] == doctest::Approx(0.25));
    CHECK(a[0][1] == 0.0);
    const Mat3 b = relaxed_tensor({0, 0, 1}, 0.1);
    CHECK(b[0][0] == doctest::Approx(0.01));
    CHECK(b[1][1] == doctest::Approx(0.01));
    CHECK(b[2][2] == doctest::Approx(1.0));
    CHECK_THROWS_AS(relaxed_tensor({0, 0, 0}, 0.1), ValidationError);
    CHECK_THROWS_AS(relaxed_tensor({1, 0, 0}, 1.5), ValidationError);

    const Vec3 v{0.3, -1.2, 2.0};
    const Vec3 x{1.1, 0.4, -0.7};
    const Mat3 D = relaxed_tensor(v, 0.2);
    double q = 0.0;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) q += x[r] * D[r][c] * x[c];
    }
    const double xv = x[0] * v[0] + x[1] * v[1] + x[2] * v[2];
    const double xx = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    const double vv = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    CHECK(q == doctest::Approx(xv * xv + 0.04 * (xx * vv - xv * xv)));
}

TEST_CASE("directional decomposition") {
    const auto d = directional_decomposition({1, 0, 0}, 0.05);
    double best = 0.0;
    IVec3 best_e{};
    for (const auto& p : d) {
        if (p.weight > best) best = p.weight, best_e = p.offset;
    }
    CHECK(best_e == IVec3{1, 0, 0});
    CHECK(best == doctest::Approx(1.0).epsilon(0.01));

    std::mt19937_64 rng(7);
    std::normal_distribution<double> N(0, 1);
    for (double eps : {0.05, 0.1, 0.2}) {
        int maxnorm = 0;
        for (int k = 0; k < 500; ++k) {
            Vec3 v{N(rng), N(rng), N(rng)};
            const auto dd = directional_decomposition(v, eps);
            const Vec3 x{N(rng), N(rng), N(rng)};
            double unsigned_sum = 0.0;
            for (const auto& p : dd) {
                const double ev = p.offset[0] * v[0] + p.offset[1] * v[1] + p.offset[2] * v[2];
                REQUIRE(ev >= 0.0);
                const double xe = x[0] * p.offset[0] + x[1] * p.offset[1] + x[2] * p.offset[2];
                unsigned_sum += p.weight * xe * xe;
                for (int c : p.offset) maxnorm = std::max(maxnorm, std::abs(c));
            }
            const Mat3 D = relaxed_tensor(v, eps);
            double q = 0.0;
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c) q += x[r] * D[r][c] * x[c];
            }
            REQUIRE(unsigned_sum == doctest::Approx(q).epsilon(1e-10));
        }
        CHECK(maxnorm <= 2.0 / eps);
    }
}

TEST_CASE("directional decomposition approximates the positive part at rate eps^2") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> N(0, 1);
    double err[3] = {0, 0, 0};
    const double eps_list[3] = {0.2, 0.1, 0.05};
    for (int k = 0; k < 200; ++k) {
        const Vec3 v{N(rng), N(rng), N(rng)};
        Vec3 x{N(rng), N(rng), N(rng)};
        double xv = x[0] * v[0] + x[1] * v[1] + x[2] * v[2];
        if (xv < 0) {
            for (double& c : x) c = -c;
            xv = -xv;
        }
        const double nx = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        const double nv = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        for (int i = 0; i < 3; ++i) {
            double s = 0.0;
            for (const auto& p : directional_decomposition(v, eps_list[i])) {
                const double xe = x[0] * p.offset[0] + x[1] * p.offset[1] + x[2] * p.offset[2];
                if (xe > 0) s += p.weight * xe * xe;
            }
            const double e = std::abs(s - xv * xv) / (nx * nv);
            CHECK(e <= eps_list[i] * eps_list[i]);
            err[i] = std::max(err[i], e);
        }
    }
    CHECK(err[1] < err[0]);
    CHECK(err[2] < err[1]);
}

TEST_CASE("build_stencil symmetry and counts") {
    const LiftedGrid g = make_grid(10, 10, 72, 1.0);
    const Stencil cl = build_stencil({2.0, 0.0}, g, kPi / 6, 5, 0.1);
    CHECK(cl.raw_count == 30);
    CHECK(cl.entries.size() <= 30u);
    auto reflected = [](const Stencil& s) {
        std::set<std::pair<IVec3, long long>> a, b;
        for (const auto& e : s.entries) {
            a.insert({e.offset, std::llround(e.weight * 1e9)});
            b.insert({{e.offset[0], e.offset[1], -e.offset[2]}, std::llround(e.weight * 1e9)});
        }
        return a == b;
    };
    CHECK(reflected(cl));
    const Stencil pr = build_stencil({2.0, 0.5}, g, kPi / 6, 5, 0.1);
    CHECK_FALSE(reflected(pr));

    for (const auto& e : pr.entries) {
        CHECK(e.weight > 0.0);
        CHECK(e.offset != IVec3{0, 0, 0});
    }
    const Stencil again = build_stencil({2.0, 0.5}, g, kPi / 6, 5, 0.1);
    CHECK(dump_stencil(again) == dump_stencil(pr));
}

TEST_CASE("stencil form approximates the Hamiltonian") {
    const LiftedGrid g(10, 10, 72, kTwoPi / 72);
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const double eps_list[3] = {0.2, 0.1, 0.05};
    double total[3] = {0, 0, 0};
    for (int k = 0; k < 100; ++k) {
        const ModelParams p{0.5 + 2.5 * (U(rng) + 1), U(rng)};
        const double theta = g.theta_of(static_cast<int>(36 * (U(rng) + 1)) % 72);
        const Covector c{U(rng), U(rng), U(rng)};
        const Vec3 xi{c.hx * g.h_x(), c.hy * g.h_x(), c.htheta * g.h_theta()};
        const double exact = hamiltonian_quadrature(p, theta, c, 5);
        for (int i = 0; i < 3; ++i) {
            const Stencil s = build_stencil(p, g, theta, 5, eps_list[i]);
            total[i] += std::abs(stencil_form(s, xi) - exact);
        }
    }
    CHECK(total[1] < 0.5 * total[0]);
    CHECK(total[2] < 0.5 * total[1]);
}

TEST_CASE("dump format") {
    Stencil s;
    s.entries.push_back({0.5, {1, 0, -2}});
    CHECK(dump_stencil(s) == "0.5 1 0 -2\n");
}

TEST_CASE("stencil cache buckets omega") {
    StencilCache cache(make_grid(8, 8, 12, 1.0), 2.0);
    const Stencil& a = cache.get(3, 0.25);
    const Stencil& b = cache.get(3, 0.25 + 3e-5);
    CHECK(&a == &b);
    const Stencil& c = cache.get(3, 0.2502);
    CHECK(&a != &c);
    CHECK(cache.size() == 2);
    CHECK(StencilCache::quantize(0.123456) == doctest::Approx(0.1235));
    CHECK(dump_stencil(a) == dump_stencil(build_stencil({2.0, 0.25}, cache.grid(), cache.grid().theta_of(3))));
}
