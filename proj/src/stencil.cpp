#include "cpgeo/stencil.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

#include "cpgeo/errors.hpp"

namespace cpgeo {

namespace {

constexpr double kSellingTolerance = 1e-12;
constexpr int kSellingMaxIterations = 200;

// Pair (i, j) of a superbase and the complementary pair (k, l).
constexpr int kPairs[6][4] = {{0, 1, 2, 3}, {0, 2, 1, 3}, {0, 3, 1, 2},
                              {1, 2, 0, 3}, {1, 3, 0, 2}, {2, 3, 0, 1}};

using Superbase = std::array<std::array<long, 3>, 4>;

double form(const Mat3& D, const std::array<long, 3>& a, const std::array<long, 3>& b) {
    double s = 0.0;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) s += a[r] * D[r][c] * b[c];
    }
    return s;
}

std::array<long, 3> cross(const std::array<long, 3>& a, const std::array<long, 3>& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

void check_spd(const Mat3& D) {
    double scale = 0.0;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            if (!std::isfinite(D[r][c])) throw ValidationError("matrix has non-finite entries");
            scale = std::max(scale, std::abs(D[r][c]));
        }
    }
    for (int r = 0; r < 3; ++r) {
        for (int c = r + 1; c < 3; ++c) {
            if (std::abs(D[r][c] - D[c][r]) > 1e-12 * scale) {
                throw ValidationError("matrix is not symmetric");
            }
        }
    }
    const double m1 = D[0][0];
    const double m2 = D[0][0] * D[1][1] - D[0][1] * D[1][0];
    const double m3 = D[0][0] * (D[1][1] * D[2][2] - D[1][2] * D[2][1]) -
                      D[0][1] * (D[1][0] * D[2][2] - D[1][2] * D[2][0]) +
                      D[0][2] * (D[1][0] * D[2][1] - D[1][1] * D[2][0]);
    if (!(m1 > 0.0 && m2 > 0.0 && m3 > 0.0)) {
        throw ValidationError("matrix is not positive definite");
    }
}

bool lex_positive(const IVec3& e) {
    for (int c = 0; c < 3; ++c) {
        if (e[c] != 0) return e[c] > 0;
    }
    return true;
}

}  // namespace

SellingDecomposition selling_3d(const Mat3& D) {
    check_spd(D);
    const double tol = kSellingTolerance * (D[0][0] + D[1][1] + D[2][2]);
    Superbase b{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {-1, -1, -1}}};

    SellingDecomposition out;
    int it = 0;
    for (;; ++it) {
        bool flipped = false;
        for (const auto& p : kPairs) {
            const int i = p[0], j = p[1], k = p[2], l = p[3];
            if (form(D, b[i], b[j]) > tol) {
                if (it >= kSellingMaxIterations) {
                    throw SolverError("Selling decomposition did not converge (ill-conditioned matrix)");
                }
                Superbase nb;
                for (int c = 0; c < 3; ++c) {
                    nb[0][c] = -b[i][c];
                    nb[1][c] = b[j][c];
                    nb[2][c] = b[k][c] + b[i][c];
                    nb[3][c] = b[l][c] + b[i][c];
                }
                b = nb;
                flipped = true;
                break;
            }
        }
        if (!flipped) break;
    }
    out.iterations = it;
    for (int n = 0; n < 6; ++n) {
        const auto& p = kPairs[n];
        const double w = -form(D, b[p[0]], b[p[1]]);
        const auto e = cross(b[p[2]], b[p[3]]);
        out.pairs[static_cast<std::size_t>(n)].weight = std::max(w, 0.0);
        out.pairs[static_cast<std::size_t>(n)].offset = {static_cast<int>(e[0]), static_cast<int>(e[1]),
                                                         static_cast<int>(e[2])};
    }
    return out;
}

Mat3 relaxed_tensor(const Vec3& v, double eps) {
    const double n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    if (n2 == 0.0) throw ValidationError("relaxed_tensor needs a nonzero vector");
    if (!(eps > 0.0 && eps < 1.0)) throw ValidationError("relaxation eps must lie in (0, 1)");
    const double e2 = eps * eps;
    Mat3 D{};
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            D[r][c] = (1.0 - e2) * v[r] * v[c] + (r == c ? e2 * n2 : 0.0);
        }
    }
    return D;
}

std::vector<WeightedOffset> directional_decomposition(const Vec3& v, double eps) {
    const SellingDecomposition dec = selling_3d(relaxed_tensor(v, eps));
    const double vn = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    std::vector<WeightedOffset> out;
    out.reserve(7);
    for (WeightedOffset w : dec.pairs) {
        const double s = w.offset[0] * v[0] + w.offset[1] * v[1] + w.offset[2] * v[2];
        const double en = std::sqrt(static_cast<double>(w.offset[0]) * w.offset[0] +
                                    static_cast<double>(w.offset[1]) * w.offset[1] +
                                    static_cast<double>(w.offset[2]) * w.offset[2]);
        const bool tie = std::abs(s) <= 1e-12 * en * vn;
        if (tie ? !lex_positive(w.offset) : s < 0.0) {
            for (int& c : w.offset) c = -c;
        }
        if (tie && w.weight > 0.0) {
            // Orthogonal offset: no upwind side, keep both orientations.
            w.weight *= 0.5;
            out.push_back(w);
            out.push_back({w.weight, {-w.offset[0], -w.offset[1], -w.offset[2]}});
            continue;
        }
        out.push_back(w);
    }
    return out;
}

Stencil build_stencil(const ModelParams& params, const LiftedGrid& grid, double theta, int L,
                      double eps) {
    if (!(params.beta > 0.0)) throw ValidationError("beta must be positive");
    const std::vector<ControlSample> samples = control_samples(params, theta, L);
    std::vector<WeightedOffset> raw;
    raw.reserve(samples.size() * 6);
    for (const ControlSample& q : samples) {
        const Vec3 v{q.direction[0] / grid.h_x(), q.direction[1] / grid.h_x(),
                     q.direction[2] / grid.h_theta()};
        for (WeightedOffset w : directional_decomposition(v, eps)) {
            w.weight *= q.weight;
            raw.push_back(w);
        }
    }
    Stencil st;
    st.raw_count = static_cast<int>(samples.size() * 6);
    std::stable_sort(raw.begin(), raw.end(), [](const WeightedOffset& a, const WeightedOffset& b) {
        return a.offset < b.offset;
    });
    for (const WeightedOffset& w : raw) {
        if (w.weight <= 0.0) continue;
        if (!st.entries.empty() && st.entries.back().offset == w.offset) {
            st.entries.back().weight += w.weight;
        } else {
            st.entries.push_back(w);
        }
    }
    return st;
}

double stencil_form(const Stencil& stencil, const Vec3& xi) {
    double acc = 0.0;
    for (const WeightedOffset& w : stencil.entries) {
        const double p = xi[0] * w.offset[0] + xi[1] * w.offset[1] + xi[2] * w.offset[2];
        if (p > 0.0) acc += w.weight * p * p;
    }
    return acc;
}

std::string dump_stencil(const Stencil& stencil) {
    std::ostringstream out;
    out.precision(17);
    for (const WeightedOffset& w : stencil.entries) {
        out << w.weight << ' ' << w.offset[0] << ' ' << w.offset[1] << ' ' << w.offset[2] << '\n';
    }
    return out.str();
}

StencilCache::StencilCache(LiftedGrid grid, double beta, int L, double eps)
    : grid_(std::move(grid)), beta_(beta), L_(L), eps_(eps) {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ValidationError("beta must be positive");
    if (L < 1) throw ValidationError("quadrature order L must be at least 1");
    if (!(eps > 0.0 && eps < 1.0)) throw ValidationError("relaxation eps must lie in (0, 1)");
}

std::int64_t StencilCache::bucket(double omega) {
    return static_cast<std::int64_t>(std::llround(omega / kOmegaBucket));
}

double StencilCache::quantize(double omega) { return static_cast<double>(bucket(omega)) * kOmegaBucket; }

const Stencil& StencilCache::get(int itheta, double omega) {
    const auto key = std::make_pair(itheta, bucket(omega));
    {
        std::shared_lock lock(mutex_);
        auto it = stencils_.find(key);
        if (it != stencils_.end()) return *it->second;
    }
    auto st = std::make_unique<Stencil>(
        build_stencil({beta_, quantize(omega)}, grid_, grid_.theta_of(itheta), L_, eps_));
    std::unique_lock lock(mutex_);
    auto [it, inserted] = stencils_.try_emplace(key, std::move(st));
    return *it->second;
}

std::size_t StencilCache::size() const {
    std::shared_lock lock(mutex_);
    return stencils_.size();
}

}  // namespace cpgeo
