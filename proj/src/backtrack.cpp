#include "cpgeo/backtrack.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "cpgeo/errors.hpp"
#include "json.hpp"

namespace cpgeo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Continuous index-space position (fx, fy, ftheta).
using IndexPoint = std::array<double, 3>;

class FlowField {
public:
    FlowField(const ScalarField& distance, const ScalarField& omega, double beta, const BacktrackOptions& o)
        : d_(distance), omega_(omega), g_(distance.grid()), cache_(g_, beta, o.L, o.eps) {}

    const LiftedGrid& grid() const { return g_; }

    double value(const GridIndex& i) const { return d_(i); }

    // sum_k w_k (u(x) - u(x - e_k))_+ e_k at a node, index units.
    const Vec3& node_flow(std::size_t k) {
        auto it = memo_.find(k);
        if (it != memo_.end()) return it->second;
        Vec3 v{0, 0, 0};
        const GridIndex x = g_.unravel(k);
        const double ux = d_[k];
        if (std::isfinite(ux)) {
            for (const WeightedOffset& w : stencil(x).entries) {
                const auto nb = g_.shift(x, w.offset);
                if (!nb) continue;
                const double diff = ux - d_(*nb);
                if (diff > 0.0) {
                    for (int c = 0; c < 3; ++c) v[c] += w.weight * diff * w.offset[c];
                }
            }
        }
        return memo_.emplace(k, v).first->second;
    }

    const Stencil& stencil(const GridIndex& x) { return cache_.get(x.itheta, omega_(x)); }

    struct Corners {
        std::array<GridIndex, 8> idx;
        std::array<double, 8> w;
    };

    Corners corners(const IndexPoint& p) const {
        const int ix0 = std::clamp(static_cast<int>(std::floor(p[0])), 0, g_.nx() - 2);
        const int iy0 = std::clamp(static_cast<int>(std::floor(p[1])), 0, g_.ny() - 2);
        const double ft = std::floor(p[2]);
        const int it0 = g_.wrap_theta(static_cast<int>(ft));
        const double tx = std::clamp(p[0] - ix0, 0.0, 1.0);
        const double ty = std::clamp(p[1] - iy0, 0.0, 1.0);
        const double tt = p[2] - ft;
        Corners c;
        int n = 0;
        for (int dz = 0; dz < 2; ++dz) {
            for (int dy = 0; dy < 2; ++dy) {
                for (int dx = 0; dx < 2; ++dx) {
                    c.idx[n] = {ix0 + dx, iy0 + dy, g_.wrap_theta(it0 + dz)};
                    c.w[n] = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) * (dz ? tt : 1 - tt);
                    ++n;
                }
            }
        }
        return c;
    }

    // Interpolated distance; corners holding +inf are left out.
    double interp_value(const IndexPoint& p) const {
        const Corners c = corners(p);
        double acc = 0.0, wsum = 0.0;
        for (int n = 0; n < 8; ++n) {
            const double v = d_(c.idx[n]);
            if (!std::isfinite(v) || c.w[n] == 0.0) continue;
            acc += c.w[n] * v;
            wsum += c.w[n];
        }
        return wsum > 0.0 ? acc / wsum : kInf;
    }

    Vec3 interp_flow(const IndexPoint& p) {
        const Corners c = corners(p);
        Vec3 acc{0, 0, 0};
        double wsum = 0.0;
        for (int n = 0; n < 8; ++n) {
            if (c.w[n] == 0.0 || !std::isfinite(d_(c.idx[n]))) continue;
            const Vec3& v = node_flow(g_.linear(c.idx[n]));
            for (int k = 0; k < 3; ++k) acc[k] += c.w[n] * v[k];
            wsum += c.w[n];
        }
        if (wsum > 0.0) {
            for (double& a : acc) a /= wsum;
        }
        return acc;
    }

private:
    const ScalarField& d_;
    const ScalarField& omega_;
    const LiftedGrid& g_;
    StencilCache cache_;
    std::unordered_map<std::size_t, Vec3> memo_;
};

double seed_gap(const LiftedGrid& g, const IndexPoint& p, const GridIndex& s) {
    const double dx = p[0] - s.ix;
    const double dy = p[1] - s.iy;
    double dt = std::remainder(p[2] - s.itheta, static_cast<double>(g.n_theta()));
    return std::sqrt(dx * dx + dy * dy + dt * dt);
}

LiftedPoint to_lifted(const LiftedGrid& g, const IndexPoint& p) {
    return LiftedPoint(g.origin().x + p[0] * g.h_x(), g.origin().y + p[1] * g.h_x(), p[2] * g.h_theta());
}

}  // namespace

std::vector<Point2> GeodesicPath::physical() const {
    std::vector<Point2> out;
    out.reserve(samples.size());
    for (const LiftedPoint& p : samples) out.push_back({p.x, p.y});
    return out;
}

GeodesicPath backtrack(const ScalarField& distance, const ScalarField& omega, double beta,
                       const LiftedPoint& start, const SeedSet& seeds, const BacktrackOptions& options) {
    const LiftedGrid& g = distance.grid();
    if (!(omega.grid() == g)) throw ValidationError("curvature prior does not share the distance grid");
    if (seeds.empty()) throw ValidationError("seed set is empty");
    if (!g.contains(start.x, start.y)) throw ValidationError("backtracking start lies outside the grid");
    if (!(options.step >= 0.0) || !std::isfinite(options.step)) throw ValidationError("step must be positive");
    const double step_phys = options.step > 0.0 ? options.step : 0.5 * g.h_x();
    const double step = step_phys / g.h_x();
    const long cap = options.max_iterations > 0 ? options.max_iterations
                                                : 50L * (g.nx() + g.ny() + g.n_theta());

    FlowField flow(distance, omega, beta, options);
    IndexPoint p{g.fx(start.x), g.fy(start.y), g.ftheta(start.theta)};
    double dp = flow.interp_value(p);
    if (!std::isfinite(dp)) throw ValidationError("distance is not finite at the backtracking start");

    auto near_seed = [&](const IndexPoint& q) {
        for (const Seed& s : seeds) {
            if (seed_gap(g, q, s.index) <= options.stop_radius) return true;
        }
        return false;
    };
    auto clamp_domain = [&](IndexPoint& q) {
        q[0] = std::clamp(q[0], 0.0, g.nx() - 1.0);
        q[1] = std::clamp(q[1], 0.0, g.ny() - 1.0);
        q[2] = std::fmod(q[2], static_cast<double>(g.n_theta()));
        if (q[2] < 0.0) q[2] += g.n_theta();
    };

    std::vector<IndexPoint> trace{p};
    long it = 0;
    while (!near_seed(p)) {
        if (++it > cap) throw SolverError("backtracking exceeded its iteration cap");
        const Vec3 v = flow.interp_flow(p);
        const double vn = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        bool moved = false;
        if (vn > 1e-300) {
            double s = step;
            for (int tries = 0; tries < 6 && !moved; ++tries, s *= 0.5) {
                IndexPoint q{p[0] - s * v[0] / vn, p[1] - s * v[1] / vn, p[2] - s * v[2] / vn};
                clamp_domain(q);
                const double dq = flow.interp_value(q);
                if (dq < dp) {
                    p = q;
                    dp = dq;
                    moved = true;
                }
            }
        }
        if (!moved) {
            // discrete descent: lowest stencil neighbor around the surrounding nodes
            const auto cell = flow.corners(p);
            GridIndex best{};
            double best_v = dp;
            for (const GridIndex& x : cell.idx) {
                if (flow.value(x) < best_v) {
                    best_v = flow.value(x);
                    best = x;
                }
                for (const WeightedOffset& w : flow.stencil(x).entries) {
                    const auto nb = g.shift(x, w.offset);
                    if (nb && flow.value(*nb) < best_v) {
                        best_v = flow.value(*nb);
                        best = *nb;
                    }
                }
            }
            if (!(best_v < dp)) {
                throw SolverError("backtracking stagnated at index (" + std::to_string(p[0]) + ", " +
                                  std::to_string(p[1]) + ", " + std::to_string(p[2]) + ")");
            }
            // the jump follows a stencil offset; fill it in at the regular step
            const IndexPoint to{static_cast<double>(best.ix), static_cast<double>(best.iy),
                                static_cast<double>(best.itheta)};
            const double dth = std::remainder(to[2] - p[2], static_cast<double>(g.n_theta()));
            const double len = std::sqrt((to[0] - p[0]) * (to[0] - p[0]) + (to[1] - p[1]) * (to[1] - p[1]) + dth * dth);
            const int pieces = std::max(1, static_cast<int>(std::ceil(len / step)));
            const IndexPoint from = p;
            for (int k = 1; k < pieces; ++k) {
                const double t = static_cast<double>(k) / pieces;
                IndexPoint q{from[0] + t * (to[0] - from[0]), from[1] + t * (to[1] - from[1]), from[2] + t * dth};
                clamp_domain(q);
                trace.push_back(q);
            }
            p = to;
            dp = flow.interp_value(p);
        }
        trace.push_back(p);
    }

    GeodesicPath path;
    path.distance = flow.interp_value(trace.front());
    path.samples.reserve(trace.size());
    for (auto r = trace.rbegin(); r != trace.rend(); ++r) path.samples.push_back(to_lifted(g, *r));
    // the first recorded sample is the start itself
    path.samples.back() = start;
    const std::size_t n = path.samples.size();
    path.u.resize(n);
    for (std::size_t i = 0; i < n; ++i) path.u[i] = n > 1 ? static_cast<double>(i) / (n - 1) : 0.0;
    path.kappa = n >= 3 ? estimate_curvature(path.samples, options.curvature_window) : std::vector<double>(n, 0.0);
    return path;
}

GeodesicPath backtrack(const ScalarField& distance, double beta, const LiftedPoint& start,
                       const SeedSet& seeds, const BacktrackOptions& options) {
    return backtrack(distance, ScalarField(distance.grid(), 0.0), beta, start, seeds, options);
}

std::vector<double> estimate_curvature(const std::vector<LiftedPoint>& samples, int window) {
    const std::size_t n = samples.size();
    if (n < 3) throw ValidationError("curvature needs at least three samples");
    if (window < 1) throw ValidationError("curvature window must be at least 1");
    // unwrapped orientation and cumulative arc length
    std::vector<double> eta(n), s(n, 0.0);
    eta[0] = samples[0].theta;
    for (std::size_t i = 1; i < n; ++i) {
        eta[i] = eta[i - 1] + angle_diff(samples[i].theta, samples[i - 1].theta);
        s[i] = s[i - 1] + std::hypot(samples[i].x - samples[i - 1].x, samples[i].y - samples[i - 1].y);
    }
    const double total = s.back();
    std::vector<double> kappa(n, std::numeric_limits<double>::quiet_NaN());
    const std::size_t w = static_cast<std::size_t>(window);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = i >= w ? i - w : 0;
        const std::size_t b = std::min(n - 1, i + w);
        const double ds = s[b] - s[a];
        if (ds > 1e-9 * std::max(total, 1.0)) kappa[i] = (eta[b] - eta[a]) / ds;
    }
    // fill stationary stretches from the nearest valid neighbors
    std::vector<std::size_t> valid;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isnan(kappa[i])) valid.push_back(i);
    }
    if (valid.empty()) return std::vector<double>(n, 0.0);
    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isnan(kappa[i])) continue;
        while (j + 1 < valid.size() && valid[j + 1] < i) ++j;
        const std::size_t lo = valid[j];
        const std::size_t hi = (j + 1 < valid.size()) ? valid[j + 1] : lo;
        if (lo > i || hi == lo) {
            kappa[i] = kappa[lo > i ? lo : hi];
        } else {
            const double t = static_cast<double>(i - lo) / static_cast<double>(hi - lo);
            kappa[i] = (1 - t) * kappa[lo] + t * kappa[hi];
        }
    }
    return kappa;
}

std::string path_to_json(const GeodesicPath& path, const LiftedGrid& grid, double beta,
                         const std::optional<LiftedPoint>& source, const std::optional<LiftedPoint>& target) {
    nlohmann::json doc;
    doc["grid"] = {{"nx", grid.nx()},
                   {"ny", grid.ny()},
                   {"n_theta", grid.n_theta()},
                   {"h_x", grid.h_x()},
                   {"h_theta", grid.h_theta()},
                   {"origin", {grid.origin().x, grid.origin().y}}};
    doc["beta"] = beta;
    nlohmann::json samples = nlohmann::json::array();
    for (std::size_t i = 0; i < path.samples.size(); ++i) {
        const LiftedPoint& p = path.samples[i];
        samples.push_back({{"u", path.u[i]}, {"x", p.x}, {"y", p.y}, {"theta", p.theta}, {"kappa", path.kappa[i]}});
    }
    doc["samples"] = std::move(samples);
    doc["distance"] = path.distance;
    if (source) doc["source"] = {{"x", source->x}, {"y", source->y}, {"theta", source->theta}};
    if (target) doc["target"] = {{"x", target->x}, {"y", target->y}, {"theta", target->theta}};
    return doc.dump(2);
}

}  // namespace cpgeo
