#include "cpgeo/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "cpgeo/cost_builder.hpp"
#include "cpgeo/errors.hpp"
#include "json.hpp"

namespace cpgeo {

using nlohmann::json;

namespace {

json endpoint_json(const Endpoint& e) {
    json j{{"x", e.p.x}, {"y", e.p.y}};
    if (e.theta) j["theta"] = *e.theta;
    return j;
}

Endpoint endpoint_from(const json& j) {
    if (!j.is_object()) throw ValidationError("endpoint must be an object with x and y");
    Endpoint e;
    for (const auto& [k, v] : j.items()) {
        if (k == "x") e.p.x = v.get<double>();
        else if (k == "y") e.p.y = v.get<double>();
        else if (k == "theta") {
            if (!v.is_null()) e.theta = v.get<double>();
        } else throw ValidationError("unknown endpoint key '" + k + "'");
    }
    if (!j.contains("x") || !j.contains("y")) throw ValidationError("endpoint needs x and y");
    return e;
}

double dist_point_segment(const Point2& p, const Point2& a, const Point2& b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    const double t = len2 > 0.0 ? std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0) : 0.0;
    return std::hypot(a.x + t * dx - p.x, a.y + t * dy - p.y);
}

double dist_point_polyline(const Point2& p, const std::vector<Point2>& line) {
    if (line.size() == 1) return std::hypot(p.x - line[0].x, p.y - line[0].y);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < line.size(); ++i) best = std::min(best, dist_point_segment(p, line[i], line[i + 1]));
    return best;
}

GeodesicPath to_pixels(const GeodesicPath& path, double h) {
    GeodesicPath out = path;
    for (LiftedPoint& p : out.samples) p = LiftedPoint(p.x / h, p.y / h, p.theta);
    for (double& k : out.kappa) k *= h;
    return out;
}

// synthetic scene geometry on a 128 x 128 canvas

constexpr int kCanvas = 128;
constexpr double kTubeRadius = 2.0;

std::vector<Point2> arc(Point2 c, double r, double a0, double a1, double step = 0.5) {
    const int n = std::max(2, static_cast<int>(std::ceil(std::abs(a1 - a0) * r / step)) + 1);
    std::vector<Point2> out;
    for (int i = 0; i < n; ++i) {
        const double a = a0 + (a1 - a0) * i / (n - 1);
        out.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a)});
    }
    return out;
}

std::vector<Point2> segment(Point2 a, Point2 b, double step = 0.5) {
    const int n = std::max(2, static_cast<int>(std::ceil(std::hypot(b.x - a.x, b.y - a.y) / step)) + 1);
    std::vector<Point2> out;
    for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / (n - 1);
        out.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
    }
    return out;
}

void append(std::vector<Point2>& a, const std::vector<Point2>& b) {
    a.insert(a.end(), b.begin() + (a.empty() ? 0 : 1), b.end());
}

struct Scene {
    std::vector<Point2> truth;
    double intensity = 0.7;
    std::vector<Point2> distractor;  // brighter, not part of the truth
};

Scene make_scene(const std::string& family) {
    Scene s;
    if (family == "uturn") {
        // hooked legs so the two ends face each other across the mouth
        append(s.truth, arc({28, 54}, 8, kPi, 1.5 * kPi));
        append(s.truth, segment({28, 46}, {58, 46}));
        append(s.truth, arc({58, 64}, 18, -kPi / 2, kPi / 2));
        append(s.truth, segment({58, 82}, {28, 82}));
        append(s.truth, arc({28, 74}, 8, kPi / 2, kPi));
    } else if (family == "spiral") {
        const int n = 900;
        for (int i = 0; i <= n; ++i) {
            const double phi = 3.5 * kPi * i / n;
            const double r = 12.0 + 15.0 * phi / kTwoPi;
            s.truth.push_back({64 + r * std::cos(phi), 64 + r * std::sin(phi)});
        }
    } else if (family == "near_touch") {
        const double r = 24.0, gap = 24.0 / r;
        s.truth = arc({64, 64}, r, -kPi / 2 + gap / 2, 1.5 * kPi - gap / 2);
    } else if (family == "crossing") {
        const double r = 28.0, cut = 0.7;  // the bar cuts the arc 0.7 rad above its center
        s.truth = arc({64, 70}, r, kPi - 0.4, kTwoPi + 0.4);
        s.intensity = 0.7;
        s.distractor = segment({4, 70 - r * std::sin(cut)}, {124, 70 - r * std::sin(cut)});
    } else if (family == "wave") {
        for (int i = 0; i <= 400; ++i) {
            const double x = 16 + 96.0 * i / 400;
            s.truth.push_back({x, 64 + 20 * std::sin(kTwoPi * (x - 16) / 64)});
        }
    } else {
        throw ValidationError("unknown benchmark family '" + family + "'");
    }
    return s;
}

void paint(Field2D& img, const std::vector<Point2>& line, double value) {
    const auto m = tube_mask(line, img.nx(), img.ny(), kTubeRadius);
    for (std::size_t k = 0; k < m.size(); ++k) {
        if (m[k]) img[k] = std::max(img[k], value);
    }
}

void put_pixel(RgbImage& img, int x, int y, const std::array<std::uint8_t, 3>& c) {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
    std::uint8_t* p = img.at(x, y);
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
}

void draw_segment(RgbImage& img, Point2 a, Point2 b, const std::array<std::uint8_t, 3>& c) {
    const int n = std::max(1, static_cast<int>(std::ceil(2.0 * std::hypot(b.x - a.x, b.y - a.y))));
    for (int i = 0; i <= n; ++i) {
        const double t = static_cast<double>(i) / n;
        put_pixel(img, static_cast<int>(std::lround(a.x + t * (b.x - a.x))),
                  static_cast<int>(std::lround(a.y + t * (b.y - a.y))), c);
    }
}

void draw_disc(RgbImage& img, Point2 p, double r, const std::array<std::uint8_t, 3>& c) {
    for (int y = static_cast<int>(std::floor(p.y - r)); y <= static_cast<int>(std::ceil(p.y + r)); ++y) {
        for (int x = static_cast<int>(std::floor(p.x - r)); x <= static_cast<int>(std::ceil(p.x + r)); ++x) {
            if (std::hypot(x - p.x, y - p.y) <= r) put_pixel(img, x, y, c);
        }
    }
}

void draw_arrow(RgbImage& img, const LiftedPoint& p, const std::array<std::uint8_t, 3>& c) {
    const double len = 10.0;
    const Point2 tip{p.x + len * std::cos(p.theta), p.y + len * std::sin(p.theta)};
    draw_segment(img, {p.x, p.y}, tip, c);
    for (double side : {-1.0, 1.0}) {
        const double a = p.theta + kPi + side * 0.5;
        draw_segment(img, tip, {tip.x + 4.0 * std::cos(a), tip.y + 4.0 * std::sin(a)}, c);
    }
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

double TrackingConfig::h_x() const { return pixel_scale > 0.0 ? pixel_scale : kTwoPi / n_theta; }

SolverOptions TrackingConfig::solver_options() const { return SolverOptions{L, eps, check_residual}; }

PriorOptions TrackingConfig::prior_options() const { return PriorOptions{min_len, window, u_max}; }

void TrackingConfig::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(std::string(name) + " must be positive");
    };
    positive(beta, "beta");
    positive(alpha, "alpha");
    positive(u_max, "u_max");
    positive(jaccard_radius, "jaccard_radius");
    if (L < 1) throw ValidationError("L must be at least 1");
    if (!(eps > 0.0 && eps < 1.0)) throw ValidationError("eps must lie in (0, 1)");
    if (n_theta < 4 || n_theta % 2 != 0) throw ValidationError("n_theta must be even and at least 4");
    if (!(pixel_scale >= 0.0) || !std::isfinite(pixel_scale)) throw ValidationError("pixel_scale must be >= 0");
    if (window < 0) throw ValidationError("window must be nonnegative");
    if (min_len < 2) throw ValidationError("min_len must be at least 2");
    if (scales.empty()) throw ValidationError("scales must not be empty");
    for (double s : scales) positive(s, "scales entries");
    if (bench.levels < 1 || bench.levels > 16) throw ValidationError("bench.levels must lie in [1, 16]");
    if (bench.alphas.empty() || bench.betas.empty()) throw ValidationError("bench alphas and betas must not be empty");
    for (double a : bench.alphas) positive(a, "bench.alphas entries");
    for (double b : bench.betas) positive(b, "bench.betas entries");
    for (const std::string& f : bench.families) {
        if (std::find(bench_families().begin(), bench_families().end(), f) == bench_families().end()) {
            throw ValidationError("unknown benchmark family '" + f + "'");
        }
    }
    for (const EndpointPair& e : endpoints) {
        for (const Endpoint* p : {&e.source, &e.target}) {
            if (!std::isfinite(p->p.x) || !std::isfinite(p->p.y) || (p->theta && !std::isfinite(*p->theta))) {
                throw ValidationError("endpoint coordinates must be finite");
            }
        }
    }
}

std::string config_to_json(const TrackingConfig& cfg) {
    json eps = json::array();
    for (const EndpointPair& e : cfg.endpoints) {
        eps.push_back({{"source", endpoint_json(e.source)}, {"target", endpoint_json(e.target)}});
    }
    json j{{"beta", cfg.beta},
           {"alpha", cfg.alpha},
           {"L", cfg.L},
           {"eps", cfg.eps},
           {"n_theta", cfg.n_theta},
           {"pixel_scale", cfg.pixel_scale},
           {"resolved_h_x", cfg.h_x()},
           {"prior_enabled", cfg.prior_enabled},
           {"u_max", cfg.u_max},
           {"window", cfg.window},
           {"min_len", cfg.min_len},
           {"scales", cfg.scales},
           {"jaccard_radius", cfg.jaccard_radius},
           {"check_residual", cfg.check_residual},
           {"endpoints", eps},
           {"bench",
            {{"seed", cfg.bench.seed},
             {"alphas", cfg.bench.alphas},
             {"betas", cfg.bench.betas},
             {"levels", cfg.bench.levels},
             {"families", cfg.bench.families}}}};
    return j.dump(2);
}

TrackingConfig config_from_json(const std::string& text, const TrackingConfig& base) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    TrackingConfig cfg = base;
    try {
        for (const auto& [k, v] : j.items()) {
            if (k == "beta") cfg.beta = v.get<double>();
            else if (k == "alpha") cfg.alpha = v.get<double>();
            else if (k == "L") cfg.L = v.get<int>();
            else if (k == "eps") cfg.eps = v.get<double>();
            else if (k == "n_theta") cfg.n_theta = v.get<int>();
            else if (k == "pixel_scale") cfg.pixel_scale = v.get<double>();
            else if (k == "resolved_h_x") continue;  // echoed output, ignored on input
            else if (k == "prior_enabled") cfg.prior_enabled = v.get<bool>();
            else if (k == "u_max") cfg.u_max = v.get<double>();
            else if (k == "window") cfg.window = v.get<int>();
            else if (k == "min_len") cfg.min_len = v.get<int>();
            else if (k == "scales") cfg.scales = v.get<std::vector<double>>();
            else if (k == "jaccard_radius") cfg.jaccard_radius = v.get<double>();
            else if (k == "check_residual") cfg.check_residual = v.get<bool>();
            else if (k == "endpoints") {
                cfg.endpoints.clear();
                for (const json& e : v) {
                    if (!e.contains("source") || !e.contains("target")) {
                        throw ValidationError("each endpoint pair needs source and target");
                    }
                    cfg.endpoints.push_back({endpoint_from(e.at("source")), endpoint_from(e.at("target"))});
                }
            } else if (k == "bench") {
                for (const auto& [bk, bv] : v.items()) {
                    if (bk == "seed") cfg.bench.seed = bv.get<std::uint64_t>();
                    else if (bk == "alphas") cfg.bench.alphas = bv.get<std::vector<double>>();
                    else if (bk == "betas") cfg.bench.betas = bv.get<std::vector<double>>();
                    else if (bk == "levels") cfg.bench.levels = bv.get<int>();
                    else if (bk == "families") cfg.bench.families = bv.get<std::vector<std::string>>();
                    else throw ValidationError("unknown bench key '" + bk + "'");
                }
            } else {
                throw ValidationError("unknown config key '" + k + "'");
            }
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config value has the wrong type: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

TrackingConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

LiftedGrid pipeline_grid(const TrackingConfig& cfg, int width, int height) {
    return LiftedGrid(width, height, cfg.n_theta, cfg.h_x());
}

ScalarField compute_score(const Field2D& image, const TrackingConfig& cfg) {
    return orientation_score(image, pipeline_grid(cfg, image.nx(), image.ny()), cfg.scales);
}

ScalarField compute_cost(const Field2D& image, const TrackingConfig& cfg) {
    return cost_from_score(compute_score(image, cfg), cfg.alpha);
}

PriorBuild compute_prior(const Field2D& segmentation, const TrackingConfig& cfg) {
    return build_prior_from_segmentation(segmentation, pipeline_grid(cfg, segmentation.nx(), segmentation.ny()),
                                         cfg.prior_options());
}

double estimate_endpoint_angle(const ScalarField& cost, Point2 p) {
    const LiftedGrid& g = cost.grid();
    const GridIndex i = g.index_of(LiftedPoint(p.x, p.y, 0.0));
    int best = 0;
    for (int k = 1; k < g.n_theta() && g.theta_of(k) < kPi - 1e-12; ++k) {
        if (cost({i.ix, i.iy, k}) < cost({i.ix, i.iy, best})) best = k;
    }
    return g.theta_of(best);
}

TrackResult track(const TrackingConfig& cfg, const ScalarField& psi, const ScalarField& omega,
                  const EndpointPair& pair) {
    cfg.validate();
    const LiftedGrid& g = psi.grid();
    if (!(omega.grid() == g)) throw ValidationError("curvature prior does not share the cost grid");
    const double h = g.h_x();
    for (const Endpoint* e : {&pair.source, &pair.target}) {
        if (!(e->p.x >= 0.0 && e->p.y >= 0.0 && e->p.x <= g.nx() - 1.0 && e->p.y <= g.ny() - 1.0)) {
            throw ValidationError("endpoint (" + std::to_string(e->p.x) + ", " + std::to_string(e->p.y) +
                                  ") lies outside the image");
        }
    }
    const Point2 s{pair.source.p.x * h, pair.source.p.y * h};
    const Point2 y{pair.target.p.x * h, pair.target.p.y * h};
    const double ts = pair.source.theta ? *pair.source.theta : estimate_endpoint_angle(psi, s);
    const double ty = pair.target.theta ? *pair.target.theta : estimate_endpoint_angle(psi, y);

    const SolverOptions opts = cfg.solver_options();
    BidirectionalResult r =
        solve_bidirectional(g, psi, omega, cfg.beta, LiftedPoint(s.x, s.y, ts), LiftedPoint(y.x, y.y, ty), opts);
    BacktrackOptions bo;
    bo.L = cfg.L;
    bo.eps = cfg.eps;
    const GeodesicPath path = backtrack(r.distance, omega, cfg.beta, g.point_of(r.target), r.seeds, bo);

    TrackResult out;
    out.path = to_pixels(path, h);
    out.distance = *r.report.target_value;
    out.report = r.report;
    // the seed orientation the path actually left from
    double used = ts;
    if (path.size() > 0) {
        const double t0 = path.samples.front().theta;
        used = std::abs(angle_diff(t0, ts)) <= std::abs(angle_diff(t0, ts + kPi)) ? ts : ts + kPi;
    }
    out.source = LiftedPoint(pair.source.p.x, pair.source.p.y, used);
    out.target = LiftedPoint(g.x_of(r.target.ix) / h, g.y_of(r.target.iy) / h, g.theta_of(r.target.itheta));
    return out;
}

std::vector<TrackResult> track_image(const TrackingConfig& cfg, const Field2D& image,
                                     const std::optional<Field2D>& segmentation) {
    cfg.validate();
    if (cfg.endpoints.empty()) throw ValidationError("no endpoints to track");
    if (segmentation && (segmentation->nx() != image.nx() || segmentation->ny() != image.ny())) {
        throw ValidationError("segmentation and image sizes differ");
    }
    const ScalarField psi = compute_cost(image, cfg);
    ScalarField omega(psi.grid(), 0.0);
    if (cfg.prior_enabled && segmentation) omega = compute_prior(binarize(*segmentation), cfg).maps.omega;
    std::vector<TrackResult> out;
    for (const EndpointPair& e : cfg.endpoints) out.push_back(track(cfg, psi, omega, e));
    return out;
}

std::vector<std::uint8_t> tube_mask(const std::vector<Point2>& line, int width, int height, double radius) {
    if (width <= 0 || height <= 0) throw ValidationError("raster size must be positive");
    if (!(radius > 0.0)) throw ValidationError("tube radius must be positive");
    std::vector<std::uint8_t> m(static_cast<std::size_t>(width) * height, 0);
    if (line.empty()) return m;
    const std::size_t nseg = line.size() == 1 ? 1 : line.size() - 1;
    for (std::size_t i = 0; i < nseg; ++i) {
        const Point2 a = line[i], b = line[std::min(i + 1, line.size() - 1)];
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - radius)));
        const int x1 = std::min(width - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + radius)));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - radius)));
        const int y1 = std::min(height - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + radius)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                auto& v = m[static_cast<std::size_t>(y) * width + x];
                if (!v && dist_point_segment({static_cast<double>(x), static_cast<double>(y)}, a, b) <= radius) v = 1;
            }
        }
    }
    return m;
}

double jaccard(const std::vector<Point2>& path, const std::vector<Point2>& truth, int width, int height,
               double radius) {
    if (truth.empty()) throw ValidationError("ground-truth centerline is empty");
    const auto a = tube_mask(path, width, height, radius);
    const auto b = tube_mask(truth, width, height, radius);
    std::size_t inter = 0, uni = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        inter += a[k] && b[k];
        uni += a[k] || b[k];
    }
    return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

double hausdorff(const std::vector<Point2>& a, const std::vector<Point2>& b) {
    if (a.empty() || b.empty()) throw ValidationError("Hausdorff distance needs two nonempty curves");
    double d = 0.0;
    for (const Point2& p : a) d = std::max(d, dist_point_polyline(p, b));
    for (const Point2& p : b) d = std::max(d, dist_point_polyline(p, a));
    return d;
}

std::string track_to_json(const TrackResult& r, const TrackingConfig& cfg, int width, int height) {
    const LiftedGrid px(width, height, cfg.n_theta, 1.0);
    json j = json::parse(path_to_json(r.path, px, cfg.beta, r.source, r.target));
    j["pixel_scale"] = cfg.h_x();
    j["units"] = "px";
    j["alpha"] = cfg.alpha;
    j["prior_enabled"] = cfg.prior_enabled;
    j["solve"] = {{"accepted_count", r.report.accepted_count},
                  {"wall_time", r.report.wall_time},
                  {"max_residual", std::isnan(r.report.max_residual) ? json(nullptr) : json(r.report.max_residual)}};
    return j.dump(2);
}

const std::vector<std::string>& bench_families() {
    static const std::vector<std::string> f{"uturn", "spiral", "near_touch", "crossing", "wave"};
    return f;
}

std::vector<double> noise_levels(int count, double max_variance) {
    if (count < 1) throw ValidationError("need at least one noise level");
    if (!(max_variance >= 0.0)) throw ValidationError("variance must be nonnegative");
    std::vector<double> v(static_cast<std::size_t>(count), 0.0);
    for (int i = 0; i < count && count > 1; ++i) v[static_cast<std::size_t>(i)] = max_variance * i / (count - 1);
    return v;
}

std::vector<BenchCase> synth_benchmark(std::uint64_t seed, const std::vector<double>& variances,
                                       const std::vector<std::string>& families) {
    const std::vector<std::string>& fams = families.empty() ? bench_families() : families;
    std::vector<BenchCase> out;
    for (std::size_t fi = 0; fi < fams.size(); ++fi) {
        const Scene scene = make_scene(fams[fi]);
        Field2D clean(kCanvas, kCanvas, 0.0);
        paint(clean, scene.truth, scene.intensity);
        if (!scene.distractor.empty()) paint(clean, scene.distractor, 1.0);
        const std::size_t fam_id =
            static_cast<std::size_t>(std::find(bench_families().begin(), bench_families().end(), fams[fi]) -
                                     bench_families().begin());
        for (std::size_t li = 0; li < variances.size(); ++li) {
            if (!(variances[li] >= 0.0)) throw ValidationError("noise variance must be nonnegative");
            BenchCase c;
            c.family = fams[fi];
            c.level = static_cast<int>(li);
            c.variance = variances[li];
            c.clean = clean;
            c.image = clean;
            if (c.variance > 0.0) {
                // keyed on the variance, not its position, so subsets reproduce the full run
                const auto vkey = static_cast<std::uint32_t>(std::llround(c.variance * 1e7));
                std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                                  static_cast<std::uint32_t>(fam_id), vkey};
                std::mt19937_64 rng(seq);
                std::normal_distribution<double> noise(0.0, std::sqrt(c.variance));
                for (double& v : c.image.values()) v += noise(rng);
            }
            // segmentation as a user would get it: smooth the noisy image and threshold
            const Field2D blurred = gaussian_blur(c.image, 1.5);
            c.segmentation = Field2D(kCanvas, kCanvas);
            for (std::size_t k = 0; k < blurred.size(); ++k) c.segmentation[k] = blurred[k] > 0.35 ? 1.0 : 0.0;
            c.truth = scene.truth;
            c.endpoints = {{scene.truth.front(), std::nullopt}, {scene.truth.back(), std::nullopt}};
            out.push_back(std::move(c));
        }
    }
    return out;
}

namespace {

std::vector<BenchRun> run_case(const BenchCase& c, const TrackingConfig& cfg) {
    std::vector<BenchRun> runs;
    TrackingConfig local = cfg;
    const ScalarField score = compute_score(c.image, local);
    ScalarField omega(score.grid(), 0.0);
    std::string prior_error;
    try {
        omega = compute_prior(c.segmentation, local).maps.omega;
    } catch (const std::exception& e) {
        prior_error = e.what();
    }
    const ScalarField zero(score.grid(), 0.0);
    for (double alpha : cfg.bench.alphas) {
        const ScalarField psi = cost_from_score(score, alpha);
        for (double beta : cfg.bench.betas) {
            for (bool prior : {true, false}) {
                BenchRun r{c.family, c.level, c.variance, alpha, beta, prior, 0.0, 0.0, {}};
                local.alpha = alpha;
                local.beta = beta;
                local.prior_enabled = prior;
                const auto t0 = std::chrono::steady_clock::now();
                try {
                    if (prior && !prior_error.empty()) throw SolverError("prior failed: " + prior_error);
                    const TrackResult t = track(local, psi, prior ? omega : zero, c.endpoints);
                    r.max_residual = t.report.max_residual;
                    r.jaccard = jaccard(t.path.physical(), c.truth, c.image.nx(), c.image.ny(), cfg.jaccard_radius);
                } catch (const std::exception& e) {
                    r.error = e.what();
                }
                r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                runs.push_back(std::move(r));
            }
        }
    }
    return runs;
}

}  // namespace

std::vector<BenchRun> run_benchmark(const std::vector<BenchCase>& cases, const TrackingConfig& cfg, int threads) {
    cfg.validate();
    if (threads < 0) throw ValidationError("thread count must be nonnegative");
    if (threads == 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::vector<std::vector<BenchRun>> per_case(cases.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < cases.size(); i = next++) {
            try {
                per_case[i] = run_case(cases[i], cfg);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const int n = std::min<int>(threads, static_cast<int>(std::max<std::size_t>(1, cases.size())));
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    std::vector<BenchRun> runs;
    for (auto& v : per_case) runs.insert(runs.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
    return runs;
}

BenchSummary summarize(const std::vector<BenchRun>& runs) {
    std::vector<double> p, c;
    for (const BenchRun& r : runs) (r.prior ? p : c).push_back(r.jaccard);
    return {mean_of(p), std_of(p), mean_of(c), std_of(c), runs.size()};
}

std::string bench_to_csv(const std::vector<BenchRun>& runs) {
    std::ostringstream out;
    out << "family,level,variance,alpha,beta,model,jaccard,seconds,max_residual,error\n";
    out << std::setprecision(6);
    for (const BenchRun& r : runs) {
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        out << r.family << ',' << r.level << ',' << r.variance << ',' << r.alpha << ',' << r.beta << ','
            << (r.prior ? "prior" : "classical") << ',' << r.jaccard << ',' << r.seconds << ',';
        if (!std::isnan(r.max_residual)) out << r.max_residual;
        out << ',' << err << '\n';
    }
    return out.str();
}

RgbImage render_overlay(const Field2D& image, const std::vector<OverlayPath>& paths) {
    if (image.empty()) throw ValidationError("overlay needs an image");
    double lo = image.values()[0], hi = lo;
    for (double v : image.values()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = hi > lo ? hi - lo : 1.0;
    RgbImage img(image.nx(), image.ny());
    for (int y = 0; y < image.ny(); ++y) {
        for (int x = 0; x < image.nx(); ++x) {
            const auto v = static_cast<std::uint8_t>(std::lround(255.0 * (image(x, y) - lo) / span));
            put_pixel(img, x, y, {v, v, v});
        }
    }
    for (const OverlayPath& op : paths) {
        if (!op.path || op.path->size() == 0) continue;
        const auto& s = op.path->samples;
        for (std::size_t i = 1; i < s.size(); ++i) draw_segment(img, {s[i - 1].x, s[i - 1].y}, {s[i].x, s[i].y}, op.color);
        for (const LiftedPoint& e : {s.front(), s.back()}) {
            draw_disc(img, {e.x, e.y}, 2.5, op.color);
            draw_arrow(img, e, op.color);
        }
    }
    return img;
}

}  // namespace cpgeo
