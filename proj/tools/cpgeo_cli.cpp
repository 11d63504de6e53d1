// Command line front end: cost, prior, solve, track, bench, serve.

#include <chrono>
#include <cmath>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cpgeo/errors.hpp"
#include "cpgeo/field_io.hpp"
#include "cpgeo/pipeline.hpp"
#include "cpgeo/server.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace cpgeo;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;

struct Common {
    std::string config_path;
    std::string out = "out";
    std::optional<double> beta, alpha;
    std::optional<int> n_theta;
    bool no_prior = false;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--out", c.out, "Output directory")->capture_default_str();
    app->add_option("--config", c.config_path, "JSON config file");
    app->add_option("--beta", c.beta, "Curvature weight");
    app->add_option("--alpha", c.alpha, "Cost contrast");
    app->add_option("--n-theta", c.n_theta, "Number of orientations");
    app->add_flag("--no-prior", c.no_prior, "Classical model (omega = 0)");
}

TrackingConfig resolve(const Common& c) {
    TrackingConfig cfg = c.config_path.empty() ? TrackingConfig{} : load_config(c.config_path);
    if (c.beta) cfg.beta = *c.beta;
    if (c.alpha) cfg.alpha = *c.alpha;
    if (c.n_theta) cfg.n_theta = *c.n_theta;
    if (c.no_prior) cfg.prior_enabled = false;
    cfg.validate();
    return cfg;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    if (!out) throw IoError("cannot write " + p.string());
    out << text;
    if (text.empty() || text.back() != '\n') out << '\n';
}

fs::path prepare_out(const Common& c, const TrackingConfig& cfg) {
    fs::path dir(c.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    const std::string text = config_to_json(cfg);
    write_text(dir / "config.json", text);
    std::cerr << "resolved config (" << (dir / "config.json").string() << "):\n" << text << "\n";
    return dir;
}

// "x,y" or "x,y,theta"
Endpoint parse_point(const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ValidationError("bad coordinate '" + item + "' in '" + s + "'");
        }
    }
    if (v.size() != 2 && v.size() != 3) throw ValidationError("point must be x,y or x,y,theta: '" + s + "'");
    Endpoint e{{v[0], v[1]}, std::nullopt};
    if (v.size() == 3) e.theta = v[2];
    return e;
}

Field2D min_over_theta(const ScalarField& f) {
    const LiftedGrid& g = f.grid();
    Field2D m(g.nx(), g.ny(), 0.0);
    for (int y = 0; y < g.ny(); ++y) {
        for (int x = 0; x < g.nx(); ++x) {
            double best = INFINITY;
            for (int k = 0; k < g.n_theta(); ++k) best = std::min(best, f(GridIndex{x, y, k}));
            m(x, y) = best;
        }
    }
    return m;
}

Field2D normalized(const Field2D& f) {
    double lo = INFINITY, hi = -INFINITY;
    for (double v : f.values()) {
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    Field2D out(f.nx(), f.ny(), 0.0);
    if (!(hi > lo)) return out;
    for (std::size_t k = 0; k < f.size(); ++k) out[k] = std::isfinite(f[k]) ? (f[k] - lo) / (hi - lo) : 1.0;
    return out;
}

json report_json(const SolveReport& r) {
    json j{{"accepted_count", r.accepted_count},
           {"wall_time", r.wall_time},
           {"max_residual", std::isnan(r.max_residual) ? json(nullptr) : json(r.max_residual)},
           {"heap_pushes", r.counters.heap_pushes},
           {"heap_pops", r.counters.heap_pops},
           {"heap_decreases", r.counters.heap_decreases},
           {"heap_comparisons", r.counters.heap_comparisons},
           {"local_updates", r.counters.local_updates},
           {"monotonicity_violations", r.counters.monotonicity_violations},
           {"stencils_built", r.counters.stencils_built}};
    if (r.target_value) j["target_value"] = *r.target_value;
    return j;
}

int cmd_cost(const Common& c, const std::string& image) {
    const TrackingConfig cfg = resolve(c);
    const fs::path out = prepare_out(c, cfg);
    const Field2D img = read_image(image);
    const ScalarField psi = compute_cost(img, cfg);
    write_field((out / "cost.cpgf").string(), psi);
    write_png((out / "cost_min.png").string(), normalized(min_over_theta(psi)));
    std::cout << "wrote " << (out / "cost.cpgf").string() << " (" << psi.grid().nx() << "x" << psi.grid().ny() << "x"
              << psi.grid().n_theta() << ")\n";
    return 0;
}

int cmd_prior(const Common& c, const std::string& seg_path) {
    const TrackingConfig cfg = resolve(c);
    const fs::path out = prepare_out(c, cfg);
    const PriorBuild pb = compute_prior(binarize(read_image(seg_path)), cfg);
    write_field((out / "omega.cpgf").string(), pb.maps.omega);
    write_map((out / "phi.cpgf").string(), pb.maps.phi, cfg.h_x());
    write_png((out / "skeleton.png").string(), pb.skeleton);
    json info{{"centerlines", pb.centerlines.size()},
              {"tube_width", pb.maps.tube_width},
              {"degenerate", pb.maps.degenerate},
              {"warning", pb.maps.warning}};
    json lines = json::array();
    for (const Centerline& cl : pb.centerlines) {
        lines.push_back({{"samples", cl.samples.size()}, {"closed", cl.closed}, {"max_abs_curvature", cl.max_abs_curvature()}});
    }
    info["lines"] = lines;
    write_text(out / "prior.json", info.dump(2));
    if (pb.maps.degenerate) std::cerr << "warning: " << pb.maps.warning << "\n";
    std::cout << "wrote " << (out / "omega.cpgf").string() << " with " << pb.centerlines.size() << " centerlines\n";
    return 0;
}

int cmd_solve(const Common& c, const std::string& cost_path, const std::string& omega_path, const std::string& src,
              const std::string& tgt) {
    const TrackingConfig cfg = resolve(c);
    const fs::path out = prepare_out(c, cfg);
    const ScalarField psi = read_field(cost_path);
    const LiftedGrid& g = psi.grid();
    const ScalarField omega = omega_path.empty() || !cfg.prior_enabled ? ScalarField(g, 0.0) : read_field(omega_path);
    if (!(omega.grid() == g)) throw ValidationError("omega and cost grids differ");
    const Endpoint s = parse_point(src);
    const double ts = s.theta ? *s.theta : estimate_endpoint_angle(psi, {s.p.x * g.h_x(), s.p.y * g.h_x()});
    const LiftedPoint sp(s.p.x * g.h_x(), s.p.y * g.h_x(), ts);
    json rep;
    if (tgt.empty()) {
        const GridIndex i = g.index_of(sp);
        const GridIndex j{i.ix, i.iy, (i.itheta + g.n_theta() / 2) % g.n_theta()};
        const SolveResult r = solve(g, psi, omega, cfg.beta, {{i, 0.0}, {j, 0.0}}, std::nullopt, cfg.solver_options());
        write_field((out / "distance.cpgf").string(), r.distance);
        rep = report_json(r.report);
    } else {
        const Endpoint t = parse_point(tgt);
        const double tt = t.theta ? *t.theta : estimate_endpoint_angle(psi, {t.p.x * g.h_x(), t.p.y * g.h_x()});
        const BidirectionalResult r = solve_bidirectional(g, psi, omega, cfg.beta, sp,
                                                          LiftedPoint(t.p.x * g.h_x(), t.p.y * g.h_x(), tt),
                                                          cfg.solver_options());
        write_field((out / "distance.cpgf").string(), r.distance);
        rep = report_json(r.report);
        rep["reached_target"] = {r.target.ix, r.target.iy, r.target.itheta};
    }
    write_text(out / "report.json", rep.dump(2));
    std::cout << "accepted " << rep["accepted_count"] << " nodes in " << rep["wall_time"] << " s\n";
    return 0;
}

int cmd_track(const Common& c, const std::string& image, const std::string& seg, const std::string& cost_path,
              const std::string& omega_path, const std::string& src, const std::string& tgt) {
    TrackingConfig cfg = resolve(c);
    if (!src.empty() || !tgt.empty()) {
        if (src.empty() || tgt.empty()) throw ValidationError("--source and --target go together");
        cfg.endpoints = {{parse_point(src), parse_point(tgt)}};
    }
    if (cfg.endpoints.empty()) throw ValidationError("no endpoints: pass --source/--target or list them in the config");
    if (image.empty() == cost_path.empty()) throw ValidationError("pass exactly one of --image and --cost");
    const fs::path out = prepare_out(c, cfg);

    std::vector<TrackResult> results;
    Field2D background;
    if (!image.empty()) {
        background = read_image(image);
        std::optional<Field2D> s;
        if (!seg.empty()) s = read_image(seg);
        results = track_image(cfg, background, s);
    } else {
        const ScalarField psi = read_field(cost_path);
        const ScalarField omega =
            omega_path.empty() || !cfg.prior_enabled ? ScalarField(psi.grid(), 0.0) : read_field(omega_path);
        for (const EndpointPair& e : cfg.endpoints) results.push_back(track(cfg, psi, omega, e));
        background = normalized(min_over_theta(psi));
    }
    std::vector<OverlayPath> paths;
    const std::array<std::array<std::uint8_t, 3>, 3> colors{{{230, 40, 40}, {40, 120, 240}, {40, 200, 80}}};
    for (std::size_t i = 0; i < results.size(); ++i) {
        const std::string name = "path_" + std::to_string(i) + ".json";
        write_text(out / name, track_to_json(results[i], cfg, background.nx(), background.ny()));
        paths.push_back({&results[i].path, colors[i % colors.size()]});
        std::cout << name << ": " << results[i].path.size() << " samples, distance " << results[i].distance << "\n";
    }
    write_png((out / "overlay.png").string(), render_overlay(background, paths));
    return 0;
}

int cmd_bench(const Common& c, bool full, int levels, const std::vector<std::string>& families, int threads) {
    TrackingConfig cfg = resolve(c);
    if (levels > 0) cfg.bench.levels = levels;
    if (!families.empty()) cfg.bench.families = families;
    if (!full && families.empty() && cfg.bench.families.empty()) cfg.bench.families = {"uturn"};
    cfg.validate();
    const fs::path out = prepare_out(c, cfg);
    const auto all = noise_levels();
    std::vector<double> variances;
    const std::size_t stride = all.size() / static_cast<std::size_t>(cfg.bench.levels);
    for (std::size_t i = 0; i < all.size() && variances.size() < static_cast<std::size_t>(cfg.bench.levels); i += std::max<std::size_t>(1, stride)) {
        variances.push_back(all[i]);
    }
    const auto cases = synth_benchmark(cfg.bench.seed, variances, cfg.bench.families);
    const auto t0 = std::chrono::steady_clock::now();
    const auto runs = run_benchmark(cases, cfg, threads);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_text(out / "bench.csv", bench_to_csv(runs));
    const BenchSummary s = summarize(runs);
    json sj{{"runs", s.runs},
            {"mean_prior", s.mean_prior},
            {"std_prior", s.std_prior},
            {"mean_classical", s.mean_classical},
            {"std_classical", s.std_classical},
            {"seconds", secs}};
    write_text(out / "summary.json", sj.dump(2));
    std::cout << sj.dump(2) << "\n";
    return 0;
}

TrackingServer* g_server = nullptr;

int cmd_serve(const Common& c, ServeOptions opts) {
    const TrackingConfig cfg = resolve(c);
    prepare_out(c, cfg);
    TrackingServer server(cfg, opts);
    const int port = server.bind();
    g_server = &server;
    std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
    });
    std::cout << "listening on http://" << opts.host << ":" << port << "\n" << std::flush;
    server.run();
    g_server = nullptr;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Curvature-prior elastica geodesics for curvilinear structure tracking"};
    app.require_subcommand(1);
    Common common;

    std::string image, seg, cost, omega, src, tgt;
    auto* c_cost = app.add_subcommand("cost", "Orientation score and cost field from an image");
    add_common(c_cost, common);
    c_cost->add_option("--image", image, "PNG or PGM image")->required()->check(CLI::ExistingFile);

    auto* c_prior = app.add_subcommand("prior", "Curvature prior from a binary segmentation");
    add_common(c_prior, common);
    c_prior->add_option("--segmentation", seg, "PNG or PGM mask")->required()->check(CLI::ExistingFile);

    auto* c_solve = app.add_subcommand("solve", "Fast marching on precomputed fields");
    add_common(c_solve, common);
    c_solve->add_option("--cost", cost, "cost field (CPGF1)")->required()->check(CLI::ExistingFile);
    c_solve->add_option("--omega", omega, "prior field (CPGF1)")->check(CLI::ExistingFile);
    c_solve->add_option("--source", src, "x,y[,theta] in grid nodes")->required();
    c_solve->add_option("--target", tgt, "x,y[,theta]; stops when reached");

    auto* c_track = app.add_subcommand("track", "Solve and backtrack between endpoints");
    add_common(c_track, common);
    c_track->add_option("--image", image, "PNG or PGM image")->check(CLI::ExistingFile);
    c_track->add_option("--segmentation", seg, "mask used for the prior")->check(CLI::ExistingFile);
    c_track->add_option("--cost", cost, "precomputed cost field instead of --image")->check(CLI::ExistingFile);
    c_track->add_option("--omega", omega, "precomputed prior field")->check(CLI::ExistingFile);
    c_track->add_option("--source", src, "x,y[,theta] in pixels");
    c_track->add_option("--target", tgt, "x,y[,theta] in pixels");

    bool full = false;
    int levels = 0, threads = 0;
    std::vector<std::string> families;
    auto* c_bench = app.add_subcommand("bench", "Synthetic benchmark, prior against classical");
    add_common(c_bench, common);
    c_bench->add_flag("--full", full, "all families (default runs uturn only)");
    c_bench->add_option("--levels", levels, "noise levels out of 16");
    c_bench->add_option("--families", families, "subset of uturn spiral near_touch crossing wave")->delimiter(',');
    c_bench->add_option("--threads", threads, "worker threads, 0 = all cores")->capture_default_str();

    ServeOptions sopts;
    auto* c_serve = app.add_subcommand("serve", "HTTP API for interactive tracking");
    add_common(c_serve, common);
    c_serve->add_option("--host", sopts.host)->capture_default_str();
    c_serve->add_option("--port", sopts.port)->capture_default_str();
    c_serve->add_option("--static", sopts.static_dir, "web UI directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (c_cost->parsed()) return cmd_cost(common, image);
        if (c_prior->parsed()) return cmd_prior(common, seg);
        if (c_solve->parsed()) return cmd_solve(common, cost, omega, src, tgt);
        if (c_track->parsed()) return cmd_track(common, image, seg, cost, omega, src, tgt);
        if (c_bench->parsed()) return cmd_bench(common, full, levels, families, threads);
        if (c_serve->parsed()) return cmd_serve(common, sopts);
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const IoError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
