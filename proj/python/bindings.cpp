#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cpgeo/errors.hpp"
#include "cpgeo/hamiltonian.hpp"
#include "cpgeo/pipeline.hpp"

namespace py = pybind11;
using namespace cpgeo;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Field2D to_field2d(const Array& a) {
    if (a.ndim() != 2) throw ValidationError("expected a 2-D array (height, width)");
    const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
    return Field2D(w, h, std::vector<double>(a.data(), a.data() + a.size()));
}

Array from_field2d(const Field2D& f) {
    Array out({f.ny(), f.nx()});
    std::copy(f.values().begin(), f.values().end(), out.mutable_data());
    return out;
}

// (height, width, n_theta), theta fastest
Array from_scalar(const ScalarField& f) {
    const LiftedGrid& g = f.grid();
    Array out({g.ny(), g.nx(), g.n_theta()});
    std::copy(f.values().begin(), f.values().end(), out.mutable_data());
    return out;
}

ScalarField to_scalar(const Array& a, double h_x) {
    if (a.ndim() != 3) throw ValidationError("expected a 3-D array (height, width, n_theta)");
    const LiftedGrid g(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), static_cast<int>(a.shape(2)), h_x);
    return ScalarField(g, std::vector<double>(a.data(), a.data() + a.size()));
}

Endpoint to_endpoint(const py::sequence& s) {
    if (s.size() != 2 && s.size() != 3) throw ValidationError("point must be (x, y) or (x, y, theta)");
    Endpoint e{{s[0].cast<double>(), s[1].cast<double>()}, std::nullopt};
    if (s.size() == 3 && !s[2].is_none()) e.theta = s[2].cast<double>();
    return e;
}

// rows of (u, x, y, theta, kappa)
Array path_array(const GeodesicPath& p) {
    Array out({static_cast<py::ssize_t>(p.size()), py::ssize_t{5}});
    auto m = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const auto r = static_cast<py::ssize_t>(i);
        m(r, 0) = p.u[i];
        m(r, 1) = p.samples[i].x;
        m(r, 2) = p.samples[i].y;
        m(r, 3) = p.samples[i].theta;
        m(r, 4) = p.kappa[i];
    }
    return out;
}

std::vector<Point2> to_polyline(const Array& a) {
    if (a.ndim() != 2 || a.shape(1) < 2) throw ValidationError("polyline must be an (n, 2) array");
    std::vector<Point2> out;
    auto m = a.unchecked<2>();
    for (py::ssize_t i = 0; i < a.shape(0); ++i) out.push_back({m(i, 0), m(i, 1)});
    return out;
}

py::dict track_dict(const TrackResult& r, const TrackingConfig& cfg, int w, int h) {
    py::dict d;
    d["path"] = path_array(r.path);
    d["distance"] = r.distance;
    d["source"] = py::make_tuple(r.source.x, r.source.y, r.source.theta);
    d["target"] = py::make_tuple(r.target.x, r.target.y, r.target.theta);
    d["accepted"] = r.report.accepted_count;
    d["json"] = track_to_json(r, cfg, w, h);
    return d;
}

}  // namespace

PYBIND11_MODULE(_cpgeo, m) {
    m.doc() = "Curvature-prior elastica geodesics";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    py::class_<TrackingConfig>(m, "Config")
        .def(py::init<>())
        .def_readwrite("beta", &TrackingConfig::beta)
        .def_readwrite("alpha", &TrackingConfig::alpha)
        .def_readwrite("L", &TrackingConfig::L)
        .def_readwrite("eps", &TrackingConfig::eps)
        .def_readwrite("n_theta", &TrackingConfig::n_theta)
        .def_readwrite("pixel_scale", &TrackingConfig::pixel_scale)
        .def_readwrite("prior_enabled", &TrackingConfig::prior_enabled)
        .def_readwrite("u_max", &TrackingConfig::u_max)
        .def_readwrite("window", &TrackingConfig::window)
        .def_readwrite("min_len", &TrackingConfig::min_len)
        .def_readwrite("scales", &TrackingConfig::scales)
        .def_readwrite("jaccard_radius", &TrackingConfig::jaccard_radius)
        .def_readwrite("check_residual", &TrackingConfig::check_residual)
        .def_property_readonly("h_x", &TrackingConfig::h_x)
        .def("validate", &TrackingConfig::validate)
        .def("to_json", [](const TrackingConfig& c) { return config_to_json(c); })
        .def_static("from_json", [](const std::string& text) { return config_from_json(text); });

    m.def("hamiltonian", [](double beta, double omega, double theta, std::array<double, 3> xhat) {
        return hamiltonian_closed({beta, omega}, theta, {xhat[0], xhat[1], xhat[2]});
    }, py::arg("beta"), py::arg("omega"), py::arg("theta"), py::arg("xhat"));
    m.def("hamiltonian_quadrature", [](double beta, double omega, double theta, std::array<double, 3> xhat, int L) {
        return hamiltonian_quadrature({beta, omega}, theta, {xhat[0], xhat[1], xhat[2]}, L);
    }, py::arg("beta"), py::arg("omega"), py::arg("theta"), py::arg("xhat"), py::arg("L") = kDefaultQuadratureOrder);

    m.def("cost", [](const Array& image, const TrackingConfig& cfg) {
        return from_scalar(compute_cost(to_field2d(image), cfg));
    }, py::arg("image"), py::arg("config") = TrackingConfig{},
          "Cost psi with shape (height, width, n_theta) from a gray image in [0, 1].");

    m.def("prior", [](const Array& seg, const TrackingConfig& cfg) {
        const PriorBuild pb = compute_prior(to_field2d(seg), cfg);
        py::dict d;
        d["omega"] = from_scalar(pb.maps.omega);
        d["phi"] = from_field2d(pb.maps.phi);
        d["skeleton"] = from_field2d(pb.skeleton);
        d["tube_width"] = pb.maps.tube_width;
        d["centerlines"] = pb.centerlines.size();
        d["degenerate"] = pb.maps.degenerate;
        d["warning"] = pb.maps.warning;
        return d;
    }, py::arg("segmentation"), py::arg("config") = TrackingConfig{});

    m.def("solve", [](const Array& psi, const std::optional<Array>& omega, double beta, const py::sequence& source,
                      const py::sequence& target, const TrackingConfig& cfg) {
        const ScalarField p = to_scalar(psi, cfg.h_x());
        const ScalarField w = omega ? to_scalar(*omega, cfg.h_x()) : ScalarField(p.grid(), 0.0);
        const double h = cfg.h_x();
        const Endpoint s = to_endpoint(source), t = to_endpoint(target);
        const double ts = s.theta ? *s.theta : estimate_endpoint_angle(p, {s.p.x * h, s.p.y * h});
        const double tt = t.theta ? *t.theta : estimate_endpoint_angle(p, {t.p.x * h, t.p.y * h});
        std::optional<BidirectionalResult> r;
        {
            py::gil_scoped_release nogil;
            r = solve_bidirectional(p.grid(), p, w, beta, LiftedPoint(s.p.x * h, s.p.y * h, ts),
                                    LiftedPoint(t.p.x * h, t.p.y * h, tt), cfg.solver_options());
        }
        py::dict d;
        d["distance"] = from_scalar(r->distance);
        d["target"] = py::make_tuple(r->target.ix, r->target.iy, r->target.itheta);
        d["value"] = *r->report.target_value;
        d["accepted"] = r->report.accepted_count;
        d["max_residual"] = r->report.max_residual;
        return d;
    }, py::arg("psi"), py::arg("omega"), py::arg("beta"), py::arg("source"), py::arg("target"),
          py::arg("config") = TrackingConfig{}, "Bidirectional fast marching; points in grid nodes.");

    m.def("track", [](const Array& image, const py::sequence& source, const py::sequence& target,
                      const std::optional<Array>& segmentation, const TrackingConfig& base) {
        TrackingConfig cfg = base;
        cfg.endpoints = {{to_endpoint(source), to_endpoint(target)}};
        const Field2D img = to_field2d(image);
        std::optional<Field2D> seg;
        if (segmentation) seg = to_field2d(*segmentation);
        std::vector<TrackResult> r;
        {
            py::gil_scoped_release nogil;
            r = track_image(cfg, img, seg);
        }
        return track_dict(r.front(), cfg, img.nx(), img.ny());
    }, py::arg("image"), py::arg("source"), py::arg("target"), py::arg("segmentation") = py::none(),
          py::arg("config") = TrackingConfig{}, "Track between two pixel points; path rows are (u, x, y, theta, kappa).");

    m.def("jaccard", [](const Array& path, const Array& truth, int width, int height, double radius) {
        return jaccard(to_polyline(path), to_polyline(truth), width, height, radius);
    }, py::arg("path"), py::arg("truth"), py::arg("width"), py::arg("height"), py::arg("radius") = 6.0);

    m.def("noise_levels", &noise_levels, py::arg("count") = 16, py::arg("max_variance") = 0.15);

    m.def("synth_benchmark", [](std::uint64_t seed, const std::vector<double>& variances,
                                const std::vector<std::string>& families) {
        py::list out;
        for (const BenchCase& c : synth_benchmark(seed, variances, families)) {
            py::dict d;
            d["family"] = c.family;
            d["level"] = c.level;
            d["variance"] = c.variance;
            d["clean"] = from_field2d(c.clean);
            d["image"] = from_field2d(c.image);
            d["segmentation"] = from_field2d(c.segmentation);
            Array truth({static_cast<py::ssize_t>(c.truth.size()), py::ssize_t{2}});
            auto m2 = truth.mutable_unchecked<2>();
            for (std::size_t i = 0; i < c.truth.size(); ++i) {
                m2(static_cast<py::ssize_t>(i), 0) = c.truth[i].x;
                m2(static_cast<py::ssize_t>(i), 1) = c.truth[i].y;
            }
            d["truth"] = truth;
            d["source"] = py::make_tuple(c.endpoints.source.p.x, c.endpoints.source.p.y);
            d["target"] = py::make_tuple(c.endpoints.target.p.x, c.endpoints.target.p.y);
            out.append(d);
        }
        return out;
    }, py::arg("seed"), py::arg("variances"), py::arg("families") = std::vector<std::string>{});
}
