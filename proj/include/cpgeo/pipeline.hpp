#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cpgeo/backtrack.hpp"
#include "cpgeo/cost_builder.hpp"
#include "cpgeo/fmm_solver.hpp"
#include "cpgeo/image_io.hpp"
#include "cpgeo/prior_builder.hpp"

namespace cpgeo {

// Points handed to the pipeline are in image pixels (x right, y down). The
// lifted grid maps one pixel to h_x = pixel_scale, 2pi/n_theta by default, so
// spatial and angular steps match and beta is measured in those units.

struct Endpoint {
    Point2 p;
    std::optional<double> theta;  // estimated from the cost when absent
};

struct EndpointPair {
    Endpoint source;
    Endpoint target;
};

struct BenchSettings {
    std::uint64_t seed = 2026;
    std::vector<double> alphas{3.0, 4.0, 5.0};
    std::vector<double> betas{4.5, 6.0};
    int levels = 8;  // every other of the 16 variance levels in [0, 0.15]
    std::vector<std::string> families;  // empty means all
};

struct TrackingConfig {
    double beta = 5.0;
    double alpha = 3.0;
    int L = kDefaultQuadratureOrder;
    double eps = kDefaultRelaxation;
    int n_theta = kDefaultThetaCount;
    double pixel_scale = 0.0;  // 0 means 2pi / n_theta
    bool prior_enabled = true;
    double u_max = 10.0;
    int window = 5;
    int min_len = 10;
    std::vector<double> scales = kDefaultScales;
    double jaccard_radius = 6.0;
    bool check_residual = true;
    std::vector<EndpointPair> endpoints;
    BenchSettings bench;

    double h_x() const;
    SolverOptions solver_options() const;
    PriorOptions prior_options() const;
    /// Throws ValidationError naming the first bad field.
    void validate() const;
};

/// Resolved config as an indented JSON document.
std::string config_to_json(const TrackingConfig& cfg);
/// Keys present in `text` override `base`; unknown keys are rejected.
TrackingConfig config_from_json(const std::string& text, const TrackingConfig& base = {});
TrackingConfig load_config(const std::string& path);

LiftedGrid pipeline_grid(const TrackingConfig& cfg, int width, int height);

ScalarField compute_score(const Field2D& image, const TrackingConfig& cfg);
ScalarField compute_cost(const Field2D& image, const TrackingConfig& cfg);
PriorBuild compute_prior(const Field2D& segmentation, const TrackingConfig& cfg);

/// argmin over the slices with angle in [0, pi) of the cost at the node
/// nearest to `p` (physical coordinates); ties go to the smaller angle.
double estimate_endpoint_angle(const ScalarField& cost, Point2 p);

struct TrackResult {
    GeodesicPath path;  // pixel units, source to target
    LiftedPoint source;  // pixels, the seed orientation actually used
    LiftedPoint target;
    double distance = 0.0;
    SolveReport report;
};

/// Bidirectional solve between the pair and backtracking from the target
/// reached first. omega must be zero when the prior is disabled.
TrackResult track(const TrackingConfig& cfg, const ScalarField& psi, const ScalarField& omega,
                  const EndpointPair& pair);

/// Builds psi from the image and omega from the segmentation (when given and
/// the prior is enabled), then tracks every pair in cfg.endpoints.
std::vector<TrackResult> track_image(const TrackingConfig& cfg, const Field2D& image,
                                     const std::optional<Field2D>& segmentation);

/// Pixels within `radius` of the polyline.
std::vector<std::uint8_t> tube_mask(const std::vector<Point2>& line, int width, int height, double radius);

/// Intersection over union of the two tubes on a width x height raster.
double jaccard(const std::vector<Point2>& path, const std::vector<Point2>& truth, int width, int height,
               double radius = 6.0);

/// Symmetric Hausdorff distance between two polylines (vertices against
/// segments).
double hausdorff(const std::vector<Point2>& a, const std::vector<Point2>& b);

/// Path document in pixel units with the pixel scale recorded.
std::string track_to_json(const TrackResult& r, const TrackingConfig& cfg, int width, int height);

// synthetic benchmark

struct BenchCase {
    std::string family;
    int level = 0;
    double variance = 0.0;
    Field2D clean;         // noise-free intensities
    Field2D image;         // with noise
    Field2D segmentation;  // from the noisy image
    std::vector<Point2> truth;
    EndpointPair endpoints;
};

const std::vector<std::string>& bench_families();

/// count variances linearly spaced in [0, max_variance].
std::vector<double> noise_levels(int count = 16, double max_variance = 0.15);

/// One case per family and variance. Deterministic in the seed.
std::vector<BenchCase> synth_benchmark(std::uint64_t seed, const std::vector<double>& variances,
                                       const std::vector<std::string>& families = {});

struct BenchRun {
    std::string family;
    int level = 0;
    double variance = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    bool prior = false;
    double jaccard = 0.0;
    double seconds = 0.0;
    std::string error;  // non-empty when the run failed; jaccard is then 0
    double max_residual = std::numeric_limits<double>::quiet_NaN();  // NaN when not checked
};

struct BenchSummary {
    double mean_prior = 0.0, std_prior = 0.0;
    double mean_classical = 0.0, std_classical = 0.0;
    std::size_t runs = 0;
};

/// Cases are spread over `threads` workers (0 means one per hardware thread);
/// the result order does not depend on the thread count.
std::vector<BenchRun> run_benchmark(const std::vector<BenchCase>& cases, const TrackingConfig& cfg,
                                    int threads = 1);
BenchSummary summarize(const std::vector<BenchRun>& runs);
std::string bench_to_csv(const std::vector<BenchRun>& runs);

// overlay

struct OverlayPath {
    const GeodesicPath* path;
    std::array<std::uint8_t, 3> color;
};

/// Gray image with 1-px paths, endpoint discs and direction arrows.
RgbImage render_overlay(const Field2D& image, const std::vector<OverlayPath>& paths);

}  // namespace cpgeo
