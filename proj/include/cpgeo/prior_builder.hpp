#pragma once

#include <array>
#include <string>
#include <vector>

#include "cpgeo/lifted_grid.hpp"

namespace cpgeo {

// Binary images are Field2D holding 0 and 1; pixel (ix, iy) sits at integer
// coordinates, y pointing down the rows.

using Pixel = std::array<int, 2>;
using PixelChain = std::vector<Pixel>;

/// Smoothed candidate centerline in pixel units.
struct Centerline {
    std::vector<Point2> samples;    // about 1 px apart
    std::vector<double> curvature;  // signed, 1 / px, positive towards the normal
    std::vector<Point2> normal;     // tangent rotated by +90 degrees
    std::vector<double> tangent;    // direction of traversal in [0, 2pi)
    bool closed = false;

    std::size_t size() const { return samples.size(); }
    double max_abs_curvature() const;
};

struct PriorOptions {
    int min_len = 10;     // px, shorter chains are dropped
    int window = 5;       // half-width of the moving average
    double u_max = 10.0;  // px, cap on the tube half-width
};

/// Two-subiteration Guo-Hall thinning until stable, followed by removal of
/// staircase corners so the result is 8-connected and one pixel wide.
/// Throws ValidationError on non-binary input or empty foreground.
Field2D skeletonize(const Field2D& seg);

/// Number of 8-neighbours set in a binary image.
int neighbour_count(const Field2D& img, int ix, int iy);

/// Removes junction pixels (three or more 8-neighbours, mask dilated by one
/// pixel), traces the remaining pieces end to end and drops those shorter than
/// min_len. A piece with no ends is returned once around, first pixel not
/// repeated.
std::vector<PixelChain> split_at_junctions(const Field2D& skeleton, int min_len = 10);

/// True when the chain's last pixel touches its first and it has no ends.
bool chain_is_closed(const PixelChain& chain);

/// Moving average of half-width `window` (shrinking at the ends of open
/// chains), resampling to unit arc length, curvature as the derivative of the
/// unwrapped tangent angle over arc length.
Centerline smooth_and_measure(const std::vector<Point2>& points, int window = 5, bool closed = false);
Centerline smooth_and_measure(const PixelChain& chain, int window = 5);

struct VoronoiMap {
    Field2D label;     // index of the nearest centerline
    Field2D distance;  // Euclidean distance to it, px
};

/// Nearest centerline per pixel by exact point-to-polyline distance. Ties go
/// to the smaller index.
VoronoiMap voronoi_labels(const std::vector<Centerline>& centerlines, int width, int height);

struct PriorMaps {
    Field2D phi;           // extended curvature, 1 / px; NaN off the support
    Field2D vartheta;      // tangent angle at the nearest parameter; NaN off the support
    Field2D region_label;  // centerline index, -1 for background
    ScalarField omega;     // on the lifted grid, physical units
    double tube_width = 0.0;
    bool degenerate = false;
    std::string warning;
};

/// Tube half-width used by build_prior: min(u_max, 0.9 / max_j |kappa_j|).
double tube_width(const std::vector<Centerline>& centerlines, double u_max);

/// Curvature prior: on the clipped tube around centerline j,
/// omega(x, theta) = phi(x) sign(cos(theta - vartheta(x))) / h_x with
/// sign(0) = +1, zero elsewhere. The grid must match the image size.
PriorMaps build_prior(const std::vector<Centerline>& centerlines, const VoronoiMap& voronoi,
                      double u_max, const LiftedGrid& grid);

/// Skeleton, chains, centerlines, Voronoi cells and prior in one go.
struct PriorBuild {
    Field2D skeleton;
    std::vector<Centerline> centerlines;
    PriorMaps maps;
};
PriorBuild build_prior_from_segmentation(const Field2D& seg, const LiftedGrid& grid,
                                         const PriorOptions& options = {});

}  // namespace cpgeo
