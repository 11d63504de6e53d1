#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace cpgeo {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;
inline constexpr double kPi = 3.141592653589793238462643383279;

using Vec3 = std::array<double, 3>;
using IVec3 = std::array<int, 3>;

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

// Reduce an angle to [0, 2pi).
double wrap_angle(double theta);

// Signed shortest angular difference a - b, in (-pi, pi].
double angle_diff(double a, double b);

struct GridIndex {
    int ix = 0;
    int iy = 0;
    int itheta = 0;

    friend bool operator==(const GridIndex&, const GridIndex&) = default;
};

// A point of the lifted domain: physical position plus orientation.
struct LiftedPoint {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;

    LiftedPoint() = default;
    LiftedPoint(double x_, double y_, double theta_) : x(x_), y(y_), theta(wrap_angle(theta_)) {}
};

/// Cartesian discretization of positions and orientations with a periodic
/// angular axis.
///
/// Node (ix, iy, itheta) sits at physical position origin + h_x * (ix, iy)
/// and angle itheta * h_theta, with h_theta = 2pi / n_theta. Linear storage is
/// row-major over (iy, ix, itheta): the angular index is innermost, so the
/// physical part matches the usual image layout (row iy, column ix).
class LiftedGrid {
public:
    LiftedGrid(int nx, int ny, int n_theta, double h_x, Point2 origin = {});

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int n_theta() const { return n_theta_; }
    double h_x() const { return h_x_; }
    double h_theta() const { return h_theta_; }
    Point2 origin() const { return origin_; }

    std::size_t size() const {
        return static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_) *
               static_cast<std::size_t>(n_theta_);
    }
    std::size_t plane_size() const {
        return static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_);
    }

    std::size_t linear(const GridIndex& i) const {
        return (static_cast<std::size_t>(i.iy) * nx_ + i.ix) * n_theta_ + i.itheta;
    }
    GridIndex unravel(std::size_t k) const {
        const int it = static_cast<int>(k % n_theta_);
        const std::size_t p = k / n_theta_;
        return {static_cast<int>(p % nx_), static_cast<int>(p / nx_), it};
    }

    bool in_range(const GridIndex& i) const {
        return i.ix >= 0 && i.ix < nx_ && i.iy >= 0 && i.iy < ny_ && i.itheta >= 0 &&
               i.itheta < n_theta_;
    }
    int wrap_theta(int it) const {
        const int r = it % n_theta_;
        return r < 0 ? r + n_theta_ : r;
    }

    double x_of(int ix) const { return origin_.x + h_x_ * ix; }
    double y_of(int iy) const { return origin_.y + h_x_ * iy; }
    double theta_of(int it) const { return h_theta_ * it; }
    LiftedPoint point_of(const GridIndex& i) const;

    // Continuous index-space coordinates of a physical point; no bounds check.
    double fx(double x) const { return (x - origin_.x) / h_x_; }
    double fy(double y) const { return (y - origin_.y) / h_x_; }
    double ftheta(double theta) const { return wrap_angle(theta) / h_theta_; }

    // True when the physical position lies in the closed grid box.
    bool contains(double x, double y) const;

    /// Nearest node. Throws ValidationError when the physical coordinates fall
    /// outside the grid; the angle always wraps.
    GridIndex index_of(const LiftedPoint& p) const;

    /// idx - offset, wrapping the angular component. Empty when the physical
    /// part leaves the domain (outflow boundary).
    std::optional<GridIndex> shift(const GridIndex& idx, const IVec3& offset) const;

    friend bool operator==(const LiftedGrid& a, const LiftedGrid& b) {
        return a.nx_ == b.nx_ && a.ny_ == b.ny_ && a.n_theta_ == b.n_theta_ && a.h_x_ == b.h_x_ &&
               a.origin_.x == b.origin_.x && a.origin_.y == b.origin_.y;
    }

private:
    int nx_;
    int ny_;
    int n_theta_;
    double h_x_;
    double h_theta_;
    Point2 origin_;
};

inline constexpr int kDefaultThetaCount = 72;

LiftedGrid make_grid(int nx, int ny, int n_theta = kDefaultThetaCount, double h_x = 1.0);

/// Real values over every node of a lifted grid.
///
/// All values are finite except in distance maps, where +inf marks nodes the
/// solver never accepted.
class ScalarField {
public:
    explicit ScalarField(LiftedGrid grid, double fill = 0.0)
        : grid_(std::move(grid)), values_(grid_.size(), fill) {}
    ScalarField(LiftedGrid grid, std::vector<double> values);

    const LiftedGrid& grid() const { return grid_; }
    std::size_t size() const { return values_.size(); }

    double& operator[](std::size_t k) { return values_[k]; }
    double operator[](std::size_t k) const { return values_[k]; }
    double& operator()(const GridIndex& i) { return values_[grid_.linear(i)]; }
    double operator()(const GridIndex& i) const { return values_[grid_.linear(i)]; }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    double max_value() const;
    double min_value() const;

private:
    LiftedGrid grid_;
    std::vector<double> values_;
};

inline constexpr double kUnvisited = std::numeric_limits<double>::infinity();

/// Row-major 2-D real array: images, segmentations, per-pixel maps.
class Field2D {
public:
    Field2D() = default;
    Field2D(int nx, int ny, double fill = 0.0)
        : nx_(nx), ny_(ny), values_(static_cast<std::size_t>(nx) * ny, fill) {}
    Field2D(int nx, int ny, std::vector<double> values);

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }
    bool in_range(int ix, int iy) const { return ix >= 0 && iy >= 0 && ix < nx_ && iy < ny_; }

    double& operator()(int ix, int iy) { return values_[static_cast<std::size_t>(iy) * nx_ + ix]; }
    double operator()(int ix, int iy) const {
        return values_[static_cast<std::size_t>(iy) * nx_ + ix];
    }
    double& operator[](std::size_t k) { return values_[k]; }
    double operator[](std::size_t k) const { return values_[k]; }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

private:
    int nx_ = 0;
    int ny_ = 0;
    std::vector<double> values_;
};

}  // namespace cpgeo
