#include "cpgeo/lifted_grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cpgeo/errors.hpp"

namespace cpgeo {

double wrap_angle(double theta) {
    double t = std::fmod(theta, kTwoPi);
    if (t < 0.0) t += kTwoPi;
    // fmod of a tiny negative value can land exactly on 2pi after the shift.
    if (t >= kTwoPi) t = 0.0;
    return t;
}

double angle_diff(double a, double b) {
    double d = std::remainder(a - b, kTwoPi);
    if (d <= -kPi) d += kTwoPi;
    return d;
}

LiftedGrid::LiftedGrid(int nx, int ny, int n_theta, double h_x, Point2 origin)
    : nx_(nx), ny_(ny), n_theta_(n_theta), h_x_(h_x), h_theta_(0.0), origin_(origin) {
    if (nx < 2 || ny < 2 || n_theta < 2) {
        std::ostringstream msg;
        msg << "invalid grid dimensions " << nx << "x" << ny << "x" << n_theta
            << " (each extent must be at least 2)";
        throw ValidationError(msg.str());
    }
    if (!(h_x > 0.0) || !std::isfinite(h_x)) {
        throw ValidationError("grid spacing h_x must be positive and finite");
    }
    h_theta_ = kTwoPi / n_theta;
}

LiftedPoint LiftedGrid::point_of(const GridIndex& i) const {
    return LiftedPoint(x_of(i.ix), y_of(i.iy), theta_of(i.itheta));
}

bool LiftedGrid::contains(double x, double y) const {
    const double fxv = fx(x);
    const double fyv = fy(y);
    return fxv >= 0.0 && fyv >= 0.0 && fxv <= nx_ - 1 && fyv <= ny_ - 1;
}

GridIndex LiftedGrid::index_of(const LiftedPoint& p) const {
    const long ix = std::lround(fx(p.x));
    const long iy = std::lround(fy(p.y));
    if (ix < 0 || iy < 0 || ix >= nx_ || iy >= ny_ || !std::isfinite(p.x) || !std::isfinite(p.y)) {
        std::ostringstream msg;
        msg << "point (" << p.x << ", " << p.y << ") lies outside the grid";
        throw ValidationError(msg.str());
    }
    const long it = std::lround(ftheta(p.theta));
    return {static_cast<int>(ix), static_cast<int>(iy), wrap_theta(static_cast<int>(it))};
}

std::optional<GridIndex> LiftedGrid::shift(const GridIndex& idx, const IVec3& offset) const {
    const int ix = idx.ix - offset[0];
    const int iy = idx.iy - offset[1];
    if (ix < 0 || iy < 0 || ix >= nx_ || iy >= ny_) return std::nullopt;
    return GridIndex{ix, iy, wrap_theta(idx.itheta - offset[2])};
}

LiftedGrid make_grid(int nx, int ny, int n_theta, double h_x) {
    return LiftedGrid(nx, ny, n_theta, h_x);
}

ScalarField::ScalarField(LiftedGrid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_.size()) {
        throw ValidationError("scalar field value count does not match its grid");
    }
}

double ScalarField::max_value() const {
    return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

double ScalarField::min_value() const {
    return values_.empty() ? 0.0 : *std::min_element(values_.begin(), values_.end());
}

Field2D::Field2D(int nx, int ny, std::vector<double> values)
    : nx_(nx), ny_(ny), values_(std::move(values)) {
    if (nx < 0 || ny < 0 || values_.size() != static_cast<std::size_t>(nx) * ny) {
        throw ValidationError("2-D field value count does not match its dimensions");
    }
}

}  // namespace cpgeo
