#pragma once

#include <array>
#include <vector>

#include "cpgeo/lifted_grid.hpp"

namespace cpgeo {

inline const std::vector<double> kDefaultScales{1.5, 2.5, 3.5};

/// Sampled Gaussian derivative of the given order (0, 1 or 2) at standard
/// deviation sigma, truncated at 4 sigma. Order 0 sums to one.
std::vector<double> gaussian_kernel(double sigma, int order);

/// Separable Gaussian smoothing with mirrored borders.
Field2D gaussian_blur(const Field2D& image, double sigma);

/// Scale-normalized Hessian sigma^2 (Ixx, Ixy, Iyy) by separable convolution
/// with mirrored borders. Pixel units.
std::array<Field2D, 3> hessian(const Field2D& image, double sigma);

/// Orientation score g(x, theta) = max over scales of
/// max(0, -d^T H_sigma d) with d = (-sin theta, cos theta), the direction
/// across a structure running along theta. Bright curvilinear structures on a
/// dark background respond. The grid must match the image size.
ScalarField orientation_score(const Field2D& image, const LiftedGrid& grid,
                              const std::vector<double>& scales = kDefaultScales);

/// psi = exp(-alpha g / max g), or 1 everywhere when g vanishes.
ScalarField cost_from_score(const ScalarField& score, double alpha);

}  // namespace cpgeo
