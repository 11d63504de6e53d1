#pragma once

#include <vector>

#include "cpgeo/lifted_grid.hpp"

namespace cpgeo {

// Co-vector on the lifted tangent space: spatial part (hx, hy) per unit
// length, angular part per radian.
struct Covector {
    double hx = 0.0;
    double hy = 0.0;
    double htheta = 0.0;
};

/// Pointwise model parameters. `omega` is the local curvature prior; omega = 0
/// recovers the classical elastica model.
struct ModelParams {
    double beta = 1.0;
    double omega = 0.0;
};

struct ControlSample {
    Vec3 direction{};
    double weight = 0.0;
};

inline double dot(const Covector& c, const Vec3& v) {
    return c.hx * v[0] + c.hy * v[1] + c.htheta * v[2];
}

/// Metric of the curvature-prior model at a point with orientation `theta`:
/// |x'| + beta^2 (theta' - omega |x'|)^2 / |x'| when the spatial velocity
/// points along (cos theta, sin theta), +inf otherwise, 0 at the origin.
double metric_value(const ModelParams& params, double theta, const Vec3& xdot);

/// Closed form 1/8 (a + sqrt(a^2 + (htheta/beta)^2))^2 with
/// a = <xhat, (cos theta, sin theta, omega)>.
double hamiltonian_closed(const ModelParams& params, double theta, const Covector& xhat);

/// L-point Fejer quadrature of the integral form of the Hamiltonian:
/// sum_l mu_l <xhat, q(phi_l)>_+^2.
double hamiltonian_quadrature(const ModelParams& params, double theta, const Covector& xhat,
                              int L);

/// Quadrature directions q(phi_l) = (n(theta) cos phi, omega cos phi + sin phi / beta)
/// at phi_l = (2l - 1 - L) pi / (2L), with their weights mu_l.
std::vector<ControlSample> control_samples(const ModelParams& params, double theta, int L);

/// Weights of Fejer's first rule on [-1, 1] at the nodes sin(phi_l), l = 1..L
/// (ascending). They sum to 2.
std::vector<double> fejer_weights(int L);

/// Inverse-transpose of the shear linking the prior model to the classical one:
/// (hx, hy, htheta) -> (hx + omega htheta cos theta, hy + omega htheta sin theta, htheta).
/// hamiltonian_closed(params, theta, xhat) equals the classical Hamiltonian
/// (omega = 0) evaluated at the transformed co-vector.
Covector transform_covector(const ModelParams& params, double theta, const Covector& xhat);

/// Gradient of hamiltonian_closed with respect to the co-vector. Zero on the
/// slice where the Hamiltonian vanishes identically.
Vec3 hamiltonian_gradient(const ModelParams& params, double theta, const Covector& xhat);

}  // namespace cpgeo
