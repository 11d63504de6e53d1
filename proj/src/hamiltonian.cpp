#include "cpgeo/hamiltonian.hpp"

#include <cmath>
#include <limits>

#include "cpgeo/errors.hpp"

namespace cpgeo {

namespace {

constexpr double kAlignmentTolerance = 1e-9;

// a + sqrt(a^2 + b^2) without cancellation for a < 0.
double upper_root(double a, double b, double r) {
    if (a >= 0.0) return a + r;
    if (r == 0.0) return 0.0;
    return b * b / (r - a);
}

}  // namespace

double metric_value(const ModelParams& params, double theta, const Vec3& xdot) {
    const double speed = std::hypot(xdot[0], xdot[1]);
    if (speed == 0.0) {
        return xdot[2] == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    const double along = xdot[0] * std::cos(theta) + xdot[1] * std::sin(theta);
    if (along < (1.0 - kAlignmentTolerance) * speed) {
        return std::numeric_limits<double>::infinity();
    }
    const double dev = xdot[2] - params.omega * speed;
    return speed + params.beta * params.beta * dev * dev / speed;
}

double hamiltonian_closed(const ModelParams& params, double theta, const Covector& xhat) {
    const double a = xhat.hx * std::cos(theta) + xhat.hy * std::sin(theta) + params.omega * xhat.htheta;
    const double b = xhat.htheta / params.beta;
    const double r = std::hypot(a, b);
    const double s = upper_root(a, b, r);
    return 0.125 * s * s;
}

std::vector<double> fejer_weights(int L) {
    if (L < 1) throw ValidationError("quadrature order L must be at least 1");
    std::vector<double> w(static_cast<std::size_t>(L));
    for (int l = 1; l <= L; ++l) {
        const double t = (2.0 * l - 1.0) * kPi / (2.0 * L);
        double acc = 0.0;
        for (int j = 1; j <= L / 2; ++j) {
            acc += std::cos(2.0 * j * t) / (4.0 * j * j - 1.0);
        }
        w[static_cast<std::size_t>(l - 1)] = 2.0 / L * (1.0 - 2.0 * acc);
    }
    return w;
}

std::vector<ControlSample> control_samples(const ModelParams& params, double theta, int L) {
    // Fejer's rule lives on x = sin(phi) in [-1, 1], where the cos(phi) density
    // of the integral disappears; mu_l carries the 3/8 prefactor.
    const std::vector<double> w = fejer_weights(L);
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    std::vector<ControlSample> out;
    out.reserve(w.size());
    for (int l = 1; l <= L; ++l) {
        const double phi = (2.0 * l - 1.0 - L) * kPi / (2.0 * L);
        const double cp = std::cos(phi);
        const double sp = std::sin(phi);
        ControlSample q;
        q.direction = {c * cp, s * cp, params.omega * cp + sp / params.beta};
        q.weight = 0.375 * w[static_cast<std::size_t>(l - 1)];
        out.push_back(q);
    }
    return out;
}

double hamiltonian_quadrature(const ModelParams& params, double theta, const Covector& xhat,
                              int L) {
    double acc = 0.0;
    for (const ControlSample& q : control_samples(params, theta, L)) {
        const double p = dot(xhat, q.direction);
        if (p > 0.0) acc += q.weight * p * p;
    }
    return acc;
}

Covector transform_covector(const ModelParams& params, double theta, const Covector& xhat) {
    const double k = params.omega * xhat.htheta;
    return {xhat.hx + k * std::cos(theta), xhat.hy + k * std::sin(theta), xhat.htheta};
}

Vec3 hamiltonian_gradient(const ModelParams& params, double theta, const Covector& xhat) {
    const double c = std::cos(theta);
    const double sn = std::sin(theta);
    const double a = xhat.hx * c + xhat.hy * sn + params.omega * xhat.htheta;
    const double b = xhat.htheta / params.beta;
    const double r = std::hypot(a, b);
    if (r == 0.0) return {0.0, 0.0, 0.0};
    const double s = upper_root(a, b, r);
    if (s == 0.0) return {0.0, 0.0, 0.0};
    // H = s^2/8, dH/da = s^2/(4r), dH/db = s b/(4r).
    const double da = s * s / (4.0 * r);
    const double db = s * b / (4.0 * r);
    return {da * c, da * sn, da * params.omega + db / params.beta};
}

}  // namespace cpgeo
