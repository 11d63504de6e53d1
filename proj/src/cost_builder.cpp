#include "cpgeo/cost_builder.hpp"

#include <algorithm>
#include <cmath>

#include "cpgeo/errors.hpp"

namespace cpgeo {

namespace {

// reflect about the border pixels: -1 -> 1, n -> n - 2
int mirror(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

Field2D convolve_x(const Field2D& in, const std::vector<double>& k) {
    const int r = static_cast<int>(k.size() / 2);
    Field2D out(in.nx(), in.ny());
    for (int y = 0; y < in.ny(); ++y) {
        for (int x = 0; x < in.nx(); ++x) {
            double acc = 0.0;
            for (int j = -r; j <= r; ++j) acc += k[static_cast<std::size_t>(j + r)] * in(mirror(x - j, in.nx()), y);
            out(x, y) = acc;
        }
    }
    return out;
}

Field2D convolve_y(const Field2D& in, const std::vector<double>& k) {
    const int r = static_cast<int>(k.size() / 2);
    Field2D out(in.nx(), in.ny());
    for (int y = 0; y < in.ny(); ++y) {
        for (int x = 0; x < in.nx(); ++x) {
            double acc = 0.0;
            for (int j = -r; j <= r; ++j) acc += k[static_cast<std::size_t>(j + r)] * in(x, mirror(y - j, in.ny()));
            out(x, y) = acc;
        }
    }
    return out;
}

}  // namespace

std::vector<double> gaussian_kernel(double sigma, int order) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("scale must be positive");
    if (order < 0 || order > 2) throw ValidationError("derivative order must be 0, 1 or 2");
    const int r = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
    std::vector<double> g(static_cast<std::size_t>(2 * r + 1));
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        const double v = std::exp(-0.5 * i * i / (sigma * sigma));
        g[static_cast<std::size_t>(i + r)] = v;
        sum += v;
    }
    for (double& v : g) v /= sum;
    if (order == 0) return g;
    const double s2 = sigma * sigma;
    std::vector<double> d(g.size());
    for (int i = -r; i <= r; ++i) {
        const double v = g[static_cast<std::size_t>(i + r)];
        d[static_cast<std::size_t>(i + r)] = order == 1 ? -i / s2 * v : (i * i - s2) / (s2 * s2) * v;
    }
    if (order == 2) {
        // truncation leaves a small DC term; a constant image must give zero
        double dc = 0.0;
        for (double v : d) dc += v;
        for (std::size_t i = 0; i < d.size(); ++i) d[i] -= dc * g[i];
    }
    return d;
}

Field2D gaussian_blur(const Field2D& image, double sigma) {
    if (image.empty()) throw ValidationError("image is empty");
    const auto g0 = gaussian_kernel(sigma, 0);
    return convolve_y(convolve_x(image, g0), g0);
}

std::array<Field2D, 3> hessian(const Field2D& image, double sigma) {
    if (image.empty()) throw ValidationError("image is empty");
    const auto g0 = gaussian_kernel(sigma, 0);
    const auto g1 = gaussian_kernel(sigma, 1);
    const auto g2 = gaussian_kernel(sigma, 2);
    const double s2 = sigma * sigma;
    std::array<Field2D, 3> h{convolve_y(convolve_x(image, g2), g0), convolve_y(convolve_x(image, g1), g1),
                             convolve_y(convolve_x(image, g0), g2)};
    for (Field2D& f : h) {
        for (double& v : f.values()) v *= s2;
    }
    return h;
}

ScalarField orientation_score(const Field2D& image, const LiftedGrid& grid, const std::vector<double>& scales) {
    if (scales.empty()) throw ValidationError("scale list is empty");
    if (image.nx() != grid.nx() || image.ny() != grid.ny()) {
        throw ValidationError("image size does not match the lifted grid");
    }
    for (double v : image.values()) {
        if (!std::isfinite(v)) throw ValidationError("image holds non-finite values");
    }
    const int nt = grid.n_theta();
    // quadratic form on d = (-sin, cos): s^2 Hxx - 2 s c Hxy + c^2 Hyy
    std::vector<double> a(static_cast<std::size_t>(nt)), b(static_cast<std::size_t>(nt)), c(static_cast<std::size_t>(nt));
    for (int k = 0; k < nt; ++k) {
        const double s = std::sin(grid.theta_of(k)), co = std::cos(grid.theta_of(k));
        a[static_cast<std::size_t>(k)] = s * s;
        b[static_cast<std::size_t>(k)] = -2.0 * s * co;
        c[static_cast<std::size_t>(k)] = co * co;
    }
    ScalarField g(grid, 0.0);
    for (double sigma : scales) {
        const auto h = hessian(image, sigma);
        for (int y = 0; y < grid.ny(); ++y) {
            for (int x = 0; x < grid.nx(); ++x) {
                const double hxx = h[0](x, y), hxy = h[1](x, y), hyy = h[2](x, y);
                const std::size_t base = grid.linear({x, y, 0});
                for (int k = 0; k < nt; ++k) {
                    const auto kk = static_cast<std::size_t>(k);
                    const double r = -(a[kk] * hxx + b[kk] * hxy + c[kk] * hyy);
                    if (r > g[base + kk]) g[base + kk] = r;
                }
            }
        }
    }
    return g;
}

ScalarField cost_from_score(const ScalarField& score, double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ValidationError("alpha must be positive");
    double gmax = 0.0;
    for (double v : score.values()) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("orientation score must be finite and nonnegative");
        gmax = std::max(gmax, v);
    }
    ScalarField psi(score.grid(), 1.0);
    if (gmax == 0.0) return psi;
    for (std::size_t k = 0; k < score.size(); ++k) psi[k] = std::exp(-alpha * (score[k] / gmax));
    return psi;
}

}  // namespace cpgeo
