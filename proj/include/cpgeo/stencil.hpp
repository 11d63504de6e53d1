#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <vector>

#include "cpgeo/hamiltonian.hpp"
#include "cpgeo/lifted_grid.hpp"

namespace cpgeo {

using Mat3 = std::array<std::array<double, 3>, 3>;

struct WeightedOffset {
    double weight = 0.0;
    IVec3 offset{};
};

/// Six nonnegative weights on integer offsets with sum_k w_k e_k e_k^T = D.
struct SellingDecomposition {
    std::array<WeightedOffset, 6> pairs{};
    int iterations = 0;
};

/// Selling's decomposition of a symmetric positive definite 3x3 matrix,
/// computed by superbase flipping from the canonical superbase.
///
/// Throws ValidationError when D is not symmetric positive definite and
/// SolverError when the flipping iteration does not settle.
SellingDecomposition selling_3d(const Mat3& D);

/// v v^T + eps^2 (|v|^2 I - v v^T).
Mat3 relaxed_tensor(const Vec3& v, double eps);

/// Selling decomposition of relaxed_tensor(v, eps) with every offset oriented
/// so that <e, v> >= 0. An offset orthogonal to v carries no upwind side; its
/// weight is split evenly between e and -e.
std::vector<WeightedOffset> directional_decomposition(const Vec3& v, double eps);

inline constexpr int kDefaultQuadratureOrder = 5;
inline constexpr double kDefaultRelaxation = 0.1;

/// Neighborhood of one lifted grid node: offsets in index space and weights
/// such that sum_k w_k ((u(x) - u(x - e_k))_+)^2 approximates the Hamiltonian
/// at du (with unit grid steps).
struct Stencil {
    std::vector<WeightedOffset> entries;
    int raw_count = 0;  // Selling pairs before merging, L * 6
};

Stencil build_stencil(const ModelParams& params, const LiftedGrid& grid, double theta,
                      int L = kDefaultQuadratureOrder, double eps = kDefaultRelaxation);

/// sum_k w_k <xi, e_k>_+^2 for an index-space covector xi.
double stencil_form(const Stencil& stencil, const Vec3& xi);

/// One "weight ex ey etheta" line per entry.
std::string dump_stencil(const Stencil& stencil);

/// Stencils keyed by angular index and bucketed omega. Readers may run
/// concurrently with insertion.
class StencilCache {
public:
    static constexpr double kOmegaBucket = 1e-4;

    StencilCache(LiftedGrid grid, double beta, int L = kDefaultQuadratureOrder,
                 double eps = kDefaultRelaxation);

    /// Omega value the stencil is actually built with.
    static double quantize(double omega);
    static std::int64_t bucket(double omega);

    const Stencil& get(int itheta, double omega);
    std::size_t size() const;

    const LiftedGrid& grid() const { return grid_; }
    double beta() const { return beta_; }
    int order() const { return L_; }
    double relaxation() const { return eps_; }

private:
    LiftedGrid grid_;
    double beta_;
    int L_;
    double eps_;
    mutable std::shared_mutex mutex_;
    std::map<std::pair<int, std::int64_t>, std::unique_ptr<Stencil>> stencils_;
};

}  // namespace cpgeo
