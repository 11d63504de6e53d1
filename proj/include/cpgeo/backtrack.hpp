#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cpgeo/fmm_solver.hpp"
#include "cpgeo/lifted_grid.hpp"

namespace cpgeo {

/// Minimal path ordered from the source side to the target.
struct GeodesicPath {
    std::vector<LiftedPoint> samples;
    std::vector<double> u;      // uniform parameter in [0, 1]
    std::vector<double> kappa;  // curvature per sample, 1 / physical length
    double distance = 0.0;      // distance value at the target

    std::vector<Point2> physical() const;
    std::size_t size() const { return samples.size(); }
};

struct BacktrackOptions {
    double step = 0.0;         // physical step, 0 means h_x / 2
    double stop_radius = 2.0;  // index-space distance to a seed
    long max_iterations = 0;   // 0 means 50 (nx + ny + n_theta)
    int curvature_window = 1;
    int L = kDefaultQuadratureOrder;
    double eps = kDefaultRelaxation;
};

/// Descends the distance map from `start` to the seed set along the flow of
/// the discrete Hamiltonian, sum_k w_k (u(x) - u(x - e_k))_+ e_k, interpolated
/// trilinearly between nodes. Throws SolverError on stagnation or when the
/// iteration cap is reached.
GeodesicPath backtrack(const ScalarField& distance, const ScalarField& omega, double beta,
                       const LiftedPoint& start, const SeedSet& seeds,
                       const BacktrackOptions& options = {});

/// Classical model (omega = 0).
GeodesicPath backtrack(const ScalarField& distance, double beta, const LiftedPoint& start,
                       const SeedSet& seeds, const BacktrackOptions& options = {});

/// Curvature as the derivative of the unwrapped orientation with respect to
/// arc length, centered over +-window samples and one-sided at the ends.
/// Samples with no spatial motion around them get interpolated values.
std::vector<double> estimate_curvature(const std::vector<LiftedPoint>& samples, int window = 1);

/// Path document: {"grid": {...}, "beta": b, "samples": [{"u","x","y","theta","kappa"}],
/// "distance": d}, plus optional source/target records.
std::string path_to_json(const GeodesicPath& path, const LiftedGrid& grid, double beta,
                         const std::optional<LiftedPoint>& source = std::nullopt,
                         const std::optional<LiftedPoint>& target = std::nullopt);

}  // namespace cpgeo
