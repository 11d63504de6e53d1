#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cpgeo/lifted_grid.hpp"
#include "cpgeo/stencil.hpp"

namespace cpgeo {

struct Seed {
    GridIndex index;
    double value = 0.0;
};

using SeedSet = std::vector<Seed>;

struct SolverOptions {
    int L = kDefaultQuadratureOrder;
    double eps = kDefaultRelaxation;
    bool check_residual = true;
};

struct SolveCounters {
    std::uint64_t heap_pushes = 0;
    std::uint64_t heap_pops = 0;
    std::uint64_t heap_decreases = 0;
    std::uint64_t heap_comparisons = 0;
    std::uint64_t local_updates = 0;
    std::uint64_t monotonicity_violations = 0;
    std::size_t stencils_built = 0;
};

struct SolveReport {
    std::size_t accepted_count = 0;
    std::optional<GridIndex> reached_target;
    std::optional<double> target_value;
    double wall_time = 0.0;
    // max over accepted non-seed nodes of |lhs - rhs| / max(1, rhs); NaN when not checked
    double max_residual = 0.0;
    SolveCounters counters;

    std::string to_text() const;
};

struct SolveResult {
    ScalarField distance;
    SolveReport report;
};

/// Solves sum_k w_k ((u - v_k)_+)^2 = rhs for u, where v_k is the value at
/// the neighbor reached by entry k (+inf when absent). Throws SolverError when
/// no neighbor is finite.
double local_update(const Stencil& stencil, const std::vector<double>& neighbor_values, double rhs);

/// Single-pass generalized fast marching for
///   sum_k w_k(x) ((u(x) - u(x - e_k))_+)^2 = psi(x)^2 / 2
/// with stencils of the curvature-prior model built from (beta, omega(x)).
/// When targets are given the march stops as soon as one is accepted; nodes
/// never accepted hold +inf.
SolveResult solve(const LiftedGrid& grid, const ScalarField& psi, const ScalarField& omega,
                  double beta, const SeedSet& seeds,
                  const std::optional<std::vector<GridIndex>>& targets = std::nullopt,
                  const SolverOptions& options = {});

/// Classical elastica model (omega = 0 everywhere).
SolveResult solve(const LiftedGrid& grid, const ScalarField& psi, double beta, const SeedSet& seeds,
                  const std::optional<std::vector<GridIndex>>& targets = std::nullopt,
                  const SolverOptions& options = {});

struct BidirectionalResult {
    ScalarField distance;
    GridIndex target;
    SeedSet seeds;
    SolveReport report;
};

/// Seeds at (s, theta_s) and (s, theta_s + pi), targets at (y, theta_y) and
/// (y, theta_y + pi); the march stops at whichever target comes first. Throws
/// SolverError when no target is reachable.
BidirectionalResult solve_bidirectional(const LiftedGrid& grid, const ScalarField& psi,
                                        const ScalarField& omega, double beta, const LiftedPoint& s,
                                        const LiftedPoint& y, const SolverOptions& options = {});

/// max over accepted non-seed nodes of the scaled residual of the discrete
/// equation evaluated on the final field.
double discrete_residual(const ScalarField& distance, const ScalarField& psi,
                         const ScalarField& omega, double beta, const SeedSet& seeds,
                         const SolverOptions& options = {});

}  // namespace cpgeo
