"""Curvature-prior elastica geodesics for tracking curvilinear structures."""

from ._cpgeo import (
    Config,
    IoError,
    SolverError,
    ValidationError,
    cost,
    hamiltonian,
    hamiltonian_quadrature,
    jaccard,
    noise_levels,
    prior,
    solve,
    synth_benchmark,
    track,
)

__all__ = [
    "Config",
    "IoError",
    "SolverError",
    "ValidationError",
    "cost",
    "hamiltonian",
    "hamiltonian_quadrature",
    "jaccard",
    "noise_levels",
    "prior",
    "solve",
    "synth_benchmark",
    "track",
]
