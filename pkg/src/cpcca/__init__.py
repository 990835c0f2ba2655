"""PCCA+ coarse-graining of non-reversible Markov chains, including chains
whose dominant eigenvalues are complex.

Typical use::

    from cpcca import fixture, cluster
    result = cluster(fixture("example1"), n_clusters=3, mode="real")
    result.coarse_matrix
"""
__version__ = "0.1.0"

from .errors import CpccaError
from .matrix import (CircularSpec, StochasticMatrix, fixture, generate_circular,
                     generate_nearly_uncoupled, row_normalize, validate)
from .io import load_matrix, save_matrix
from .spectral import (EigenSelection, SpectralBasis, circular_check, dominant_eigenpairs,
                       orthonormalize, realify, spectral_basis, subspace_residual)
from .pcca import (ClusteringResult, cluster, coarse_grain, feasibilize,
                   inner_simplex_guess, min_chi, objective, optimize,
                   select_n_clusters)
from .bench import BenchPlan, compare_coarse, fit_quadratic, run_bench

__all__ = [
    "CpccaError",
    "CircularSpec", "StochasticMatrix", "fixture", "generate_circular",
    "generate_nearly_uncoupled", "row_normalize", "validate",
    "load_matrix", "save_matrix",
    "EigenSelection", "SpectralBasis", "circular_check", "dominant_eigenpairs",
    "orthonormalize", "realify", "spectral_basis", "subspace_residual",
    "ClusteringResult", "cluster", "coarse_grain", "feasibilize", "inner_simplex_guess",
    "min_chi", "objective", "optimize", "select_n_clusters",
    "BenchPlan", "compare_coarse", "fit_quadratic", "run_bench",
]
