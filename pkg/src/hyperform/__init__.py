"""Finite-mesh tools for comparing Markov chains on unions of unit cubes.

Modules: :mod:`chain_core` (finite chains), :mod:`grid` (mesh
discretization), :mod:`paths` (path families and congestion),
:mod:`spectral` (gaps and bounds), :mod:`benchmarks` (barbell instances),
:mod:`convergence` (refinement studies) and :mod:`cli`.
"""
from .chain_core import (FiniteChain, dirichlet_form, flow_matrix, load_chain, make_chain,
                         save_chain, total_variation, validate_chain, variance)
from .grid import (DensityKernel, MeshPartition, Point, ProductSpace, build_partition,
                   discretize_kernel, discretize_measure, histogram_density, reversibilize)
from .paths import (AssumptionConfig, Path, PathFamily, congestion_constant_general,
                    congestion_ratio_finite, distance_W, lift_path_family, validate_assumptions)
from .spectral import comparison_bound, rayleigh_quotient, spectral_gap

__version__ = "0.1.0"

__all__ = [
    "FiniteChain", "make_chain", "validate_chain", "flow_matrix", "dirichlet_form", "variance",
    "total_variation", "load_chain", "save_chain",
    "ProductSpace", "Point", "MeshPartition", "DensityKernel", "build_partition",
    "discretize_kernel", "discretize_measure", "reversibilize", "histogram_density",
    "Path", "PathFamily", "AssumptionConfig", "distance_W", "congestion_ratio_finite",
    "congestion_constant_general", "lift_path_family", "validate_assumptions",
    "spectral_gap", "rayleigh_quotient", "comparison_bound",
]
