"""Lowest-order divergence-free virtual elements for the Stokes eigenproblem.

The package assembles the saddle-point pencil on general polygonal meshes,
solves for the lowest eigenpairs, evaluates a residual error estimator and
drives adaptive refinement.
"""

from .adapt import AdaptHistory, ConvergenceFit, adaptive_loop, fit_order, mark
from .estimator import IndicatorField, effectivity, global_estimate
from .polymesh import PolyMesh, generate, quality, refine
from .system import Config, EigenSolution, SaddleSystem, assemble, solve_eigs

__version__ = "0.1.0"

__all__ = [
    "AdaptHistory", "Config", "ConvergenceFit", "EigenSolution", "IndicatorField", "PolyMesh",
    "SaddleSystem", "adaptive_loop", "assemble", "effectivity", "fit_order", "generate",
    "global_estimate", "mark", "quality", "refine", "solve_eigs",
]
