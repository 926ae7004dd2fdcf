"""Numerical lab for two-phase quenching-type problems driven by the p-Laplacian."""

from .core import Grid, ScalarField
from .params import ProblemParams
from .solver import SolveConfig, SolveReport, solve

__version__ = "0.1.0"

__all__ = ["Grid", "ScalarField", "ProblemParams", "SolveConfig", "SolveReport", "solve", "__version__"]
