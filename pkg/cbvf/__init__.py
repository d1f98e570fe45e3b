"""
cbvf - Control barrier value functions.

A Python package for computing anti-discounted Hamilton-Jacobi value
functions on grids, deciding whether a function is a viscosity control
barrier function, and synthesizing new ones.
"""

from cbvf.analyzers.synth import limit_cbvf, pointwise_max
from cbvf.analyzers.verify import check_barrier_guarantee, verify_viscosity_cbf
from cbvf.core.classk import ClassKSpec
from cbvf.core.grid import Grid, ScalarField, discretize
from cbvf.core.report import Report
from cbvf.solver.marching import SolverParams, solve_avoid, solve_cbvf
from cbvf.systems.base import builtin_system

__version__ = "0.1.0"
__all__ = [
    "solve_cbvf",
    "solve_avoid",
    "verify_viscosity_cbf",
    "check_barrier_guarantee",
    "pointwise_max",
    "limit_cbvf",
    "builtin_system",
    "ClassKSpec",
    "Grid",
    "ScalarField",
    "SolverParams",
    "Report",
    "discretize",
    "__version__",
]
