"""Core module - class-K functions, grids, reports and errors."""

from cbvf.core.classk import (
    ClassKSpec,
    KLFlow,
    alpha_eval,
    alpha_slope_bound,
    beta_comparison_bound,
    beta_eval,
    bundled_alphas,
    escape_time,
    kappa_eval,
)
from cbvf.core.grid import (
    Grid,
    ScalarField,
    ValueSeries,
    central_gradient,
    discretize,
    interpolate,
    lipschitz_estimate,
    sup_distance,
    upwind_gradients,
)
from cbvf.core.report import Report, Witness

__all__ = [
    # Class-K
    "ClassKSpec",
    "KLFlow",
    "alpha_eval",
    "beta_eval",
    "kappa_eval",
    "escape_time",
    "beta_comparison_bound",
    "alpha_slope_bound",
    "bundled_alphas",
    # Grid
    "Grid",
    "ScalarField",
    "ValueSeries",
    "upwind_gradients",
    "central_gradient",
    "interpolate",
    "discretize",
    "lipschitz_estimate",
    "sup_distance",
    # Reports
    "Report",
    "Witness",
]
