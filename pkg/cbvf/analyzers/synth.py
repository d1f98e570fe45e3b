"""Building new barrier functions: pointwise maxima, sequence limits and horizon limits."""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from cbvf.analyzers.verify import (
    DEFAULT_MARGIN_BAND,
    default_invariance_tolerance,
    verify_viscosity_cbf,
)
from cbvf.core.classk import ClassKSpec
from cbvf.core.grid import ScalarField, require_same_grid, sup_distance
from cbvf.core.report import Report, Witness
from cbvf.solver.marching import LevelSetMarcher, SolverParams, uniform_horizons
from cbvf.systems.base import System

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConvergenceParams:
    """When to stop marching towards T = ∞.

    Converged once the field moved by at most ``tol`` (sup norm, away from
    the boundary band) across the last ``window`` checkpoints spaced
    ``spacing`` apart. ``tol=None`` uses the time-invariance tolerance of g.
    """

    window: int = 5
    spacing: float = 0.25
    tol: Optional[float] = None
    max_T: float = 10.0

    def __post_init__(self) -> None:
        if self.window < 1:
            raise ValueError(f"window must be positive, got {self.window}")
        if not self.spacing > 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if self.tol is not None and self.tol < 0:
            raise ValueError(f"tol must be nonnegative, got {self.tol}")
        if not self.max_T > 0:
            raise ValueError(f"max_T must be positive, got {self.max_T}")

    @property
    def window_horizon(self) -> float:
        return self.window * self.spacing


@dataclass
class LimitResult:
    """Outcome of :func:`limit_cbvf`."""

    field: ScalarField
    converged: bool
    T_converge: Optional[float]
    T_reached: float
    history: list[tuple[float, float]] = field(default_factory=list)
    report: Optional[Report] = None
    fixed_point_residual: Optional[float] = None
    tol: float = 0.0

    def history_frame(self) -> pd.DataFrame:
        """Columns ``T, sup_change`` (change since the previous checkpoint)."""
        return pd.DataFrame(self.history, columns=["T", "sup_change"])


def pointwise_max(h1: ScalarField, h2: ScalarField) -> ScalarField:
    """Node-wise max{h1, h2}.

    Raises:
        ShapeMismatchError: if the fields live on different grids
    """
    require_same_grid(h1, h2)
    return ScalarField(
        h1.grid, np.maximum(h1.values, h2.values), f"max({h1.label or 'h1'},{h2.label or 'h2'})"
    )


def fixed_point_residual(
    system: System,
    alpha: ClassKSpec,
    h: ScalarField,
    horizon: float,
    params: Optional[SolverParams] = None,
    margin_band: int = DEFAULT_MARGIN_BAND,
) -> float:
    """sup |v(·, horizon) − h| away from the boundary band, with v started from h."""
    marcher = LevelSetMarcher(system, h, alpha, params)
    moved = marcher.advance(horizon)
    return sup_distance(moved, h, h.grid.interior_mask(margin_band))


def limit_cbvf(
    system: System,
    alpha: ClassKSpec,
    g: ScalarField,
    solver_params: Optional[SolverParams] = None,
    convergence: Optional[ConvergenceParams] = None,
    margin_band: int = DEFAULT_MARGIN_BAND,
) -> LimitResult:
    """March the value function towards T = ∞ and verify the limit.

    On convergence the limit is checked twice: it must pass
    :func:`verify_viscosity_cbf` at ``tol`` and move by at most ``2·tol``
    when marched again for one window. Without convergence by ``max_T`` the
    result carries an inconclusive report and the change history.

    Raises:
        NegativeObstacleError: if g has negative values
    """
    solver_params = solver_params or SolverParams()
    convergence = convergence or ConvergenceParams()
    tol = default_invariance_tolerance(g) if convergence.tol is None else convergence.tol
    mask = g.grid.interior_mask(margin_band)

    marcher = LevelSetMarcher(system, g, alpha, solver_params)
    horizons = uniform_horizons(convergence.max_T, convergence.spacing)
    fields = [g]
    history: list[tuple[float, float]] = []
    converged_at: Optional[float] = None
    for horizon in horizons[1:]:
        current = marcher.advance(horizon)
        history.append((horizon, sup_distance(current, fields[-1], mask)))
        fields.append(current)
        if len(fields) > convergence.window:
            anchor = fields[-1 - convergence.window]
            if sup_distance(current, anchor, mask) <= tol:
                converged_at = horizons[len(fields) - 1 - convergence.window]
                break

    final = fields[-1]
    reached = marcher.time
    final = final.with_values(final.values, f"limit({g.label or 'g'})")
    if converged_at is None:
        logger.warning("No convergence by T=%g (last change %.3g)", reached, history[-1][1])
        report = Report(
            verdict="inconclusive",
            max_violation=history[-1][1] if history else 0.0,
            tolerances={"tol": tol},
            label="limit synthesis",
            notes=[f"no convergence by T={reached:g}; see the change history"],
        )
        return LimitResult(final, False, None, reached, history, report, None, tol)

    logger.info("Converged from T=%g (marched to T=%g)", converged_at, reached)
    recheck = solver_params.with_horizons(
        uniform_horizons(convergence.window_horizon, convergence.spacing)
    )
    verdict = verify_viscosity_cbf(system, alpha, final, recheck, tol, margin_band)
    residual = fixed_point_residual(
        system, alpha, final, convergence.window_horizon, solver_params, margin_band
    )
    fixed = Report(
        verdict="pass" if residual <= 2 * tol else "fail",
        max_violation=residual,
        witnesses=[] if residual <= 2 * tol else [_residual_witness(final, residual)],
        tolerances={"tol": 2 * tol},
        label="fixed point",
    )
    report = Report.combine("limit synthesis", [verdict, fixed])
    return LimitResult(final, True, converged_at, reached, history, report, residual, tol)


def _residual_witness(h: ScalarField, residual: float) -> Witness:
    # Location is not tracked by the residual; report the field's peak.
    node = int(np.argmax(h.flat))
    return Witness.at(h.grid.states()[node], 0.0, residual, 0.0)


def sequence_limit_check(
    fields: list[ScalarField],
    system: System,
    alpha: ClassKSpec,
    solver_params: Optional[SolverParams] = None,
    tol: Optional[float] = None,
    margin_band: int = DEFAULT_MARGIN_BAND,
) -> Report:
    """Check that a sequence of fields settles and that its last member is a viscosity CBF.

    The sequence counts as Cauchy when every field in its trailing half lies
    within ``tol`` (sup norm) of the last field.
    """
    if len(fields) < 2:
        raise ValueError(f"need at least two fields, got {len(fields)}")
    for f in fields[1:]:
        require_same_grid(fields[0], f)

    last = fields[-1]
    tol = default_invariance_tolerance(last) if tol is None else float(tol)
    tail = fields[min(len(fields) // 2, len(fields) - 2) : -1]
    distances = [sup_distance(last, f) for f in tail]
    worst = max(distances)
    witnesses = []
    if worst > tol:
        culprit = tail[int(np.argmax(distances))]
        node = int(np.argmax(np.abs(last.flat - culprit.flat)))
        state = last.grid.states()[node]
        witnesses.append(
            Witness.at(state, 0.0, float(culprit.flat[node]), float(last.flat[node]))
        )
    cauchy = Report(
        verdict="fail" if worst > tol else "pass",
        max_violation=worst,
        witnesses=witnesses,
        tolerances={"tol": tol},
        label="Cauchy tail",
        checked=len(tail),
    )
    if not cauchy.passed:
        return Report.combine("sequence limit", [cauchy])
    limit = verify_viscosity_cbf(system, alpha, last, solver_params, tol, margin_band)
    return Report.combine("sequence limit", [cauchy, limit])
