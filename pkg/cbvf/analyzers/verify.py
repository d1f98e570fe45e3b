"""Numerical decisions about barrier functions.

A continuous h is treated as a viscosity control barrier function exactly
when the control barrier value function started from max(0, h) does not move
with the horizon. That equivalence also ties in the Barrier Guarantee, which
is checked directly by closed-loop rollouts.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Literal, Optional

import numpy as np

from cbvf.analyzers.controller import (
    DEFAULT_ROLLOUT_STEP,
    GradientMode,
    GreedyController,
    SampleHoldController,
    ThetaLog,
    sample_hold_rollout,
)
from cbvf.core.classk import ClassKSpec, beta_eval
from cbvf.core.errors import CBVFError, ShapeMismatchError
from cbvf.core.grid import ScalarField, ValueSeries, interpolate, lipschitz_estimate
from cbvf.core.report import MAX_WITNESSES, Report, Witness, worst_witnesses
from cbvf.solver.hamiltonian import ham_max
from cbvf.solver.marching import SolverParams, solve_avoid, solve_cbvf
from cbvf.systems.base import System, Trajectory
from cbvf.utils.parallel import parallel_map
from cbvf.utils.sampling import Lcg64

logger = logging.getLogger(__name__)

StateFn = Callable[[np.ndarray], Any]
ControllerKind = Literal["greedy", "sample_hold"]

CLASSICAL_TOL = 1e-9
FD_STEP = 1e-6
DEFAULT_MARGIN_BAND = 3
MAX_EXCLUDED_FRACTION = 0.2
NECESSARY_ONLY_NOTE = (
    "necessary-condition check: a finite list of class-K functions stands in for all of them"
)


@dataclass(frozen=True)
class BarrierParams:
    """Settings for Barrier Guarantee rollouts.

    Initial states are taken from ``initial_states`` when given, otherwise
    ``count`` states are drawn with the seeded LCG from the field's grid and
    kept when h > 0 there.
    """

    theta: float = 0.9
    horizon: float = 5.0
    initial_states: Optional[tuple[tuple[float, ...], ...]] = None
    count: int = 8
    seed: int = 0
    controller: ControllerKind = "greedy"
    tau: float = 0.1
    step: float = DEFAULT_ROLLOUT_STEP
    tol: float = 1e-3
    gradient_mode: GradientMode = "central"

    def __post_init__(self) -> None:
        if not 0 <= self.theta < 1:
            raise ValueError(f"theta must be in [0, 1), got {self.theta}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.controller not in ("greedy", "sample_hold"):
            raise ValueError(f"controller must be greedy or sample_hold, got {self.controller}")
        if not self.tau > 0 or not self.step > 0:
            raise ValueError(f"tau and step must be positive, got {self.tau}, {self.step}")
        if self.tol < 0:
            raise ValueError(f"tol must be nonnegative, got {self.tol}")
        if self.initial_states is not None:
            states = tuple(tuple(float(v) for v in np.atleast_1d(s)) for s in self.initial_states)
            object.__setattr__(self, "initial_states", states)
        elif self.count < 1:
            raise ValueError(f"count must be positive, got {self.count}")


@dataclass
class BarrierRollout:
    """One closed-loop rollout kept for re-judging at several θ."""

    index: int
    x0: np.ndarray
    h0: float
    trajectory: Optional[Trajectory] = None
    h_values: Optional[np.ndarray] = None
    theta_log: Optional[ThetaLog] = None
    error: Optional[str] = None


def clamp_nonneg(field: ScalarField) -> ScalarField:
    """max{0, h} node-wise; a nonnegative field is returned as is."""
    if field.min() >= 0:
        return field
    label = f"max(0,{field.label})" if field.label else "max(0,h)"
    return field.with_values(np.maximum(field.values, 0.0), label)


def default_invariance_tolerance(g: ScalarField) -> float:
    """2 × (largest grid spacing) × (Lipschitz estimate of g)."""
    return 2.0 * max(g.grid.spacing) * lipschitz_estimate(g)


def _finite_difference_gradient(h_fn: StateFn, x: np.ndarray) -> np.ndarray:
    grad = np.empty_like(x)
    for i in range(x.shape[1]):
        offset = np.zeros(x.shape[1])
        offset[i] = FD_STEP
        up = np.asarray(h_fn(x + offset), dtype=float).reshape(-1)
        down = np.asarray(h_fn(x - offset), dtype=float).reshape(-1)
        grad[:, i] = (up - down) / (2.0 * FD_STEP)
    return grad


def check_classical_cbf(
    system: System,
    alpha: ClassKSpec,
    h_fn: StateFn,
    samples: Any,
    grad_fn: Optional[StateFn] = None,
    tol: float = CLASSICAL_TOL,
    control_resolution: Optional[int] = None,
) -> Report:
    """Check max_u ∇h(x)·f(x, u) >= −α(h(x)) on every sample with h(x) > 0.

    Args:
        system: Dynamics
        alpha: Class-K function
        h_fn: Vectorized h over states ``(k, n)``
        samples: States to test
        grad_fn: Vectorized ∇h; central finite differences (step 1e-6) when omitted
        tol: Allowed negative margin
        control_resolution: Samples per control axis when U is sampled

    Returns:
        Report; vacuous passes (no sample with h > 0) are noted
    """
    x = np.asarray(samples, dtype=float).reshape(-1, system.dim)
    h = np.asarray(h_fn(x), dtype=float).reshape(-1)
    active = h > 0
    tolerances = {"tol": tol}
    if not np.any(active):
        logger.warning("Classical check is vacuous: no sample has h > 0")
        return Report(
            verdict="pass",
            tolerances=tolerances,
            label="classical CBF",
            notes=["vacuous: no sample has h(x) > 0"],
            checked=0,
        )

    x, h = x[active], h[active]
    grad = (
        np.asarray(grad_fn(x), dtype=float).reshape(x.shape)
        if grad_fn is not None
        else _finite_difference_gradient(h_fn, x)
    )
    lie = np.asarray(ham_max(system, x, grad, control_resolution)).reshape(-1)
    required = -np.asarray(alpha(h)).reshape(-1)
    violation = np.maximum(required - lie, 0.0)
    worst = float(violation.max())
    witnesses = worst_witnesses(x, np.zeros(len(x)), lie, required, violation, tol)
    return Report(
        verdict="fail" if worst > tol else "pass",
        max_violation=worst,
        witnesses=witnesses,
        tolerances=tolerances,
        label="classical CBF",
        checked=int(len(x)),
    )


def check_time_invariance(
    series: ValueSeries,
    g: ScalarField,
    tol: Optional[float] = None,
    margin_band: int = DEFAULT_MARGIN_BAND,
) -> Report:
    """Largest g − v(·, T) over checkpoints T > 0 and nodes away from the boundary band.

    Inconclusive when the band removes more than 20% of the nodes.

    Raises:
        ShapeMismatchError: if the series and g live on different grids
    """
    if series.grid != g.grid:
        raise ShapeMismatchError(
            f"series grid {series.grid.to_dict()} differs from g grid {g.grid.to_dict()}"
        )
    tol = default_invariance_tolerance(g) if tol is None else float(tol)
    tolerances = {"tol": tol, "margin_band": float(margin_band)}
    mask = g.grid.interior_mask(margin_band)
    excluded = 1.0 - mask.sum() / mask.size
    label = "time invariance"
    if excluded > MAX_EXCLUDED_FRACTION:
        logger.warning("Boundary band excludes %.0f%% of the nodes", 100 * excluded)
        return Report(
            verdict="inconclusive",
            tolerances=tolerances,
            label=label,
            notes=[f"boundary band excludes {100 * excluded:.1f}% of nodes (limit 20%)"],
        )
    if len(series) == 1:
        return Report(
            verdict="pass",
            tolerances=tolerances,
            label=label,
            notes=["only the initial checkpoint: nothing to compare"],
        )

    states = g.grid.states()[mask.ravel()]
    g_inner = g.values[mask]
    worst = 0.0
    witnesses: list[Witness] = []
    for horizon, f in zip(series.checkpoints[1:], series.fields[1:]):
        v_inner = f.values[mask]
        deviation = g_inner - v_inner
        worst = max(worst, float(deviation.max()))
        witnesses += worst_witnesses(
            states, np.full(len(states), horizon), v_inner, g_inner, deviation, tol
        )
    witnesses.sort(key=lambda w: w.measured - w.required)
    verdict = "fail" if worst > tol else "pass"
    logger.info("Time invariance: max deviation %.4g (tol %.4g) -> %s", worst, tol, verdict)
    return Report(
        verdict=verdict,
        max_violation=worst,
        witnesses=witnesses[:MAX_WITNESSES],
        tolerances=tolerances,
        label=label,
        checked=int(states.shape[0] * (len(series) - 1)),
    )


def _initial_states(h_field: ScalarField, params: BarrierParams) -> np.ndarray:
    grid = h_field.grid
    if params.initial_states is not None:
        return np.asarray(params.initial_states, dtype=float).reshape(-1, grid.dim)
    rng = Lcg64(params.seed)
    picked: list[np.ndarray] = []
    for _ in range(1000):
        batch = rng.sample_box(grid.lo, grid.hi, params.count)
        h = np.asarray(interpolate(h_field, batch)).reshape(-1)
        picked.extend(batch[h > 0])
        if len(picked) >= params.count:
            break
    return np.asarray(picked[: params.count], dtype=float).reshape(-1, grid.dim)


def barrier_rollouts(
    system: System,
    alpha: ClassKSpec,
    h_field: ScalarField,
    params: BarrierParams,
) -> list[BarrierRollout]:
    """Closed-loop rollouts from every admissible initial state, in input order."""
    greedy = GreedyController(system, h_field, params.gradient_mode)
    tau = params.tau if params.controller == "sample_hold" else params.step
    controller = SampleHoldController(greedy, tau, params.theta)

    def run(item: tuple[int, np.ndarray]) -> BarrierRollout:
        index, x0 = item
        h0 = float(interpolate(h_field, x0))
        rollout = BarrierRollout(index, x0, h0)
        try:
            trajectory, log = sample_hold_rollout(
                controller, alpha, x0, params.horizon, params.step
            )
            rollout.trajectory = trajectory
            rollout.theta_log = log
            rollout.h_values = np.asarray(interpolate(h_field, trajectory.states)).reshape(-1)
        except CBVFError as e:
            rollout.error = str(e)
        return rollout

    starts = _initial_states(h_field, params)
    h_starts = np.asarray(interpolate(h_field, starts)).reshape(-1) if len(starts) else []
    items = []
    for index, (x0, h0) in enumerate(zip(starts, h_starts)):
        if h0 > 0:
            items.append((index, x0))
        else:
            logger.warning("Skipping initial state %s with h = %.3g <= 0", x0.tolist(), h0)
    return parallel_map(run, items)


def barrier_verdict(
    rollouts: list[BarrierRollout],
    alpha: ClassKSpec,
    theta: float,
    tol: float,
) -> Report:
    """Judge stored rollouts: h(x(t)) >= β_α(θ h(x0), t) − tol at every sample."""
    tolerances = {"tol": tol, "theta": theta}
    label = "barrier guarantee"
    if not rollouts:
        return Report(
            verdict="inconclusive",
            tolerances=tolerances,
            label=label,
            notes=["no initial state with h > 0"],
        )

    worst = 0.0
    witnesses: list[Witness] = []
    errored: list[Witness] = []
    notes: list[str] = []
    checked = 0
    for rollout in rollouts:
        if rollout.error is not None or rollout.trajectory is None:
            notes.append(f"rollout {rollout.index} from {rollout.x0.tolist()}: {rollout.error}")
            errored.append(Witness.at(rollout.x0, 0.0, rollout.h0, rollout.h0))
            continue
        times = rollout.trajectory.times
        required = np.asarray(beta_eval(alpha, theta * rollout.h0, times))
        violation = np.maximum(required - rollout.h_values, 0.0)
        worst = max(worst, float(violation.max()))
        checked += len(times)
        witnesses += worst_witnesses(
            rollout.trajectory.states, times, rollout.h_values, required, violation, tol
        )

    if worst > tol:
        verdict = "fail"
        witnesses.sort(key=lambda w: w.measured - w.required)
    elif errored:
        verdict = "inconclusive"
        witnesses = errored
    else:
        verdict = "pass"
    return Report(
        verdict=verdict,
        max_violation=worst,
        witnesses=witnesses[:MAX_WITNESSES],
        tolerances=tolerances,
        label=label,
        notes=notes,
        checked=checked,
    )


def check_barrier_guarantee(
    system: System,
    alpha: ClassKSpec,
    h_field: ScalarField,
    params: BarrierParams,
) -> Report:
    """Roll out the safe controller and check the Barrier Guarantee bound."""
    rollouts = barrier_rollouts(system, alpha, h_field, params)
    report = barrier_verdict(rollouts, alpha, params.theta, params.tol)
    logger.info("%s over %d rollouts", report.summary(), len(rollouts))
    return report


def verify_viscosity_cbf(
    system: System,
    alpha: ClassKSpec,
    h_field: ScalarField,
    solver_params: Optional[SolverParams] = None,
    tol: Optional[float] = None,
    margin_band: int = DEFAULT_MARGIN_BAND,
) -> Report:
    """Decide whether h is a viscosity CBF via time invariance of its value function.

    h is clamped to max{0, h} first, which does not change the answer.
    """
    solver_params = solver_params or SolverParams.uniform(2.0)
    clamped = clamp_nonneg(h_field)
    series = solve_cbvf(system, alpha, clamped, solver_params)
    report = check_time_invariance(series, clamped, tol, margin_band)
    report.label = "viscosity CBF"
    if clamped is not h_field:
        report.notes.append("h had negative values; checked max(0, h)")
    return report


def check_avoid_time_invariance(
    system: System,
    h_field: ScalarField,
    alphas: list[ClassKSpec],
    solver_params: Optional[SolverParams] = None,
    tol: Optional[float] = None,
    margin_band: int = DEFAULT_MARGIN_BAND,
) -> Report:
    """Time invariance of the avoid value of max{0, h}, plus one viscosity check per α."""
    solver_params = solver_params or SolverParams.uniform(2.0)
    clamped = clamp_nonneg(h_field)
    series = solve_avoid(system, clamped, solver_params)
    avoid = check_time_invariance(series, clamped, tol, margin_band)
    avoid.label = "avoid time invariance"

    components = [avoid]
    for alpha in alphas:
        report = verify_viscosity_cbf(system, alpha, h_field, solver_params, tol, margin_band)
        report.label = f"viscosity CBF ({alpha.kind})"
        components.append(report)
    notes = [NECESSARY_ONLY_NOTE] if alphas else []
    return Report.combine("avoid time invariance", components, notes)
