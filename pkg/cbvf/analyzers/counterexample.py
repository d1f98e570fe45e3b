"""A classical barrier whose safe set is not control invariant.

On the bundled ``counterexample_2d`` system h(x) = 1 − x₁² − x₂² satisfies
the classical inequality max_u ∇h·f = 2|x₂| >= −α(h) everywhere inside the
disk, yet from the boundary point (1, 0) any bang-bang control with finitely
many switches pushes the state outside. The demonstration pairs the classical
check with a search over the switch instants of bang-bang signals.
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np
from scipy.optimize import differential_evolution

from cbvf.analyzers.verify import check_classical_cbf
from cbvf.core.classk import ClassKSpec
from cbvf.core.errors import DomainError
from cbvf.core.report import Report, Witness
from cbvf.systems.base import ControlSignal, System, Trajectory, flow, rk4_step
from cbvf.systems.builtin import COUNTEREXAMPLE_2D
from cbvf.utils.sampling import Lcg64

logger = logging.getLogger(__name__)

StateFn = Callable[[np.ndarray], np.ndarray]

ESCAPE_MARGIN = 1e-4


def disk_barrier(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return 1.0 - x[..., 0] ** 2 - x[..., 1] ** 2


def disk_barrier_gradient(x: np.ndarray) -> np.ndarray:
    return -2.0 * np.asarray(x, dtype=float)


@dataclass(frozen=True)
class CounterexampleParams:
    x0: tuple[float, ...] = (1.0, 0.0)
    horizon: float = 0.5
    max_switches: int = 6
    search_steps: int = 400
    time_samples: int = 2000
    maxiter: int = 40
    popsize: int = 15
    classical_samples: int = 10_000
    sample_box: tuple[tuple[float, float], ...] = ((-2.0, 2.0), (-2.0, 2.0))
    seed: int = 0
    margin: float = ESCAPE_MARGIN

    def __post_init__(self) -> None:
        if self.max_switches < 0:
            raise ValueError(f"max_switches must be nonnegative, got {self.max_switches}")
        if self.search_steps < 1 or self.time_samples < 1:
            raise ValueError("search_steps and time_samples must be positive")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")


@dataclass
class EscapeResult:
    """Worst case of the search: the signal whose min h stays highest."""

    report: Report
    best_min_h: float
    best_signal: ControlSignal
    trajectory: Trajectory
    evaluations: int

    @property
    def switches(self) -> int:
        return len(self.best_signal.switch_times) - 1


def bang_bang_signal(
    switch_times: Any, first: Any, second: Any, horizon: float
) -> ControlSignal:
    """Start at ``first`` and toggle at every switch time.

    Negative times count as 0 and times at or past the horizon are dropped.
    A switch at 0 changes the starting value and switches at the same
    instant cancel in pairs.
    """
    values = (tuple(np.atleast_1d(first)), tuple(np.atleast_1d(second)))
    times = [0.0]
    picked = [0]
    for t in sorted(float(s) for s in np.atleast_1d(switch_times)):
        if t >= horizon:
            break
        t = max(t, 0.0)
        toggled = 1 - picked[-1]
        if t <= times[-1]:
            picked[-1] = toggled
            if len(picked) > 1 and picked[-2] == toggled:
                times.pop()
                picked.pop()
        else:
            times.append(t)
            picked.append(toggled)
    return ControlSignal(tuple(times), tuple(values[i] for i in picked), horizon)


def _lowest_h(
    system: System,
    h_fn: StateFn,
    x0: np.ndarray,
    extremes: np.ndarray,
    start: int,
    switches: np.ndarray,
    horizon: float,
    steps: int,
) -> np.ndarray:
    """min_t h(x(t)) for a batch of switch-time vectors ``(batch, k)``."""
    h = horizon / steps
    mids = (np.arange(steps) + 0.5) * h
    parity = (switches[:, None, :] <= mids[None, :, None]).sum(axis=2) % 2
    picked = (start + parity) % 2
    x = np.tile(x0, (len(switches), 1))
    lowest = np.asarray(h_fn(x), dtype=float).reshape(-1)
    with np.errstate(invalid="ignore", over="ignore"):
        for j in range(steps):
            x = rk4_step(system, x, extremes[picked[:, j]], h)
            lowest = np.minimum(lowest, np.asarray(h_fn(x), dtype=float).reshape(-1))
    return np.where(np.isfinite(lowest), lowest, -np.inf)


def _initial_population(
    max_switches: int, horizon: float, size: int, seed: int
) -> np.ndarray:
    """Equal pieces, the half-full-half alternation, then seeded uniform rows."""
    k = max_switches
    equal = horizon * np.arange(1, k + 1) / (k + 1)
    alternating = horizon * (2 * np.arange(1, k + 1) - 1) / (2 * k)
    count = max(size - 2, 3)
    uniform = horizon * Lcg64(seed).uniforms(count * k).reshape(count, k)
    return np.vstack([equal, alternating, np.sort(uniform, axis=1)])


def check_bang_bang_escape(
    system: System,
    h_fn: StateFn,
    x0: tuple[float, ...],
    horizon: float,
    max_switches: int = 6,
    params: Optional[CounterexampleParams] = None,
) -> EscapeResult:
    """Does every signal with at most ``max_switches`` switches push h below −margin?

    For each starting extreme the switch instants are searched over [0, horizon]
    with differential evolution, maximizing min_t h(x(t)). Switch times may
    coincide or sit at the ends, so fewer switches are covered too. Passes
    when the best signal found still reaches h < −margin.
    """
    params = params or CounterexampleParams()
    extremes = system.control_set.vertices()
    if len(extremes) != 2:
        raise DomainError(
            f"bang-bang search needs exactly two extreme controls, '{system.name}' has "
            f"{len(extremes)}"
        )
    x0_arr = np.asarray(x0, dtype=float)

    candidates: list[tuple[float, np.ndarray, int]] = []
    evaluations = 0
    for start in (0, 1):
        if max_switches == 0:
            switches = np.zeros((1, 0))
            value = _lowest_h(
                system, h_fn, x0_arr, extremes, start, switches, horizon, params.search_steps
            )
            candidates.append((float(value[0]), switches[0], start))
            evaluations += 1
            continue

        def objective(z: np.ndarray, start: int = start) -> np.ndarray:
            batch = np.sort(np.atleast_2d(z.T), axis=1)
            return -_lowest_h(
                system, h_fn, x0_arr, extremes, start, batch, horizon, params.search_steps
            )

        init = _initial_population(
            max_switches, horizon, params.popsize * max_switches, params.seed
        )
        result = differential_evolution(
            objective,
            bounds=[(0.0, horizon)] * max_switches,
            init=init,
            seed=params.seed,
            maxiter=params.maxiter,
            tol=0.0,
            polish=False,
            vectorized=True,
            updating="deferred",
        )
        candidates.append((-float(result.fun), np.sort(result.x), start))
        evaluations += int(result.nfev)

    _, switches, start = max(candidates, key=lambda c: c[0])
    signal = bang_bang_signal(switches, extremes[start], extremes[1 - start], horizon)
    trajectory = flow(system, x0, signal, horizon, horizon / params.time_samples)
    best_min = float(np.min(h_fn(trajectory.states)))

    escaped = best_min < -params.margin
    violation = max(best_min + params.margin, 0.0)
    switch_list = [round(t, 6) for t in signal.switch_times[1:]]
    report = Report(
        verdict="pass" if escaped else "fail",
        max_violation=violation,
        witnesses=[] if escaped else [Witness.at(x0, horizon, best_min, -params.margin)],
        tolerances={"tol": 0.0, "margin": params.margin},
        label="bang-bang escape",
        notes=[
            f"best signal starts at u={list(signal.values[0])}, switches at {switch_list}, "
            f"min h = {best_min:.6g}"
        ],
        checked=evaluations,
    )
    logger.info(
        "%d switch-time candidates from %s: highest min h = %.4g",
        evaluations,
        list(x0),
        best_min,
    )
    return EscapeResult(report, best_min, signal, trajectory, evaluations)


def run_counterexample(
    params: Optional[CounterexampleParams] = None,
    alpha: Optional[ClassKSpec] = None,
) -> tuple[Report, EscapeResult]:
    """Classical check on seeded samples plus the bang-bang escape search.

    The combined report passes exactly when both parts do, i.e. when the
    classical inequality holds but the disk is still left by every signal.
    """
    params = params or CounterexampleParams()
    alpha = alpha or ClassKSpec.linear(1.0)
    system = COUNTEREXAMPLE_2D
    lo = [b[0] for b in params.sample_box]
    hi = [b[1] for b in params.sample_box]
    samples = Lcg64(params.seed).sample_box(lo, hi, params.classical_samples)
    classical = check_classical_cbf(system, alpha, disk_barrier, samples, disk_barrier_gradient)
    escape = check_bang_bang_escape(
        system, disk_barrier, params.x0, params.horizon, params.max_switches, params
    )
    report = Report.combine("counterexample", [classical, escape.report])
    return report, escape
