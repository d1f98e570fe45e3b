"""Brute-force trajectory oracle for the control barrier value function.

The value v(x, T) is characterized implicitly by

    β_α(v(x, T), T) = sup_u min_{t∈[0,T]} β_α(g(x(t)), T − t).

The oracle enumerates every piecewise-constant signal with ``num_intervals``
equal segments drawn from a finite list of control values, integrates all of
them at once, and recovers v by bisection on β_α(·, T).
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Iterator, Optional

import numpy as np

from cbvf.core.classk import ClassKSpec, beta_eval
from cbvf.core.errors import CapacityError, DomainError
from cbvf.systems.base import ControlSignal, System, rk4_step

logger = logging.getLogger(__name__)

StateFn = Callable[[np.ndarray], Any]

ENUMERATION_GUARD = 10**7


@dataclass(frozen=True)
class OracleParams:
    """Settings for the brute-force oracle.

    ``time_samples`` is per unit horizon; ``control_values`` defaults to the
    control set's oracle values (finite U itself, box corners and midpoints).
    """

    num_intervals: int = 4
    control_values: Optional[tuple[tuple[float, ...], ...]] = None
    time_samples: int = 200
    bisection_tol: float = 1e-6
    max_sequences: int = ENUMERATION_GUARD

    def __post_init__(self) -> None:
        if self.num_intervals < 1:
            raise ValueError(f"num_intervals must be positive, got {self.num_intervals}")
        if self.time_samples < 1:
            raise ValueError(f"time_samples must be positive, got {self.time_samples}")
        if not self.bisection_tol > 0:
            raise ValueError(f"bisection_tol must be positive, got {self.bisection_tol}")
        if self.control_values is not None:
            values = tuple(tuple(float(v) for v in np.atleast_1d(u)) for u in self.control_values)
            if not values:
                raise ValueError("control_values must not be empty")
            object.__setattr__(self, "control_values", values)

    def controls_for(self, system: System) -> np.ndarray:
        if self.control_values is None:
            return system.control_set.oracle_values()
        controls = np.asarray(self.control_values, dtype=float)
        for u in controls:
            if not system.control_set.contains(u):
                raise DomainError(f"oracle control {u.tolist()} is not in U of '{system.name}'")
        return controls

    def steps_per_interval(self, horizon: float) -> int:
        return max(1, math.ceil(self.time_samples * horizon / self.num_intervals - 1e-9))


@dataclass(frozen=True, eq=False)
class OracleResult:
    """Best payoff found by enumeration and the signal achieving it."""

    value: float
    payoff: float
    sequence: tuple[tuple[float, ...], ...]
    horizon: float
    candidates: int

    @property
    def signal(self) -> ControlSignal:
        return ControlSignal.segments(self.sequence, self.horizon)


def enumerate_sequences(num_controls: int, num_intervals: int) -> np.ndarray:
    """All index sequences in lexicographic order, shape ``(num_controls**num_intervals, N)``."""
    combos = itertools.product(range(num_controls), repeat=num_intervals)
    return np.array(list(combos), dtype=int).reshape(-1, num_intervals)


def march_sequences(
    system: System,
    x0: Any,
    controls: np.ndarray,
    sequences: np.ndarray,
    horizon: float,
    steps_per_interval: int,
) -> Iterator[tuple[float, np.ndarray, np.ndarray]]:
    """Integrate every sequence from ``x0`` in one batch.

    Yields ``(t, states, applied_controls)`` for t = 0 and after every RK4
    step; ``states`` has shape ``(S, n)``.
    """
    n_seq, n_intervals = sequences.shape
    x = np.tile(np.atleast_1d(np.asarray(x0, dtype=float)), (n_seq, 1))
    h = horizon / (n_intervals * steps_per_interval)
    yield 0.0, x, controls[sequences[:, 0]]
    for j in range(n_intervals):
        u = controls[sequences[:, j]]
        for s in range(steps_per_interval):
            x = rk4_step(system, x, u, h)
            k = j * steps_per_interval + s + 1
            yield k * h, x, u


def _g_values(g_fn: StateFn, states: np.ndarray) -> np.ndarray:
    values = np.asarray(g_fn(states), dtype=float).reshape(-1)
    # Diverged rollouts get the lowest possible payoff.
    return np.where(np.isfinite(values), np.maximum(values, 0.0), 0.0)


def _decay(alpha: Optional[ClassKSpec], r: Any, t: float) -> Any:
    if alpha is None:
        return r
    return beta_eval(alpha, r, t)


def invert_decay(
    alpha: Optional[ClassKSpec], payoff: float, horizon: float, upper: float, tol: float
) -> float:
    """Solve β_α(r, horizon) = payoff for r in [0, upper] by bisection."""
    if alpha is None:
        return min(max(payoff, 0.0), upper)
    if payoff <= 0.0:
        return 0.0
    if payoff >= beta_eval(alpha, upper, horizon):
        return upper
    lo, hi = 0.0, upper
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if beta_eval(alpha, mid, horizon) < payoff:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def oracle_search(
    system: System,
    alpha: Optional[ClassKSpec],
    g_fn: StateFn,
    x: Any,
    horizon: float,
    params: Optional[OracleParams] = None,
) -> OracleResult:
    """Enumerate signals and return the value, best payoff and best control sequence.

    Ties in payoff go to the lexicographically smallest sequence.

    Raises:
        CapacityError: if the enumeration would exceed ``params.max_sequences``
    """
    params = params or OracleParams()
    if horizon < 0:
        raise DomainError(f"horizon must be nonnegative, got {horizon}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    controls = params.controls_for(system)
    count = len(controls) ** params.num_intervals
    if count > params.max_sequences:
        raise CapacityError(
            f"{len(controls)}^{params.num_intervals} = {count} signals exceed the "
            f"enumeration guard of {params.max_sequences}"
        )

    g0 = float(_g_values(g_fn, x[None, :])[0])
    first = tuple(tuple(float(v) for v in controls[0]) for _ in range(params.num_intervals))
    if horizon == 0 or g0 == 0.0:
        return OracleResult(g0 if horizon == 0 else 0.0, g0, first, horizon, count)

    sequences = enumerate_sequences(len(controls), params.num_intervals)
    payoff = np.full(count, np.inf)
    for t, states, _ in march_sequences(
        system, x, controls, sequences, horizon, params.steps_per_interval(horizon)
    ):
        decayed = _decay(alpha, _g_values(g_fn, states), max(horizon - t, 0.0))
        payoff = np.minimum(payoff, decayed)

    best = int(np.argmax(payoff))
    best_payoff = float(payoff[best])
    value = invert_decay(alpha, best_payoff, horizon, g0, params.bisection_tol)
    sequence = tuple(tuple(float(v) for v in controls[i]) for i in sequences[best])
    logger.debug(
        "Oracle at x=%s, T=%g: %d signals, payoff %.6g, value %.6g",
        x.tolist(),
        horizon,
        count,
        best_payoff,
        value,
    )
    return OracleResult(value, best_payoff, sequence, horizon, count)


def cbvf_oracle(
    system: System,
    alpha: Optional[ClassKSpec],
    g_fn: StateFn,
    x: Any,
    horizon: float,
    params: Optional[OracleParams] = None,
) -> float:
    """v(x, T) by enumeration; ``alpha=None`` gives the avoid value."""
    return oracle_search(system, alpha, g_fn, x, horizon, params).value
