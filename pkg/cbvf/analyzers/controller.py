"""Greedy and sample-and-hold safe controllers driven by a barrier field."""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Literal, Optional

import numpy as np
import pandas as pd
from scipy.interpolate import RegularGridInterpolator

from cbvf.core.classk import ClassKSpec, beta_eval
from cbvf.core.errors import DivergenceError, DomainError
from cbvf.core.grid import (
    ScalarField,
    central_gradient,
    interpolate,
    query_points,
    upwind_gradients,
)
from cbvf.solver.hamiltonian import ControlCandidates, control_candidates
from cbvf.systems.base import (
    DIVERGENCE_NORM,
    ControlSet,
    ControlSignal,
    System,
    Trajectory,
    rk4_step,
    step_grid,
)

logger = logging.getLogger(__name__)

GradientMode = Literal["central", "upwind"]

DEFAULT_ROLLOUT_STEP = 0.01


@dataclass(frozen=True, eq=False)
class GreedyController:
    """k(x) = argmax_u ∇̂h(x)·f(x, u) over the candidate controls.

    ``gradient_mode="central"`` interpolates central differences of h;
    ``"upwind"`` uses, per control, the one-sided slope on the side each
    velocity component points to.
    """

    system: System
    h_field: ScalarField
    gradient_mode: GradientMode = "central"
    control_source: Optional[ControlSet] = None
    control_resolution: Optional[int] = None

    def __post_init__(self) -> None:
        if self.gradient_mode not in ("central", "upwind"):
            raise ValueError(f"gradient_mode must be central or upwind, got {self.gradient_mode}")
        if self.system.dim != self.h_field.grid.dim:
            raise ValueError(
                f"system dimension {self.system.dim} does not match field dimension "
                f"{self.h_field.grid.dim}"
            )

    @cached_property
    def candidates(self) -> ControlCandidates:
        system = self.system
        if self.control_source is not None:
            system = system.with_control_set(self.control_source, "control-source")
        return control_candidates(system, self.control_resolution)

    @cached_property
    def _slopes(self) -> RegularGridInterpolator:
        grid = self.h_field.grid
        if self.gradient_mode == "central":
            stacked = np.moveaxis(central_gradient(self.h_field), 0, -1)
        else:
            left, right = upwind_gradients(self.h_field)
            stacked = np.concatenate([np.moveaxis(left, 0, -1), np.moveaxis(right, 0, -1)], -1)
        return RegularGridInterpolator(
            grid.axes, stacked, method="linear", bounds_error=False, fill_value=None
        )

    def scores(self, x: Any) -> np.ndarray:
        """∇̂h·f for every candidate control at states ``x``, shape ``(k_states, k_controls)``."""
        pts, _ = query_points(self.h_field.grid, x)
        slopes = self._slopes(pts)
        controls = self.candidates.controls
        flux = np.stack([self.system.f(pts, u) for u in controls], axis=1)
        if self.gradient_mode == "central":
            return np.einsum("bkd,bd->bk", flux, slopes)
        dim = self.system.dim
        left, right = slopes[:, None, :dim], slopes[:, None, dim:]
        return (np.where(flux > 0, right, left) * flux).sum(axis=-1)

    def control_indices(self, x: Any) -> np.ndarray:
        # np.argmax returns the first maximum; candidates are sorted lexicographically.
        return np.argmax(self.scores(x), axis=1)


def greedy_control(ctrl: GreedyController, x: Any) -> np.ndarray:
    """The greedy control at one state; ties go to the lexicographically smallest control.

    Raises:
        OutOfBoundsError: if x is more than half a cell outside the field's grid
    """
    index = int(ctrl.control_indices(np.atleast_1d(np.asarray(x, dtype=float)))[0])
    return ctrl.candidates.controls[index].copy()


def _geometric_theta(theta0: float, n: int) -> float:
    """θ_n = 1 − (1 − θ_0)·2^{−n}."""
    return 1.0 - (1.0 - theta0) * 2.0**-n


@dataclass(frozen=True, eq=False)
class SampleHoldController:
    """Greedy control recomputed every ``tau`` time units and held in between.

    The multiplier schedule defaults to θ_n = 1 − (1 − θ_0)·2^{−n}. An
    explicit schedule is continued geometrically towards 1 once exhausted.
    """

    base: GreedyController
    tau: float
    theta0: float = 0.9
    theta_schedule: Optional[tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not 0 <= self.theta0 < 1:
            raise ValueError(f"theta0 must be in [0, 1), got {self.theta0}")
        if self.theta_schedule is not None:
            schedule = tuple(float(t) for t in self.theta_schedule)
            if not schedule:
                raise ValueError("theta_schedule must not be empty")
            if any(b <= a for a, b in zip(schedule, schedule[1:])):
                raise ValueError(f"theta_schedule must be strictly increasing: {schedule}")
            if schedule[0] < 0 or schedule[-1] >= 1:
                raise ValueError(f"theta_schedule must lie in [0, 1): {schedule}")
            object.__setattr__(self, "theta_schedule", schedule)
            object.__setattr__(self, "theta0", schedule[0])

    def theta(self, n: int) -> float:
        if self.theta_schedule is None:
            return _geometric_theta(self.theta0, n)
        if n < len(self.theta_schedule):
            return self.theta_schedule[n]
        last = self.theta_schedule[-1]
        return _geometric_theta(last, n - len(self.theta_schedule) + 1)


@dataclass
class ThetaLog:
    """Measured multipliers θ̂ per hold interval."""

    intervals: list[int] = field(default_factory=list)
    t_start: list[float] = field(default_factory=list)
    theta_hat: list[float] = field(default_factory=list)

    def append(self, index: int, t_start: float, theta_hat: float) -> None:
        self.intervals.append(index)
        self.t_start.append(t_start)
        self.theta_hat.append(theta_hat)

    def __len__(self) -> int:
        return len(self.intervals)

    @property
    def min_theta(self) -> float:
        return min(self.theta_hat) if self.theta_hat else math.inf

    def below(self, threshold: float = 1.0) -> list[int]:
        """Intervals whose measured multiplier falls below ``threshold``."""
        return [i for i, th in zip(self.intervals, self.theta_hat) if th < threshold]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"interval": self.intervals, "t_start": self.t_start, "theta_hat": self.theta_hat}
        )


def _ratio(numerator: np.ndarray, denominator: np.ndarray) -> np.ndarray:
    safe = np.where(denominator > 0, denominator, 1.0)
    fallback = np.where(numerator >= 0, np.inf, -np.inf)
    return np.where(denominator > 0, numerator / safe, fallback)


def sample_hold_rollout(
    ctrl: SampleHoldController,
    alpha: ClassKSpec,
    x0: Any,
    horizon: float,
    step: float = DEFAULT_ROLLOUT_STEP,
) -> tuple[Trajectory, ThetaLog]:
    """Roll out the sample-and-hold loop and measure θ̂ on every hold interval.

    θ̂_{n+1} = min over samples t in (t_n, t_{n+1}] of
    h(x(t)) / β_α(θ_n h(x_n), t − t_n).

    Raises:
        DomainError: if h(x0) <= 0
        DivergenceError: if the state norm exceeds 1e9
    """
    base = ctrl.base
    system, h_field = base.system, base.h_field
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    h0 = float(interpolate(h_field, x))
    if h0 <= 0:
        raise DomainError(f"h(x0) = {h0:.6g} must be positive at x0={x.tolist()}")

    log = ThetaLog()
    times, states, controls = [0.0], [x.copy()], []
    switch_times: list[float] = []
    switch_values: list[tuple[float, ...]] = []
    n_intervals = 0 if horizon <= 0 else max(1, math.ceil(horizon / ctrl.tau - 1e-9))

    t = 0.0
    for n in range(n_intervals):
        t_next = horizon if n == n_intervals - 1 else (n + 1) * ctrl.tau
        u = greedy_control(base, x)
        switch_times.append(t)
        switch_values.append(tuple(float(v) for v in u))

        h_start = float(interpolate(h_field, x))
        n_steps, dt = step_grid(t_next - t, step)
        segment = np.empty((n_steps, system.dim))
        for k in range(n_steps):
            x = rk4_step(system, x, u, dt)
            if not np.all(np.isfinite(x)) or np.linalg.norm(x) > DIVERGENCE_NORM:
                partial = _assemble(times, states, controls, u, switch_times, switch_values, t)
                raise DivergenceError(f"sample-and-hold rollout diverged near t={t:.6g}", partial)
            segment[k] = x
        elapsed = dt * np.arange(1, n_steps + 1)
        h_values = np.asarray(interpolate(h_field, segment)).reshape(-1)
        required = np.asarray(beta_eval(alpha, max(ctrl.theta(n) * h_start, 0.0), elapsed))
        theta_hat = float(_ratio(h_values, required).min()) if n_steps else math.inf
        log.append(n + 1, t, theta_hat)

        for k in range(n_steps):
            controls.append(u)
            times.append(t + elapsed[k])
            states.append(segment[k])
        t = t_next

    final_u = greedy_control(base, x) if n_intervals == 0 else controls[-1]
    trajectory = _assemble(times, states, controls, final_u, switch_times, switch_values, horizon)
    below = log.below(1.0)
    if below:
        logger.info("θ̂ < 1 on %d of %d hold intervals", len(below), len(log))
    return trajectory, log


def _assemble(
    times: list[float],
    states: list[np.ndarray],
    controls: list[np.ndarray],
    last_control: np.ndarray,
    switch_times: list[float],
    switch_values: list[tuple[float, ...]],
    horizon: float,
) -> Trajectory:
    applied = np.array(controls + [last_control], dtype=float).reshape(len(times), -1)
    signal = None
    if switch_times:
        signal = ControlSignal(tuple(switch_times), tuple(switch_values), max(horizon, times[-1]))
    return Trajectory(np.array(times), np.array(states), applied, signal)


def greedy_rollout(
    ctrl: GreedyController,
    alpha: ClassKSpec,
    x0: Any,
    horizon: float,
    step: float = DEFAULT_ROLLOUT_STEP,
    theta0: float = 0.9,
) -> tuple[Trajectory, ThetaLog]:
    """Closed-loop greedy flow: sample-and-hold with the hold period equal to the step."""
    return sample_hold_rollout(SampleHoldController(ctrl, step, theta0), alpha, x0, horizon, step)
