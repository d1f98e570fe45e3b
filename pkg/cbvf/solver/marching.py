"""Explicit level-set time marching of the obstacle variational inequality.

The value function solves

    max{∂_T v − H_α(x, v, ∇v), v − g(x)} = 0,   v(·, 0) = g,

and is marched forward in T with a Lax-Friedrichs numerical Hamiltonian,
TVD-RK2 in time and the obstacle enforced by clamping to [0, g] after every
stage. With α omitted the same scheme gives the undiscounted avoid value.

The "transformed" formulation marches w = β_α(v, T) under the plain
Hamiltonian against the moving obstacle β_α(g, T) and maps back with κ_α.
"""

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Literal, Optional

import numpy as np

from cbvf.core.classk import ClassKSpec, alpha_slope_bound, beta_eval, kappa_eval
from cbvf.core.errors import (
    NegativeObstacleError,
    ShapeMismatchError,
    StiffnessError,
    TruncationError,
)
from cbvf.core.grid import ScalarField, Stencil, ValueSeries, one_sided_differences
from cbvf.core.report import MAX_WITNESSES, Report, worst_witnesses
from cbvf.solver.hamiltonian import control_candidates, flux_table
from cbvf.systems.base import System

logger = logging.getLogger(__name__)

Dissipation = Literal["global", "local"]
Formulation = Literal["direct", "transformed"]

MIN_TIME_STEP = 1e-9
TRANSFORM_TOL = 1e-6


def uniform_horizons(horizon: float, spacing: float) -> tuple[float, ...]:
    """0, spacing, 2·spacing, ... up to and including ``horizon``."""
    if horizon <= 0:
        return (0.0,)
    n = max(1, math.ceil(horizon / spacing - 1e-9))
    return tuple(round(min(i * spacing, horizon), 12) for i in range(n)) + (float(horizon),)


@dataclass(frozen=True)
class SolverParams:
    """Settings for the level-set marcher."""

    cfl: float = 0.5
    checkpoint_horizons: tuple[float, ...] = (0.0,)
    dissipation: Dissipation = "local"
    control_resolution: Optional[int] = None
    max_steps: int = 1_000_000
    stencil: Stencil = "upwind1"
    formulation: Formulation = "direct"

    def __post_init__(self) -> None:
        horizons = tuple(float(t) for t in self.checkpoint_horizons)
        object.__setattr__(self, "checkpoint_horizons", horizons)
        if not 0 < self.cfl <= 1:
            raise ValueError(f"cfl must be in (0, 1], got {self.cfl}")
        if not horizons or horizons[0] != 0.0:
            raise ValueError(f"checkpoint_horizons must start at 0, got {horizons}")
        if any(b <= a for a, b in zip(horizons, horizons[1:])):
            raise ValueError(f"checkpoint_horizons must be strictly increasing, got {horizons}")
        if self.dissipation not in ("global", "local"):
            raise ValueError(f"dissipation must be global or local, got {self.dissipation}")
        if self.stencil not in ("upwind1", "eno2"):
            raise ValueError(f"stencil must be upwind1 or eno2, got {self.stencil}")
        if self.formulation not in ("direct", "transformed"):
            raise ValueError(f"formulation must be direct or transformed, got {self.formulation}")
        if self.control_resolution is not None and self.control_resolution < 1:
            raise ValueError(f"control_resolution must be positive, got {self.control_resolution}")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be positive, got {self.max_steps}")

    @classmethod
    def uniform(cls, horizon: float, spacing: float = 0.25, **kwargs) -> "SolverParams":
        """Params with checkpoints every ``spacing`` up to ``horizon``."""
        return cls(checkpoint_horizons=uniform_horizons(horizon, spacing), **kwargs)

    @property
    def horizon(self) -> float:
        return self.checkpoint_horizons[-1]

    def with_horizons(self, horizons: tuple[float, ...]) -> "SolverParams":
        return replace(self, checkpoint_horizons=tuple(horizons))

    def to_dict(self) -> dict:
        return {
            "cfl": self.cfl,
            "checkpoint_horizons": list(self.checkpoint_horizons),
            "dissipation": self.dissipation,
            "control_resolution": self.control_resolution,
            "max_steps": self.max_steps,
            "stencil": self.stencil,
            "formulation": self.formulation,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SolverParams":
        return cls(**data)


@dataclass
class MarchStats:
    steps: int = 0
    wall_clock: float = 0.0
    dt_history: list[float] = field(default_factory=list)


class LevelSetMarcher:
    """Resumable marcher: each :meth:`advance` continues from the last horizon reached.

    Args:
        system: Dynamics; its dimension must match the grid
        g: Nonnegative initial value and obstacle
        alpha: Class-K function; None marches the avoid problem
        params: Solver settings (checkpoints are ignored here)
    """

    def __init__(
        self,
        system: System,
        g: ScalarField,
        alpha: Optional[ClassKSpec] = None,
        params: Optional[SolverParams] = None,
    ) -> None:
        params = params or SolverParams()
        if system.dim != g.grid.dim:
            raise ShapeMismatchError(
                f"system '{system.name}' has dimension {system.dim}, grid has {g.grid.dim}"
            )
        if g.min() < 0:
            raise NegativeObstacleError(
                f"g has negative values (min {g.min():.6g}); clamp it first with clamp_nonneg"
            )

        self.system = system
        self.g = g
        self.alpha = alpha
        self.params = params
        self.grid = g.grid
        self.transformed = params.formulation == "transformed" and alpha is not None

        candidates = control_candidates(system, params.control_resolution)
        self._flux = flux_table(system, self.grid.states(), candidates.controls)
        speeds = np.abs(self._flux).max(axis=0)
        if params.dissipation == "global":
            speeds = np.broadcast_to(speeds.max(axis=0), speeds.shape)
        self._sigma = np.ascontiguousarray(speeds)
        inv_dx = 1.0 / np.asarray(self.grid.spacing)
        self._speed_bound = float((self._sigma * inv_dx).sum(axis=1).max())
        if alpha is not None and not self.transformed:
            self._alpha_slope = alpha_slope_bound(alpha, max(g.max(), 1e-12))
        else:
            self._alpha_slope = 0.0

        self._g_flat = g.flat.copy()
        self._u = self._g_flat.copy()
        self.time = 0.0
        self.stats = MarchStats()
        self._checkpoints: list[float] = [0.0]
        self._fields: list[ScalarField] = [g]

        logger.debug(
            "Marcher for '%s': %d nodes, %d candidate controls (%s), speed bound %.4g",
            system.name,
            self.grid.size,
            len(candidates),
            candidates.mode,
            self._speed_bound,
        )

    @property
    def nominal_dt(self) -> float:
        rate = self._speed_bound + self._alpha_slope
        return self.params.cfl / rate if rate > 0 else math.inf

    def _obstacle(self, t: float) -> np.ndarray:
        if self.transformed:
            return np.asarray(beta_eval(self.alpha, self._g_flat, t))
        return self._g_flat

    def _rate(self, u: np.ndarray) -> np.ndarray:
        """Numerical Hamiltonian at every node."""
        left, right = one_sided_differences(
            u.reshape(self.grid.shape), self.grid.spacing, self.params.stencil
        )
        dim = self.grid.dim
        left = left.reshape(dim, -1).T
        right = right.reshape(dim, -1).T
        p_mean = 0.5 * (left + right)
        ham = np.einsum("knd,nd->kn", self._flux, p_mean).max(axis=0)
        # Lax-Friedrichs dissipation, positive where the upwind slopes jump up.
        ham += 0.5 * (self._sigma * (right - left)).sum(axis=1)
        if self.alpha is not None and not self.transformed:
            ham += self.alpha(np.maximum(u, 0.0))
        return ham

    def _step(self, dt: float) -> None:
        upper = self._obstacle(self.time + dt)
        stage = np.clip(self._u + dt * self._rate(self._u), 0.0, upper)
        stage = 0.5 * self._u + 0.5 * (stage + dt * self._rate(stage))
        self._u = np.clip(stage, 0.0, upper)
        self.time += dt
        self.stats.steps += 1

    def _current_field(self, horizon: float) -> ScalarField:
        label = f"v_T{horizon:g}"
        if not self.transformed:
            return ScalarField(self.grid, self._u, label)
        values = np.asarray(kappa_eval(self.alpha, self._u, horizon))
        return ScalarField(self.grid, np.clip(values, 0.0, self._g_flat), label)

    def advance(self, horizon: float) -> ScalarField:
        """March to ``horizon`` (which must not be behind the current time) and record it.

        Raises:
            StiffnessError: if the CFL step falls below 1e-9
            TruncationError: if the step budget runs out first
        """
        if horizon < self.time - 1e-12:
            raise ValueError(f"cannot march backwards from T={self.time} to T={horizon}")
        started = time.perf_counter()
        remaining = horizon - self.time
        if remaining > 1e-12:
            nominal = self.nominal_dt
            if nominal < MIN_TIME_STEP:
                raise StiffnessError(
                    f"CFL step {nominal:.3g} is below {MIN_TIME_STEP:g}; "
                    f"speed bound {self._speed_bound:.3g}, α slope {self._alpha_slope:.3g}"
                )
            n = 1 if math.isinf(nominal) else max(1, math.ceil(remaining / nominal - 1e-9))
            dt = remaining / n
            self.stats.dt_history.append(dt)
            for _ in range(n):
                if self.stats.steps >= self.params.max_steps:
                    raise TruncationError(
                        f"step budget {self.params.max_steps} exhausted at T={self.time:.6g} "
                        f"before reaching T={horizon:g}",
                        self.series(),
                    )
                self._step(dt)
        self.time = float(horizon)
        self.stats.wall_clock += time.perf_counter() - started

        current = self._current_field(horizon)
        if horizon > self._checkpoints[-1]:
            self._checkpoints.append(float(horizon))
            self._fields.append(current)
        return current

    def series(self) -> ValueSeries:
        """Everything recorded so far, starting with g itself at T = 0."""
        return ValueSeries(
            tuple(self._checkpoints),
            tuple(self._fields),
            steps=self.stats.steps,
            notes={"wall_clock": self.stats.wall_clock},
        )


def _march(
    system: System, alpha: Optional[ClassKSpec], g: ScalarField, params: SolverParams
) -> ValueSeries:
    marcher = LevelSetMarcher(system, g, alpha, params)
    for horizon in params.checkpoint_horizons[1:]:
        marcher.advance(horizon)
    series = marcher.series()
    logger.info(
        "Solved '%s' (%s) to T=%g in %d steps (%.2fs)",
        system.name,
        alpha.kind if alpha is not None else "avoid",
        series.horizon,
        series.steps,
        marcher.stats.wall_clock,
    )
    return series


def solve_cbvf(
    system: System, alpha: ClassKSpec, g: ScalarField, params: SolverParams
) -> ValueSeries:
    """Control barrier value function snapshots at ``params.checkpoint_horizons``.

    Every returned field satisfies 0 <= v(·, T) <= g, and ``fields[0]`` is g.

    Raises:
        NegativeObstacleError: if g has negative values
        StiffnessError: if the CFL step underflows
        TruncationError: if ``max_steps`` is exhausted (carries the partial series)
    """
    return _march(system, alpha, g, params)


def solve_avoid(system: System, g: ScalarField, params: SolverParams) -> ValueSeries:
    """Undiscounted avoid value V(x, T) = sup_u min_t g(x(t)); the α ≡ 0 case."""
    return _march(system, None, g, params)


def transform_check(
    series: ValueSeries, g: ScalarField, alpha: Optional[ClassKSpec]
) -> Report:
    """Check the transformed obstacle w(·, T) = β_α(v(·, T), T) <= β_α(g, T) at every checkpoint."""
    if series.grid != g.grid:
        raise ShapeMismatchError("series and g live on different grids")
    states = g.grid.states()
    worst = 0.0
    witnesses = []
    for horizon, f in zip(series.checkpoints, series.fields):
        if alpha is None:
            w, bound = f.flat, g.flat
        else:
            w = np.asarray(beta_eval(alpha, np.maximum(f.flat, 0.0), horizon))
            bound = np.asarray(beta_eval(alpha, g.flat, horizon))
        violation = np.maximum(w - bound, 0.0)
        worst = max(worst, float(violation.max()))
        witnesses += worst_witnesses(
            states, np.full(len(w), horizon), w, bound, violation, TRANSFORM_TOL
        )

    witnesses.sort(key=lambda wit: wit.required - wit.measured)
    return Report(
        verdict="fail" if worst > TRANSFORM_TOL else "pass",
        max_violation=worst,
        witnesses=witnesses[:MAX_WITNESSES],
        tolerances={"tol": TRANSFORM_TOL},
        label="transformed obstacle",
        checked=len(series) * g.grid.size,
    )
