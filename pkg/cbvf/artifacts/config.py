"""Run configuration files.

A run config is one JSON document::

    {
      "system": "scalar_example",
      "alpha": {"kind": "linear", "gamma": 1.0},
      "grid": {"lo": [-1.5], "hi": [1.5], "counts": [301]},
      "g": {"expr": "max(0, 1 - abs(x1))"},
      "solver": {"horizon": 2.0, "spacing": 0.25},
      "verify": {"theta": 0.9},
      "seed": 0
    }

``system`` is a bundled system name or an inline definition with one
dynamics expression per state component. ``alpha`` omitted means the avoid
problem. Unknown keys are rejected everywhere.
"""

import json
import logging
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from cbvf.analyzers.synth import ConvergenceParams
from cbvf.analyzers.verify import BarrierParams
from cbvf.core.classk import ClassKSpec
from cbvf.core.errors import CBVFError, ConfigError, NonFiniteValueError
from cbvf.core.grid import Grid, ScalarField, discretize
from cbvf.solver.marching import SolverParams, uniform_horizons
from cbvf.systems.base import ControlSet, System, builtin_system
from cbvf.utils.expressions import dynamics_function, state_function

logger = logging.getLogger(__name__)

StateFn = Callable[[np.ndarray], np.ndarray]


def _one_minus_abs(x: np.ndarray) -> np.ndarray:
    return 1.0 - np.abs(x[..., 0])


def _slab(x: np.ndarray) -> np.ndarray:
    return 1.0 - x[..., 0] ** 2


def _unit_disk(x: np.ndarray) -> np.ndarray:
    return 1.0 - x[..., 0] ** 2 - x[..., 1] ** 2


def _unit_ball(x: np.ndarray) -> np.ndarray:
    return 1.0 - np.sum(x**2, axis=-1)


def _one_minus_norm(x: np.ndarray) -> np.ndarray:
    return 1.0 - np.linalg.norm(x, axis=-1)


# name: (function, minimum state dimension)
BUILTIN_FUNCTIONS: dict[str, tuple[StateFn, int]] = {
    "one_minus_abs": (_one_minus_abs, 1),
    "slab": (_slab, 1),
    "unit_disk": (_unit_disk, 2),
    "unit_ball": (_unit_ball, 1),
    "one_minus_norm": (_one_minus_norm, 1),
}


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ControlSetConfig(StrictModel):
    kind: Literal["finite", "box"]
    values: Optional[list[list[float]]] = None
    lower: Optional[list[float]] = None
    upper: Optional[list[float]] = None
    sample_count: int = Field(9, ge=2)

    @model_validator(mode="after")
    def _fields_for_kind(self) -> "ControlSetConfig":
        if self.kind == "finite" and not self.values:
            raise ValueError("a finite control set needs 'values'")
        if self.kind == "box" and (self.lower is None or self.upper is None):
            raise ValueError("a box control set needs 'lower' and 'upper'")
        return self

    def build(self) -> ControlSet:
        if self.kind == "finite":
            return ControlSet.finite(self.values)
        return ControlSet.box(self.lower, self.upper, self.sample_count)


class InlineSystemConfig(StrictModel):
    name: str = "inline"
    dim: int = Field(ge=1, le=3)
    dynamics: list[str]
    control_set: ControlSetConfig
    lipschitz_hint: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _one_expression_per_component(self) -> "InlineSystemConfig":
        if len(self.dynamics) != self.dim:
            raise ValueError(f"dynamics has {len(self.dynamics)} expressions for dim {self.dim}")
        return self

    def build(self) -> System:
        control_set = self.control_set.build()
        return System(
            name=self.name,
            dim=self.dim,
            dynamics=dynamics_function(self.dynamics, control_set.dim),
            control_set=control_set,
            lipschitz_hint=self.lipschitz_hint,
            description="; ".join(f"dx{i + 1}/dt = {e}" for i, e in enumerate(self.dynamics)),
        )


class AlphaConfig(StrictModel):
    kind: Literal["linear", "power", "table"]
    gamma: Optional[float] = Field(None, gt=0)
    c: Optional[float] = Field(None, gt=0)
    p: Optional[float] = Field(None, ge=1)
    points: Optional[list[tuple[float, float]]] = None
    lipschitz_hint: Optional[float] = Field(None, gt=0)

    def build(self) -> ClassKSpec:
        return ClassKSpec.from_dict(self.model_dump(exclude_none=True))


class GridConfig(StrictModel):
    lo: list[float]
    hi: list[float]
    counts: list[int]

    def build(self) -> Grid:
        return Grid(lo=self.lo, hi=self.hi, counts=self.counts)


class FieldConfig(StrictModel):
    """Either an expression over x1..x3 or the name of a bundled function."""

    expr: Optional[str] = None
    builtin: Optional[str] = None

    @model_validator(mode="after")
    def _exactly_one(self) -> "FieldConfig":
        if (self.expr is None) == (self.builtin is None):
            raise ValueError("give exactly one of 'expr' or 'builtin'")
        if self.builtin is not None and self.builtin not in BUILTIN_FUNCTIONS:
            known = ", ".join(sorted(BUILTIN_FUNCTIONS))
            raise ValueError(f"unknown builtin function '{self.builtin}' (known: {known})")
        return self

    @property
    def label(self) -> str:
        return self.expr if self.expr is not None else self.builtin

    def function(self, dim: int) -> StateFn:
        if self.expr is not None:
            return state_function(self.expr, dim)
        fn, min_dim = BUILTIN_FUNCTIONS[self.builtin]
        if dim < min_dim:
            raise ConfigError(f"builtin '{self.builtin}' needs dimension >= {min_dim}, got {dim}")
        return fn


class SolverConfig(StrictModel):
    """Checkpoints are ``checkpoint_horizons`` when given, else 0, spacing, ... horizon."""

    horizon: float = Field(2.0, gt=0)
    spacing: float = Field(0.25, gt=0)
    checkpoint_horizons: Optional[list[float]] = None
    cfl: float = Field(0.5, gt=0, le=1)
    dissipation: Literal["global", "local"] = "local"
    control_resolution: Optional[int] = Field(None, ge=2)
    max_steps: int = Field(1_000_000, ge=1)
    stencil: Literal["upwind1", "eno2"] = "upwind1"
    formulation: Literal["direct", "transformed"] = "direct"

    def build(self) -> SolverParams:
        horizons = self.checkpoint_horizons
        if horizons is None:
            horizons = uniform_horizons(self.horizon, self.spacing)
        return SolverParams(
            cfl=self.cfl,
            checkpoint_horizons=tuple(horizons),
            dissipation=self.dissipation,
            control_resolution=self.control_resolution,
            max_steps=self.max_steps,
            stencil=self.stencil,
            formulation=self.formulation,
        )


class VerifyConfig(StrictModel):
    tol: Optional[float] = Field(None, ge=0)
    margin_band: int = Field(3, ge=0)
    theta: float = Field(0.9, ge=0, lt=1)
    horizon: float = Field(5.0, gt=0)
    initial_states: Optional[list[list[float]]] = None
    count: int = Field(8, ge=1)
    controller: Literal["greedy", "sample_hold"] = "greedy"
    tau: float = Field(0.1, gt=0)
    step: float = Field(0.01, gt=0)
    barrier_tol: float = Field(1e-3, ge=0)
    gradient_mode: Literal["central", "upwind"] = "central"
    classical_samples: int = Field(10_000, ge=1)
    classical_tol: float = Field(1e-9, ge=0)
    alphas: list[AlphaConfig] = Field(default_factory=list)


class SynthConfig(StrictModel):
    window: int = Field(5, ge=1)
    spacing: float = Field(0.25, gt=0)
    tol: Optional[float] = Field(None, ge=0)
    max_T: float = Field(10.0, gt=0)
    max_tol_factor: float = Field(2.0, gt=0)

    def build(self) -> ConvergenceParams:
        return ConvergenceParams(self.window, self.spacing, self.tol, self.max_T)


class RunConfig(StrictModel):
    system: Union[str, InlineSystemConfig]
    alpha: Optional[AlphaConfig] = None
    grid: GridConfig
    g: FieldConfig
    g2: Optional[FieldConfig] = None
    solver: SolverConfig = Field(default_factory=SolverConfig)
    verify: VerifyConfig = Field(default_factory=VerifyConfig)
    synth: SynthConfig = Field(default_factory=SynthConfig)
    seed: int = Field(0, ge=0)

    def build_system(self) -> System:
        with _located("system"):
            if isinstance(self.system, str):
                return builtin_system(self.system)
            return self.system.build()

    def build_alpha(self) -> Optional[ClassKSpec]:
        if self.alpha is None:
            return None
        with _located("alpha"):
            return self.alpha.build()

    def build_grid(self) -> Grid:
        with _located("grid"):
            return self.grid.build()

    def g_function(self, which: str = "g") -> StateFn:
        spec = self.g if which == "g" else self.g2
        if spec is None:
            raise ConfigError("required for this mode", which)
        with _located(which):
            return spec.function(self.build_grid().dim)

    def build_field(self, which: str = "g") -> ScalarField:
        """The named function sampled on the grid."""
        fn = self.g_function(which)
        spec = self.g if which == "g" else self.g2
        with _located(which):
            return discretize(self.build_grid(), fn, spec.label)

    def solver_params(self) -> SolverParams:
        with _located("solver"):
            return self.solver.build()

    def extra_alphas(self) -> list[ClassKSpec]:
        with _located("verify.alphas"):
            return [a.build() for a in self.verify.alphas]

    def barrier_params(self, seed: Optional[int] = None) -> BarrierParams:
        v = self.verify
        states = None
        if v.initial_states is not None:
            states = tuple(tuple(s) for s in v.initial_states)
        with _located("verify"):
            return BarrierParams(
                theta=v.theta,
                horizon=v.horizon,
                initial_states=states,
                count=v.count,
                seed=self.seed if seed is None else seed,
                controller=v.controller,
                tau=v.tau,
                step=v.step,
                tol=v.barrier_tol,
                gradient_mode=v.gradient_mode,
            )

    def convergence_params(self) -> ConvergenceParams:
        with _located("synth"):
            return self.synth.build()

    def check_dimensions(self) -> None:
        """Grid, system and initial states must agree on the state dimension."""
        system = self.build_system()
        grid = self.build_grid()
        if grid.dim != system.dim:
            raise ConfigError(
                f"grid has dimension {grid.dim}, system '{system.name}' has {system.dim}", "grid"
            )
        for i, state in enumerate(self.verify.initial_states or []):
            if len(state) != system.dim:
                location = f"verify.initial_states.{i}"
                raise ConfigError(f"expected {system.dim} components, got {len(state)}", location)


@contextmanager
def _located(location: str) -> Iterator[None]:
    """Re-raise validation errors from the builders as ConfigError at ``location``."""
    try:
        yield
    except (ConfigError, NonFiniteValueError):
        raise
    except (ValueError, CBVFError) as e:
        raise ConfigError(str(e), location) from e


def _error_path(loc: tuple) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse and validate a run config.

    Raises:
        ConfigError: with ``line N, column M`` for JSON syntax errors or the
            dotted field path for schema errors
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(e.msg, f"{source}: line {e.lineno}, column {e.colno}") from e
    if not isinstance(data, dict):
        raise ConfigError("top level must be a JSON object", source)
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(first["msg"], f"{source}: {_error_path(first['loc'])}") from e
    config.check_dimensions()
    logger.debug("Loaded config from %s", source)
    return config


def load_config(path: Union[str, Path]) -> RunConfig:
    """Read and validate a run config file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}", str(path)) from e
    return parse_config(text, str(path))
