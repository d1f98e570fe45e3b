"""Control systems, admissible control sets, control signals and trajectories."""

import bisect
import itertools
import logging
import math
from dataclasses import dataclass, replace
from typing import Any, Callable, Literal, Optional

import numpy as np
import pandas as pd

from cbvf.core.errors import DivergenceError, DomainError, UnknownSystemError

logger = logging.getLogger(__name__)

DynamicsFn = Callable[[np.ndarray, np.ndarray], np.ndarray]

MAX_STATE_DIM = 3
MEMBERSHIP_TOL = 1e-12
DIVERGENCE_NORM = 1e9
DEFAULT_STEP = 1e-3


def _lexsorted(rows: list[tuple[float, ...]]) -> tuple[tuple[float, ...], ...]:
    return tuple(sorted(set(rows)))


@dataclass(frozen=True)
class ControlSet:
    """Admissible control values U: a finite list or a box.

    Every enumeration it hands out is sorted lexicographically.
    """

    kind: Literal["finite", "box"]
    values: tuple[tuple[float, ...], ...] = ()
    lower: tuple[float, ...] = ()
    upper: tuple[float, ...] = ()
    sample_count: int = 9

    def __post_init__(self) -> None:
        if self.kind == "finite":
            if not self.values:
                raise ValueError("finite control set needs at least one value")
            rows = [tuple(float(v) for v in np.atleast_1d(u)) for u in self.values]
            if len({len(r) for r in rows}) != 1:
                raise ValueError("finite control values must share one dimension")
            object.__setattr__(self, "values", _lexsorted(rows))
        elif self.kind == "box":
            lower = tuple(float(v) for v in np.atleast_1d(self.lower))
            upper = tuple(float(v) for v in np.atleast_1d(self.upper))
            if not lower or len(lower) != len(upper):
                raise ValueError(f"box bounds must be non-empty and matching: {lower}, {upper}")
            for axis, (a, b) in enumerate(zip(lower, upper)):
                if a > b:
                    raise ValueError(f"control axis {axis}: lower {a} exceeds upper {b}")
            object.__setattr__(self, "lower", lower)
            object.__setattr__(self, "upper", upper)
        else:
            raise ValueError(f"Unknown control set kind: {self.kind}")
        if self.sample_count < 1:
            raise ValueError(f"sample_count must be positive, got {self.sample_count}")

    @classmethod
    def finite(cls, values: Any) -> "ControlSet":
        return cls(kind="finite", values=tuple(tuple(np.atleast_1d(u)) for u in values))

    @classmethod
    def box(cls, lower: Any, upper: Any, sample_count: int = 9) -> "ControlSet":
        return cls(kind="box", lower=lower, upper=upper, sample_count=sample_count)

    @property
    def dim(self) -> int:
        return len(self.values[0]) if self.kind == "finite" else len(self.lower)

    def contains(self, u: Any, tol: float = MEMBERSHIP_TOL) -> bool:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if u.shape != (self.dim,):
            return False
        if self.kind == "finite":
            return any(np.all(np.abs(u - np.asarray(v)) <= tol) for v in self.values)
        lower, upper = np.asarray(self.lower), np.asarray(self.upper)
        return bool(np.all(u >= lower - tol) and np.all(u <= upper + tol))

    def _product(self, per_axis: list[np.ndarray]) -> np.ndarray:
        rows = [tuple(float(v) for v in combo) for combo in itertools.product(*per_axis)]
        return np.asarray(_lexsorted(rows), dtype=float)

    def samples(self, resolution: Optional[int] = None) -> np.ndarray:
        """Candidate controls ``(k, m)``: the finite values or a tensor sample of the box."""
        if self.kind == "finite":
            return np.asarray(self.values, dtype=float)
        n = resolution or self.sample_count
        per_axis = [
            np.array([0.5 * (a + b)]) if n == 1 else np.linspace(a, b, n)
            for a, b in zip(self.lower, self.upper)
        ]
        return self._product(per_axis)

    def vertices(self) -> np.ndarray:
        if self.kind == "finite":
            return np.asarray(self.values, dtype=float)
        return self._product([np.array([a, b]) for a, b in zip(self.lower, self.upper)])

    def oracle_values(self) -> np.ndarray:
        """Controls enumerated by the brute-force oracle (box: per-axis lo, mid, hi)."""
        if self.kind == "finite":
            return np.asarray(self.values, dtype=float)
        return self._product(
            [np.array([a, 0.5 * (a + b), b]) for a, b in zip(self.lower, self.upper)]
        )

    def to_dict(self) -> dict:
        if self.kind == "finite":
            return {"kind": "finite", "values": [list(v) for v in self.values]}
        return {
            "kind": "box",
            "lower": list(self.lower),
            "upper": list(self.upper),
            "sample_count": self.sample_count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ControlSet":
        kind = data.get("kind")
        if kind == "finite":
            return cls.finite(data["values"])
        if kind == "box":
            return cls.box(data["lower"], data["upper"], int(data.get("sample_count", 9)))
        raise ValueError(f"Unknown control set kind: {kind}")


@dataclass(frozen=True, eq=False)
class System:
    """ẋ = f(x, u) with f vectorized over leading axes: ``f(x[..., n], u[..., m]) -> [..., n]``."""

    name: str
    dim: int
    dynamics: DynamicsFn
    control_set: ControlSet
    lipschitz_hint: Optional[float] = None
    description: str = ""

    def __post_init__(self) -> None:
        if not 1 <= self.dim <= MAX_STATE_DIM:
            raise ValueError(f"state dimension must be 1..{MAX_STATE_DIM}, got {self.dim}")
        if self.lipschitz_hint is not None and not self.lipschitz_hint > 0:
            raise ValueError(f"lipschitz_hint must be positive, got {self.lipschitz_hint}")

    @property
    def control_dim(self) -> int:
        return self.control_set.dim

    def f(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Unchecked vectorized dynamics."""
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        return np.asarray(self.dynamics(x, u), dtype=float)

    def with_control_set(self, control_set: ControlSet, suffix: str = "widened") -> "System":
        """Copy of the system with another control set (used for what-if checks)."""
        return replace(self, control_set=control_set, name=f"{self.name}+{suffix}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dim": self.dim,
            "control_set": self.control_set.to_dict(),
            "lipschitz_hint": self.lipschitz_hint,
        }


def eval_f(system: System, x: Any, u: Any) -> np.ndarray:
    """Return f(x, u) after checking u ∈ U."""
    if not system.control_set.contains(u):
        raise DomainError(f"control {np.atleast_1d(u).tolist()} is not in U of '{system.name}'")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return system.f(x, np.atleast_1d(np.asarray(u, dtype=float)))


@dataclass(frozen=True)
class ControlSignal:
    """Piecewise-constant control: ``values[i]`` is applied from ``switch_times[i]`` on."""

    switch_times: tuple[float, ...]
    values: tuple[tuple[float, ...], ...]
    horizon: float

    def __post_init__(self) -> None:
        times = tuple(float(t) for t in self.switch_times)
        values = tuple(tuple(float(v) for v in np.atleast_1d(u)) for u in self.values)
        object.__setattr__(self, "switch_times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "horizon", float(self.horizon))
        if not times or len(times) != len(values):
            raise ValueError(
                f"need one value per switch time, got {len(values)} for {len(times)} times"
            )
        if times[0] != 0.0:
            raise ValueError(f"first switch time must be 0, got {times[0]}")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError(f"switch times must be strictly increasing: {times}")
        if self.horizon < 0:
            raise ValueError(f"horizon must be nonnegative, got {self.horizon}")

    @classmethod
    def constant(cls, u: Any, horizon: float) -> "ControlSignal":
        return cls((0.0,), (tuple(np.atleast_1d(u)),), horizon)

    @classmethod
    def segments(cls, values: Any, horizon: float) -> "ControlSignal":
        """Equal-length segments over [0, horizon], one per value."""
        values = list(values)
        width = horizon / len(values)
        return cls(tuple(i * width for i in range(len(values))), tuple(values), horizon)

    def value_at(self, t: float) -> np.ndarray:
        index = bisect.bisect_right(self.switch_times, t) - 1
        return np.asarray(self.values[max(index, 0)], dtype=float)

    def to_dict(self) -> dict:
        return {
            "switch_times": list(self.switch_times),
            "values": [list(v) for v in self.values],
            "horizon": self.horizon,
        }


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled state trajectory; ``controls[i]`` is the control applied from ``times[i]``."""

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    signal: Optional[ControlSignal] = None

    @property
    def initial(self) -> np.ndarray:
        return self.states[0]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def __len__(self) -> int:
        return len(self.times)

    def to_frame(self) -> pd.DataFrame:
        """Columns ``t, x1..xn, u1..um``."""
        data: dict[str, np.ndarray] = {"t": np.asarray(self.times)}
        for i in range(self.states.shape[1]):
            data[f"x{i + 1}"] = self.states[:, i]
        for j in range(self.controls.shape[1]):
            data[f"u{j + 1}"] = self.controls[:, j]
        return pd.DataFrame(data)


def rk4_step(system: System, x: np.ndarray, u: np.ndarray, h: Any) -> np.ndarray:
    """One classical RK4 step with the control held; batched over leading axes."""
    k1 = system.f(x, u)
    k2 = system.f(x + 0.5 * h * k1, u)
    k3 = system.f(x + 0.5 * h * k2, u)
    k4 = system.f(x + h * k3, u)
    return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_grid(t_end: float, step: float) -> tuple[int, float]:
    """Number of equal steps covering [0, t_end] with spacing at most ``step``."""
    if t_end <= 0:
        return 0, 0.0
    n = max(1, math.ceil(t_end / step - 1e-9))
    return n, t_end / n


def flow(
    system: System,
    x0: Any,
    signal: ControlSignal,
    t_end: float,
    step: float = DEFAULT_STEP,
) -> Trajectory:
    """Integrate ẋ = f(x, u(t)) with RK4 from ``x0`` over [0, t_end].

    The control is held within each step; a switch time takes effect at the
    step boundary nearest to it.

    Raises:
        DomainError: if t_end exceeds the signal horizon or a value lies outside U
        DivergenceError: if the state norm exceeds 1e9
    """
    if not step > 0:
        raise DomainError(f"step must be positive, got {step}")
    if t_end < 0 or t_end > signal.horizon + 1e-12:
        raise DomainError(f"t_end={t_end} must lie in [0, horizon={signal.horizon}]")
    for u in signal.values:
        if not system.control_set.contains(u):
            raise DomainError(f"signal value {list(u)} is not in U of '{system.name}'")

    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    if x.shape != (system.dim,):
        raise DomainError(f"initial state must have {system.dim} components, got {x.shape}")

    n, h = step_grid(t_end, step)
    times = np.arange(n + 1) * h
    states = np.empty((n + 1, system.dim))
    controls = np.empty((n + 1, system.control_dim))
    states[0] = x
    for k in range(n):
        u = signal.value_at(times[k] + 0.5 * h)
        controls[k] = u
        x = rk4_step(system, x, u, h)
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > DIVERGENCE_NORM:
            partial = Trajectory(times[: k + 1], states[: k + 1], controls[: k + 1], signal)
            raise DivergenceError(
                f"'{system.name}' diverged at t={times[k + 1]:.6g} from x0={states[0].tolist()}",
                partial,
            )
        states[k + 1] = x
    controls[n] = signal.value_at(times[n])
    return Trajectory(times, states, controls, signal)


class SystemRegistry:
    """Registry for named systems.

    Allows dynamic registration and lookup of bundled and user systems.
    """

    _systems: dict[str, System] = {}

    @classmethod
    def register(cls, system: System) -> None:
        """Register a system under its name."""
        cls._systems[system.name] = system

    @classmethod
    def get(cls, name: str) -> Optional[System]:
        """Get a registered system by name, or None."""
        return cls._systems.get(name)

    @classmethod
    def list_systems(cls) -> list[str]:
        return sorted(cls._systems)


def builtin_system(name: str) -> System:
    """Look up a bundled system.

    Raises:
        UnknownSystemError: if no system of that name is registered
    """
    # Importing the module registers the bundled systems.
    import cbvf.systems.builtin  # noqa: F401

    system = SystemRegistry.get(name)
    if system is None:
        raise UnknownSystemError(
            f"unknown system '{name}'; available: {', '.join(SystemRegistry.list_systems())}"
        )
    return system
