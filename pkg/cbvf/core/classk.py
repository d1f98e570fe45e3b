"""Class-K functions and the comparison flows they induce.

A class-K function α is continuous, strictly increasing and vanishes at zero.
Every α used here generates two scalar flows:

    decay   β_α(r, t):  ẏ = −α(y), y(0) = r     (a class-KL function)
    growth  κ_α(r, t):  ẏ = +α(y), y(0) = r     (defined on [0, b_α(r)))

The two are inverse to each other: β_α(κ_α(ρ, τ), τ) = ρ.

Linear and power specs use closed forms; tables are integrated with a
fixed-step RK4 scheme whose step depends only on the requested time, so a
given (spec, r, t) always produces the same bits.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Literal, Optional, Union

import numpy as np

from cbvf.core.errors import ComparisonOverflowError, DomainError, KappaBlowupError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]
ClassKKind = Literal["linear", "power", "table"]
FlowDirection = Literal["decay", "growth"]

DEFAULT_ODE_STEP = 1e-3
DEFAULT_BLOWUP_CEILING = 1e12

# Upper bound on integration steps when estimating an escape time numerically.
ESCAPE_SEARCH_STEPS = 2_000_000


@dataclass(frozen=True)
class ClassKSpec:
    """A locally Lipschitz class-K function.

    Kinds:
        linear: α(r) = gamma * r
        power:  α(r) = c * r**p, p >= 1
        table:  piecewise-linear through ``points`` starting at (0, 0),
                extrapolated with the last slope
    """

    kind: ClassKKind
    gamma: float = 1.0
    c: float = 1.0
    p: float = 1.0
    points: tuple[tuple[float, float], ...] = ()
    lipschitz_hint: Optional[float] = None
    ode_step: float = DEFAULT_ODE_STEP
    blowup_ceiling: float = DEFAULT_BLOWUP_CEILING

    def __post_init__(self) -> None:
        """Validate parameters for the chosen kind."""
        if self.kind == "linear":
            if not self.gamma > 0:
                raise ValueError(f"gamma must be positive, got {self.gamma}")
        elif self.kind == "power":
            if not self.c > 0:
                raise ValueError(f"c must be positive, got {self.c}")
            if not self.p >= 1:
                raise ValueError(f"p must be at least 1, got {self.p}")
        elif self.kind == "table":
            self._validate_points()
        else:
            raise ValueError(f"Unknown class-K kind: {self.kind}")

        if self.lipschitz_hint is not None and not self.lipschitz_hint > 0:
            raise ValueError(f"lipschitz_hint must be positive, got {self.lipschitz_hint}")
        if not self.ode_step > 0:
            raise ValueError(f"ode_step must be positive, got {self.ode_step}")
        if not self.blowup_ceiling > 0:
            raise ValueError(f"blowup_ceiling must be positive, got {self.blowup_ceiling}")

    def _validate_points(self) -> None:
        if len(self.points) < 2:
            raise ValueError("table needs at least two breakpoints")
        r0, a0 = self.points[0]
        if r0 != 0 or a0 != 0:
            raise ValueError(f"table must start at (0, 0), got ({r0}, {a0})")
        for (r_prev, a_prev), (r_next, a_next) in zip(self.points, self.points[1:]):
            if not (r_next > r_prev and a_next > a_prev):
                raise ValueError(
                    "table breakpoints must be strictly increasing in both coordinates, "
                    f"got ({r_prev}, {a_prev}) -> ({r_next}, {a_next})"
                )

    # ------------------------------------------------------------------
    # Constructors
    # ------------------------------------------------------------------

    @classmethod
    def linear(cls, gamma: float = 1.0, **kwargs: Any) -> "ClassKSpec":
        return cls(kind="linear", gamma=float(gamma), **kwargs)

    @classmethod
    def power(cls, c: float = 1.0, p: float = 2.0, **kwargs: Any) -> "ClassKSpec":
        return cls(kind="power", c=float(c), p=float(p), **kwargs)

    @classmethod
    def table(cls, points: Any, **kwargs: Any) -> "ClassKSpec":
        pts = tuple((float(r), float(a)) for r, a in points)
        return cls(kind="table", points=pts, **kwargs)

    # ------------------------------------------------------------------
    # Evaluation
    # ------------------------------------------------------------------

    @property
    def has_closed_form(self) -> bool:
        """True when β_α and κ_α are available in closed form."""
        return self.kind in ("linear", "power")

    @cached_property
    def _breakpoints(self) -> tuple[np.ndarray, np.ndarray]:
        pts = np.asarray(self.points, dtype=float)
        return pts[:, 0], pts[:, 1]

    @cached_property
    def _tail_slope(self) -> float:
        rs, al = self._breakpoints
        return float((al[-1] - al[-2]) / (rs[-1] - rs[-2]))

    def __call__(self, r: ArrayLike) -> np.ndarray:
        """Evaluate α on nonnegative input without domain checks."""
        r = np.asarray(r, dtype=float)
        if self.kind == "linear":
            return self.gamma * r
        if self.kind == "power":
            return self.c * np.power(r, self.p)
        rs, al = self._breakpoints
        inside = np.interp(r, rs, al)
        return np.where(r > rs[-1], al[-1] + self._tail_slope * (r - rs[-1]), inside)

    def to_dict(self) -> dict:
        """Serialize to the JSON object form."""
        data: dict[str, Any] = {"kind": self.kind}
        if self.kind == "linear":
            data["gamma"] = self.gamma
        elif self.kind == "power":
            data["c"] = self.c
            data["p"] = self.p
        else:
            data["points"] = [list(pt) for pt in self.points]
        if self.lipschitz_hint is not None:
            data["lipschitz_hint"] = self.lipschitz_hint
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ClassKSpec":
        """Deserialize from the JSON object form."""
        kind = data.get("kind")
        hint = data.get("lipschitz_hint")
        extra: dict[str, Any] = {"lipschitz_hint": float(hint) if hint is not None else None}
        if kind == "linear":
            return cls.linear(data.get("gamma", 1.0), **extra)
        if kind == "power":
            return cls.power(data.get("c", 1.0), data.get("p", 2.0), **extra)
        if kind == "table":
            return cls.table(data["points"], **extra)
        raise ValueError(f"Unknown class-K kind: {kind}")


def _check_nonneg(name: str, value: np.ndarray) -> None:
    if np.any(np.isnan(value)) or np.any(value < 0):
        raise DomainError(f"{name} must be nonnegative, got {value.min() if value.size else value}")


def _finish(value: np.ndarray, scalar: bool) -> ArrayLike:
    return float(value) if scalar else value


def alpha_eval(spec: ClassKSpec, r: ArrayLike) -> ArrayLike:
    """Return α(r); raises DomainError for negative r."""
    arr = np.asarray(r, dtype=float)
    _check_nonneg("r", arr)
    return _finish(spec(arr), arr.ndim == 0)


@dataclass(frozen=True)
class KLFlow:
    """The decay (β_α) or growth (κ_α) flow generated by a class-K spec."""

    spec: ClassKSpec
    direction: FlowDirection = "decay"

    @property
    def ode_step(self) -> float:
        return self.spec.ode_step

    @property
    def closed_form(self) -> bool:
        return self.spec.has_closed_form

    def __call__(self, r: ArrayLike, t: ArrayLike) -> ArrayLike:
        r_arr = np.asarray(r, dtype=float)
        t_arr = np.asarray(t, dtype=float)
        _check_nonneg("r", r_arr)
        _check_nonneg("t", t_arr)
        scalar = r_arr.ndim == 0 and t_arr.ndim == 0
        r_arr, t_arr = np.broadcast_arrays(r_arr, t_arr)

        if self.direction == "decay":
            out = self._decay_closed(r_arr, t_arr) if self.closed_form else self._rk4(r_arr, t_arr)
        else:
            out = self._growth_closed(r_arr, t_arr) if self.closed_form else self._rk4(r_arr, t_arr)
        return _finish(out, scalar)

    def _rate(self) -> float:
        return self.spec.gamma if self.spec.kind == "linear" else self.spec.c

    def _decay_closed(self, r: np.ndarray, t: np.ndarray) -> np.ndarray:
        spec = self.spec
        if spec.kind == "linear" or spec.p == 1:
            return r * np.exp(-self._rate() * t)
        q = 1.0 - spec.p
        safe_r = np.where(r > 0, r, 1.0)
        base = np.power(safe_r, q) + spec.c * (spec.p - 1.0) * t
        return np.where(r > 0, np.power(base, 1.0 / q), 0.0)

    def _growth_closed(self, r: np.ndarray, t: np.ndarray) -> np.ndarray:
        spec = self.spec
        ceiling = spec.blowup_ceiling
        if spec.kind == "linear" or spec.p == 1:
            rate = self._rate()
            out = r * np.exp(rate * t)
            over = out > ceiling
            if np.any(over):
                idx = np.flatnonzero(over.ravel())[0]
                r_bad, t_bad = float(r.ravel()[idx]), float(t.ravel()[idx])
                raise KappaBlowupError(r_bad, t_bad, math.log(ceiling / r_bad) / rate)
            return out

        escape = escape_time(spec, r)
        blown = t >= escape
        if np.any(blown):
            idx = np.flatnonzero(blown.ravel())[0]
            raise KappaBlowupError(
                float(r.ravel()[idx]), float(t.ravel()[idx]), float(np.ravel(escape)[idx])
            )
        q = 1.0 - spec.p
        safe_r = np.where(r > 0, r, 1.0)
        base = np.power(safe_r, q) - spec.c * (spec.p - 1.0) * t
        out = np.where(r > 0, np.power(np.where(r > 0, base, 1.0), 1.0 / q), 0.0)
        over = out > ceiling
        if np.any(over):
            idx = np.flatnonzero(over.ravel())[0]
            raise KappaBlowupError(
                float(r.ravel()[idx]), float(t.ravel()[idx]), float(np.ravel(escape)[idx])
            )
        return out

    def _rk4(self, r: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Fixed-step RK4; element i uses n_i = ceil(t_i / ode_step) equal steps."""
        spec = self.spec
        sign = -1.0 if self.direction == "decay" else 1.0
        y = np.array(r, dtype=float)
        n = np.ceil(t / spec.ode_step - 1e-12).astype(np.int64)
        n = np.where(t > 0, np.maximum(n, 1), 0)
        h = np.where(n > 0, t / np.maximum(n, 1), 0.0)
        total = int(n.max()) if n.size else 0

        def rhs(state: np.ndarray) -> np.ndarray:
            return sign * spec(np.maximum(state, 0.0))

        for k in range(total):
            hk = np.where(k < n, h, 0.0)
            k1 = rhs(y)
            k2 = rhs(y + 0.5 * hk * k1)
            k3 = rhs(y + 0.5 * hk * k2)
            k4 = rhs(y + hk * k3)
            y = y + hk / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if sign < 0:
                y = np.maximum(y, 0.0)
            else:
                over = y > spec.blowup_ceiling
                if np.any(over):
                    idx = np.flatnonzero(over.ravel())[0]
                    raise KappaBlowupError(
                        float(r.ravel()[idx]),
                        float(t.ravel()[idx]),
                        float((k + 1) * h.ravel()[idx]),
                    )
        return y


def beta_eval(spec: ClassKSpec, r: ArrayLike, t: ArrayLike) -> ArrayLike:
    """Return the decay flow β_α(r, t)."""
    return KLFlow(spec, "decay")(r, t)


def kappa_eval(spec: ClassKSpec, r: ArrayLike, t: ArrayLike) -> ArrayLike:
    """Return the growth flow κ_α(r, t).

    Raises:
        KappaBlowupError: if t is at or beyond the escape time b_α(r)
    """
    return KLFlow(spec, "growth")(r, t)


def escape_time(spec: ClassKSpec, r: ArrayLike) -> ArrayLike:
    """Return b_α(r), the end of the maximal existence interval of κ_α(r, ·)."""
    r_arr = np.asarray(r, dtype=float)
    _check_nonneg("r", r_arr)
    scalar = r_arr.ndim == 0

    if spec.kind == "linear" or (spec.kind == "power" and spec.p == 1):
        return _finish(np.full(r_arr.shape, np.inf), scalar)
    if spec.kind == "power":
        q = 1.0 - spec.p
        safe_r = np.where(r_arr > 0, r_arr, 1.0)
        b = np.where(r_arr > 0, np.power(safe_r, q) / (spec.c * (spec.p - 1.0)), np.inf)
        return _finish(b, scalar)

    # Tables extrapolate linearly, so the exact flow never blows up; report
    # when the ceiling is crossed instead.
    out = np.empty(r_arr.shape)
    for idx, r0 in np.ndenumerate(r_arr):
        out[idx] = _table_ceiling_time(spec, float(r0))
    return _finish(out, scalar)


def _table_ceiling_time(spec: ClassKSpec, r0: float) -> float:
    if r0 <= 0:
        return math.inf
    y, h = r0, spec.ode_step
    for k in range(ESCAPE_SEARCH_STEPS):
        k1 = float(spec(y))
        k2 = float(spec(y + 0.5 * h * k1))
        k3 = float(spec(y + 0.5 * h * k2))
        k4 = float(spec(y + h * k3))
        y += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if y > spec.blowup_ceiling:
            return (k + 1) * h
    return math.inf


def alpha_slope_bound(spec: ClassKSpec, R: float) -> float:
    """Return an upper bound on α' over [0, R]."""
    R = max(float(R), 0.0)
    if spec.kind == "linear":
        return spec.gamma
    if spec.kind == "power":
        return spec.c * spec.p * (R ** (spec.p - 1.0) if spec.p > 1 else 1.0)
    rs, al = spec._breakpoints
    slopes = np.diff(al) / np.diff(rs)
    active = slopes[rs[:-1] <= R]
    bound = float(active.max()) if active.size else float(slopes[0])
    if R > rs[-1]:
        bound = max(bound, spec._tail_slope)
    return bound


def beta_comparison_bound(spec: ClassKSpec, R: float) -> float:
    """Return L with α(r) <= L * r on [0, R], so that β_α(r, t) >= r e^{-L t}.

    Not necessarily the tightest such constant.
    """
    if not R > 0:
        raise DomainError(f"R must be positive, got {R}")
    if spec.lipschitz_hint is not None:
        return spec.lipschitz_hint
    if spec.kind == "linear":
        bound = spec.gamma
    elif spec.kind == "power":
        bound = spec.c * R ** (spec.p - 1.0)
    else:
        rs, _ = spec._breakpoints
        knots = rs[(rs > 0) & (rs <= R)]
        sampled = np.linspace(R / 1000.0, R, 1000)
        candidates = np.concatenate([knots, sampled, [R]])
        with np.errstate(over="ignore", invalid="ignore"):
            bound = float(np.max(spec(candidates) / candidates))

    if not math.isfinite(bound):
        raise ComparisonOverflowError(f"α(r)/r is not bounded in floating point on [0, {R}]")
    return float(bound)


def bundled_alphas() -> dict[str, ClassKSpec]:
    """The class-K functions exercised by the property checks."""
    r = np.round(np.arange(0.0, 10.0 + 1e-9, 0.05), 10)
    return {
        "linear": ClassKSpec.linear(1.0),
        "linear_2": ClassKSpec.linear(2.0),
        "quadratic": ClassKSpec.power(1.0, 2.0),
        "quadratic_table": ClassKSpec.table(zip(r, r**2 + r * 1e-9)),
    }
