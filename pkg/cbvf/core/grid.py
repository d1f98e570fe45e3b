"""Rectangular grids, scalar fields on them, and the stencils the solver needs."""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Literal, Optional, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from cbvf.core.errors import (
    DomainError,
    NonFiniteValueError,
    OutOfBoundsError,
    ShapeMismatchError,
)

logger = logging.getLogger(__name__)

MAX_DIM = 3
Stencil = Literal["upwind1", "eno2"]


def _as_tuple(values: Any, cast: type) -> tuple:
    if np.isscalar(values):
        return (cast(values),)
    return tuple(cast(v) for v in values)


@dataclass(frozen=True)
class Grid:
    """Uniform rectangular grid with ``counts[i]`` nodes from ``lo[i]`` to ``hi[i]``."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "lo", _as_tuple(self.lo, float))
        object.__setattr__(self, "hi", _as_tuple(self.hi, float))
        object.__setattr__(self, "counts", _as_tuple(self.counts, int))

        if not (len(self.lo) == len(self.hi) == len(self.counts)):
            raise ValueError(
                f"lo, hi and counts must have equal length, got "
                f"{len(self.lo)}, {len(self.hi)}, {len(self.counts)}"
            )
        if not 1 <= len(self.lo) <= MAX_DIM:
            raise ValueError(f"grid dimension must be 1..{MAX_DIM}, got {len(self.lo)}")
        for axis, (a, b, n) in enumerate(zip(self.lo, self.hi, self.counts)):
            if not a < b:
                raise ValueError(f"axis {axis}: lo must be below hi, got lo={a}, hi={b}")
            if n < 3:
                raise ValueError(f"axis {axis}: need at least 3 nodes, got {n}")

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((b - a) / (n - 1) for a, b, n in zip(self.lo, self.hi, self.counts))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        """Node coordinates along each axis."""
        return tuple(np.linspace(a, b, n) for a, b, n in zip(self.lo, self.hi, self.counts))

    @cached_property
    def _states(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        states = np.stack([m.ravel() for m in mesh], axis=-1)
        states.flags.writeable = False
        return states

    def states(self) -> np.ndarray:
        """All node coordinates, row-major, shape ``(size, dim)``."""
        return self._states

    def node_index(self, multi_index: tuple[int, ...]) -> int:
        """Row-major flat index of a node."""
        return int(np.ravel_multi_index(tuple(multi_index), self.counts))

    def multi_index(self, node: int) -> tuple[int, ...]:
        """Per-axis indices of a flat node index."""
        return tuple(int(i) for i in np.unravel_index(node, self.counts))

    def interior_mask(self, band: int) -> np.ndarray:
        """Boolean array (grid shape) that is False within ``band`` cells of the boundary."""
        mask = np.ones(self.counts, dtype=bool)
        if band <= 0:
            return mask
        for axis, n in enumerate(self.counts):
            index: list[Any] = [slice(None)] * self.dim
            index[axis] = slice(0, min(band, n))
            mask[tuple(index)] = False
            index[axis] = slice(max(n - band, 0), n)
            mask[tuple(index)] = False
        return mask

    def contains(self, x: np.ndarray, tol: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lo = np.asarray(self.lo) - tol
        hi = np.asarray(self.hi) + tol
        return np.all((x >= lo) & (x <= hi), axis=-1)

    def to_dict(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi), "counts": list(self.counts)}

    @classmethod
    def from_dict(cls, data: dict) -> "Grid":
        return cls(lo=data["lo"], hi=data["hi"], counts=data["counts"])


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One real value per grid node, stored in grid shape and read-only."""

    grid: Grid
    values: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=float, copy=True)
        if arr.size != self.grid.size:
            raise ShapeMismatchError(
                f"field '{self.label}' has {arr.size} values, grid has {self.grid.size} nodes"
            )
        arr = arr.reshape(self.grid.shape)
        bad = ~np.isfinite(arr)
        if np.any(bad):
            flat = int(np.flatnonzero(bad.ravel())[0])
            raise NonFiniteValueError(self.grid.multi_index(flat), float(arr.ravel()[flat]))
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def flat(self) -> np.ndarray:
        """Values in row-major node order."""
        return self.values.ravel()

    def with_values(self, values: np.ndarray, label: Optional[str] = None) -> "ScalarField":
        return ScalarField(self.grid, values, self.label if label is None else label)

    def max(self) -> float:
        return float(self.values.max())

    def min(self) -> float:
        return float(self.values.min())

    @cached_property
    def _interpolator(self) -> RegularGridInterpolator:
        return RegularGridInterpolator(
            self.grid.axes, self.values, method="linear", bounds_error=False, fill_value=None
        )


@dataclass(frozen=True)
class ValueSeries:
    """Snapshots of a value function at increasing horizons starting from 0."""

    checkpoints: tuple[float, ...]
    fields: tuple[ScalarField, ...]
    steps: int = 0
    notes: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "checkpoints", tuple(float(t) for t in self.checkpoints))
        object.__setattr__(self, "fields", tuple(self.fields))
        if not self.fields or len(self.fields) != len(self.checkpoints):
            raise ValueError(
                f"need one field per checkpoint, got {len(self.fields)} fields for "
                f"{len(self.checkpoints)} checkpoints"
            )
        if self.checkpoints[0] != 0.0:
            raise ValueError(f"first checkpoint must be 0, got {self.checkpoints[0]}")
        if any(b <= a for a, b in zip(self.checkpoints, self.checkpoints[1:])):
            raise ValueError(f"checkpoints must be strictly increasing: {self.checkpoints}")
        grid = self.fields[0].grid
        for f in self.fields[1:]:
            if f.grid != grid:
                raise ShapeMismatchError("all fields of a series must share one grid")

    @property
    def grid(self) -> Grid:
        return self.fields[0].grid

    @property
    def initial(self) -> ScalarField:
        return self.fields[0]

    @property
    def final(self) -> ScalarField:
        return self.fields[-1]

    @property
    def horizon(self) -> float:
        return self.checkpoints[-1]

    def at(self, horizon: float, tol: float = 1e-9) -> ScalarField:
        """Field recorded at ``horizon``."""
        for t, f in zip(self.checkpoints, self.fields):
            if abs(t - horizon) <= tol:
                return f
        raise DomainError(f"no checkpoint at T={horizon}; available: {self.checkpoints}")

    def __len__(self) -> int:
        return len(self.fields)


def require_same_grid(a: ScalarField, b: ScalarField) -> None:
    if a.grid != b.grid:
        raise ShapeMismatchError(
            f"fields '{a.label}' and '{b.label}' live on different grids: "
            f"{a.grid.to_dict()} vs {b.grid.to_dict()}"
        )


def _take(arr: np.ndarray, axis: int, start: int, stop: Optional[int]) -> np.ndarray:
    index: list[Any] = [slice(None)] * arr.ndim
    index[axis] = slice(start, stop)
    return arr[tuple(index)]


def _pick_smaller(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.where(np.abs(a) <= np.abs(b), a, b)


def upwind_gradients(
    field: ScalarField, scheme: Stencil = "upwind1"
) -> tuple[np.ndarray, np.ndarray]:
    """One-sided spatial derivatives at every node.

    Ghost nodes beyond the boundary continue the boundary slope linearly.

    Args:
        field: Field to differentiate
        scheme: ``"upwind1"`` for first-order differences, ``"eno2"`` for
            second-order ENO

    Returns:
        (left, right), each of shape ``(dim, *grid.shape)``
    """
    return one_sided_differences(field.values, field.grid.spacing, scheme)


def one_sided_differences(
    values: np.ndarray, spacing: tuple[float, ...], scheme: Stencil = "upwind1"
) -> tuple[np.ndarray, np.ndarray]:
    """Array-level kernel of :func:`upwind_gradients` used inside the time stepper."""
    if scheme not in ("upwind1", "eno2"):
        raise ValueError(f"Unknown stencil: {scheme}")

    lefts, rights = [], []
    for axis, dx in enumerate(spacing):
        pad = [(2, 2) if a == axis else (0, 0) for a in range(values.ndim)]
        padded = np.pad(values, pad, mode="reflect", reflect_type="odd")
        n = values.shape[axis]

        diffs = np.diff(padded, axis=axis) / dx
        left = _take(diffs, axis, 1, n + 1)
        right = _take(diffs, axis, 2, n + 2)

        if scheme == "eno2":
            second = np.diff(padded, n=2, axis=axis) / (2.0 * dx * dx)
            s_prev = _take(second, axis, 0, n)
            s_here = _take(second, axis, 1, n + 1)
            s_next = _take(second, axis, 2, n + 2)
            left = left + dx * _pick_smaller(s_prev, s_here)
            right = right - dx * _pick_smaller(s_here, s_next)

        lefts.append(left)
        rights.append(right)
    return np.stack(lefts), np.stack(rights)


def central_gradient(field: ScalarField) -> np.ndarray:
    """Central differences (one-sided second order at the edges), shape ``(dim, *shape)``."""
    grads = np.gradient(field.values, *field.grid.spacing, edge_order=2)
    if field.grid.dim == 1:
        grads = [grads]
    return np.stack(grads)


def lipschitz_estimate(field: ScalarField) -> float:
    """Largest Euclidean norm of the steepest one-sided slopes over all nodes."""
    left, right = upwind_gradients(field)
    steepest = np.maximum(np.abs(left), np.abs(right))
    return float(np.sqrt((steepest**2).sum(axis=0)).max())


def sup_distance(a: ScalarField, b: ScalarField, mask: Optional[np.ndarray] = None) -> float:
    """max |a − b| over the grid (or over ``mask``)."""
    require_same_grid(a, b)
    diff = np.abs(a.values - b.values)
    if mask is not None:
        diff = diff[mask]
    return float(diff.max()) if diff.size else 0.0


def query_points(grid: Grid, x: Any) -> tuple[np.ndarray, bool]:
    """Validate query states against the grid.

    Points up to half a cell outside the grid are clamped onto it (logged);
    anything further out raises OutOfBoundsError.

    Returns:
        (points of shape ``(k, dim)``, whether a single state was given)
    """
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 0 or (pts.ndim == 1 and pts.shape[0] == grid.dim)
    pts = pts.reshape(-1, grid.dim)

    half_cell = 0.5 * np.asarray(grid.spacing)
    lo, hi = np.asarray(grid.lo), np.asarray(grid.hi)
    if np.any(pts < lo - half_cell) or np.any(pts > hi + half_cell):
        bad = pts[np.any((pts < lo - half_cell) | (pts > hi + half_cell), axis=1)][0]
        raise OutOfBoundsError(
            f"state {bad.tolist()} lies outside grid [{grid.lo}, {grid.hi}] "
            f"by more than half a cell"
        )
    outside = (pts < lo) | (pts > hi)
    if np.any(outside):
        count = int(outside.any(axis=1).sum())
        logger.warning("Clamping %d point(s) onto the grid boundary", count)
        pts = np.clip(pts, lo, hi)
    return pts, single


def interpolate(field: ScalarField, x: Union[np.ndarray, list, float]) -> Union[float, np.ndarray]:
    """Multilinear interpolation of ``field`` at one state or a batch ``(k, dim)``."""
    pts, single = query_points(field.grid, x)
    out = field._interpolator(pts)
    return float(out[0]) if single else out


def discretize(
    grid: Grid, fn: Callable[[np.ndarray], Any], label: str = ""
) -> ScalarField:
    """Sample ``fn`` at every node.

    ``fn`` receives the ``(size, dim)`` array of node states and should return
    one value per node; functions returning a scalar are evaluated node by node.
    """
    states = grid.states()
    values = np.asarray(fn(states), dtype=float)
    if values.shape != (grid.size,):
        values = np.array([float(np.asarray(fn(s), dtype=float)) for s in states])
    bad = ~np.isfinite(values)
    if np.any(bad):
        flat = int(np.flatnonzero(bad)[0])
        raise NonFiniteValueError(grid.multi_index(flat), float(values[flat]))
    return ScalarField(grid, values, label)
