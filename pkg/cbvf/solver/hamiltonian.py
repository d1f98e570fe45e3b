"""Hamiltonian evaluation: H(x, λ) = max_u λ·f(x, u) and H_α = H + α(r)."""

import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Literal, Optional, Union

import numpy as np

from cbvf.core.classk import ClassKSpec, alpha_eval
from cbvf.systems.base import System

logger = logging.getLogger(__name__)

AFFINE_TOL = 1e-9
# Fractions of each control interval used by the collinearity check; the
# asymmetric point catches odd nonlinearities that pass a midpoint test.
AFFINE_FRACTIONS = (0.0, 1.0 / 3.0, 0.5, 1.0)

CandidateMode = Literal["finite", "vertices", "sampled"]


@dataclass(frozen=True, eq=False)
class ControlCandidates:
    """Controls over which the Hamiltonian is maximized, sorted lexicographically."""

    controls: np.ndarray
    mode: CandidateMode

    @property
    def exact(self) -> bool:
        return self.mode in ("finite", "vertices")

    def __len__(self) -> int:
        return len(self.controls)


def affinity_states(dim: int) -> np.ndarray:
    """Deterministic test states for the affinity check: a 5-point lattice on [-2, 2] per axis."""
    axis = np.linspace(-2.0, 2.0, 5)
    return np.array(list(itertools.product(axis, repeat=dim)))


def is_control_affine(system: System, tol: float = AFFINE_TOL) -> bool:
    """Check whether f is affine along every control axis of a box control set.

    For each axis, f is sampled at several points of [lower, upper] (the
    other axes held at their lower bound, midpoint and upper bound) and the
    samples must be collinear within ``tol`` relative to their magnitude.
    """
    cs = system.control_set
    if cs.kind != "box":
        return False
    states = affinity_states(system.dim)
    lower, upper = np.asarray(cs.lower), np.asarray(cs.upper)
    mid = 0.5 * (lower + upper)
    with np.errstate(all="ignore"):
        for axis in range(cs.dim):
            if upper[axis] == lower[axis]:
                continue
            for base in (lower, mid, upper):
                outputs = []
                for frac in AFFINE_FRACTIONS:
                    u = base.copy()
                    u[axis] = lower[axis] + frac * (upper[axis] - lower[axis])
                    outputs.append(system.f(states, u))
                first, last = outputs[0], outputs[-1]
                scale = 1.0 + np.abs(first) + np.abs(last)
                for frac, out in zip(AFFINE_FRACTIONS[1:-1], outputs[1:-1]):
                    line = first + frac * (last - first)
                    if not np.all(np.abs(out - line) <= tol * scale):
                        return False
    return True


@lru_cache(maxsize=64)
def control_candidates(system: System, resolution: Optional[int] = None) -> ControlCandidates:
    """Finite U: all values; control-affine box: vertices; otherwise a tensor sample."""
    cs = system.control_set
    if cs.kind == "finite":
        return ControlCandidates(cs.samples(), "finite")
    if is_control_affine(system):
        logger.debug("'%s' is control affine; maximizing over box vertices", system.name)
        return ControlCandidates(cs.vertices(), "vertices")
    logger.debug(
        "'%s' is not control affine; sampling %d points per control axis",
        system.name,
        resolution or cs.sample_count,
    )
    return ControlCandidates(cs.samples(resolution), "sampled")


def flux_table(system: System, states: np.ndarray, controls: np.ndarray) -> np.ndarray:
    """f at every (control, state) pair, shape ``(k, N, n)``."""
    states = np.asarray(states, dtype=float).reshape(-1, system.dim)
    return np.stack([system.f(states, u) for u in controls])


def maximize_over_controls(flux: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """max_k λ·F[k] per state for a precomputed flux table."""
    return np.einsum("knd,nd->kn", flux, lam).max(axis=0)


def ham_max(
    system: System, x: Any, lam: Any, resolution: Optional[int] = None
) -> Union[float, np.ndarray]:
    """H(x, λ) = max_{u∈U} λ·f(x, u), batched over leading axes of x and λ."""
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    single = x.ndim <= 1 and lam.ndim <= 1
    x2 = np.atleast_1d(x).reshape(-1, system.dim)
    lam2 = np.atleast_1d(lam).reshape(-1, system.dim)
    x2, lam2 = np.broadcast_arrays(x2, lam2)

    candidates = control_candidates(system, resolution)
    out = maximize_over_controls(flux_table(system, x2, candidates.controls), lam2)
    return float(out[0]) if single else out


def ham_alpha(
    system: System,
    alpha: ClassKSpec,
    x: Any,
    r: Any,
    lam: Any,
    resolution: Optional[int] = None,
) -> Union[float, np.ndarray]:
    """H_α(x, r, λ) = max_{u∈U} λ·f(x, u) + α(r).

    Raises:
        DomainError: for negative r
    """
    a = alpha_eval(alpha, r)
    h = ham_max(system, x, lam, resolution)
    if isinstance(h, float) and np.ndim(a) == 0:
        return h + float(a)
    return np.asarray(h) + np.asarray(a)
