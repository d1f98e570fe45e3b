"""Bundled example systems, registered on import."""

import numpy as np

from cbvf.systems.base import ControlSet, System, SystemRegistry

UNIT_BOX = ControlSet.box([-1.0], [1.0])
BANG_BANG = ControlSet.finite([[-1.0], [1.0]])


def scalar_example_dynamics(x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """ẋ = x + (x + x³)/(1 + |x|) u."""
    s = x[..., 0]
    gain = (s + s**3) / (1.0 + np.abs(s))
    return (s + gain * u[..., 0])[..., None]


def counterexample_inside(x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Dynamics used on the closed unit disk: ẋ₁ = 0, ẋ₂ = u."""
    x = np.asarray(x, dtype=float)
    zeros = np.zeros(np.broadcast_shapes(x.shape[:-1], u.shape[:-1]))
    return np.stack([zeros, zeros + u[..., 0]], axis=-1)


def counterexample_outside(x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Dynamics used outside the unit disk: ẋ = x (1 − ‖x‖)/‖x‖ + (0, u)."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    radial = x * (1.0 - r) / np.where(r > 0, r, 1.0)
    return radial + counterexample_inside(x, u)


def counterexample_dynamics(x: np.ndarray, u: np.ndarray) -> np.ndarray:
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    return np.where(r <= 1.0, counterexample_inside(x, u), counterexample_outside(x, u))


def single_integrator_dynamics(x: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.broadcast_to(u, np.broadcast_shapes(x.shape, u.shape)).astype(float)


def double_integrator_dynamics(x: np.ndarray, u: np.ndarray) -> np.ndarray:
    shape = np.broadcast_shapes(x.shape[:-1], u.shape[:-1])
    velocity = np.broadcast_to(x[..., 1], shape)
    accel = np.broadcast_to(u[..., 0], shape)
    return np.stack([velocity, accel], axis=-1)


SCALAR_EXAMPLE = System(
    name="scalar_example",
    dim=1,
    dynamics=scalar_example_dynamics,
    control_set=UNIT_BOX,
    description="ẋ = x + (x + x³)/(1 + |x|) u with U = [-1, 1]; h = 1 − |x| is a "
    "nonsmooth barrier for it",
)

COUNTEREXAMPLE_2D = System(
    name="counterexample_2d",
    dim=2,
    dynamics=counterexample_dynamics,
    control_set=BANG_BANG,
    description="Vertical bang-bang control inside the unit disk, radial attraction to the "
    "unit circle outside; 1 − ‖x‖² satisfies the classical inequality yet the disk is not "
    "control invariant",
)

SINGLE_INTEGRATOR = System(
    name="single_integrator",
    dim=1,
    dynamics=single_integrator_dynamics,
    control_set=UNIT_BOX,
    lipschitz_hint=1.0,
    description="ẋ = u with U = [-1, 1]",
)

DOUBLE_INTEGRATOR = System(
    name="double_integrator",
    dim=2,
    dynamics=double_integrator_dynamics,
    control_set=UNIT_BOX,
    lipschitz_hint=1.0,
    description="ẋ₁ = x₂, ẋ₂ = u with U = [-1, 1]",
)

for _system in (SCALAR_EXAMPLE, COUNTEREXAMPLE_2D, SINGLE_INTEGRATOR, DOUBLE_INTEGRATOR):
    SystemRegistry.register(_system)
