"""Systems module - dynamics, control sets, signals and bundled examples."""

from cbvf.systems.base import (
    ControlSet,
    ControlSignal,
    System,
    SystemRegistry,
    Trajectory,
    builtin_system,
    eval_f,
    flow,
    rk4_step,
)
from cbvf.systems.builtin import (
    COUNTEREXAMPLE_2D,
    DOUBLE_INTEGRATOR,
    SCALAR_EXAMPLE,
    SINGLE_INTEGRATOR,
)

__all__ = [
    "ControlSet",
    "ControlSignal",
    "System",
    "SystemRegistry",
    "Trajectory",
    "builtin_system",
    "eval_f",
    "flow",
    "rk4_step",
    "SCALAR_EXAMPLE",
    "COUNTEREXAMPLE_2D",
    "SINGLE_INTEGRATOR",
    "DOUBLE_INTEGRATOR",
]
