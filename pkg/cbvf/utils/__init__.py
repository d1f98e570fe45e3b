"""Utilities module - expressions, seeded sampling and parallel helpers."""

from cbvf.utils.expressions import Expression, dynamics_function, state_function
from cbvf.utils.parallel import parallel_map, thread_count
from cbvf.utils.sampling import Lcg64

__all__ = [
    # Expressions
    "Expression",
    "state_function",
    "dynamics_function",
    # Sampling
    "Lcg64",
    # Parallel
    "parallel_map",
    "thread_count",
]
