"""Exception hierarchy for cbvf.

Every error raised on purpose by the toolkit derives from ``CBVFError`` and from
the builtin exception a caller would naturally catch (``ValueError`` for bad
arguments, ``ArithmeticError`` for numerical breakdown, ``LookupError`` for
registry misses).
"""

from typing import TYPE_CHECKING, Any, Optional

if TYPE_CHECKING:
    from cbvf.core.grid import ValueSeries
    from cbvf.systems.base import Trajectory


class CBVFError(Exception):
    """Base class for all cbvf errors."""


class DomainError(CBVFError, ValueError):
    """An argument lies outside the domain of an operation."""


class KappaBlowupError(CBVFError, ArithmeticError):
    """The growth flow escaped to infinity before the requested time."""

    def __init__(self, r: float, t: float, escape_time: float) -> None:
        self.r = r
        self.t = t
        self.escape_time = escape_time
        super().__init__(
            f"growth flow from r={r} blows up at t≈{escape_time:.6g} (requested t={t})"
        )


class ComparisonOverflowError(CBVFError, OverflowError):
    """No finite comparison constant exists in floating point."""


class DivergenceError(CBVFError, ArithmeticError):
    """A trajectory left every reasonable bound during integration."""

    def __init__(self, message: str, partial: Optional["Trajectory"] = None) -> None:
        self.partial = partial
        super().__init__(message)


class UnknownSystemError(CBVFError, LookupError):
    """Requested system name is not registered."""


class OutOfBoundsError(CBVFError, ValueError):
    """A query point lies outside a grid beyond the clamp tolerance."""


class NonFiniteValueError(CBVFError, ValueError):
    """A discretized function produced NaN or infinity."""

    def __init__(self, index: Any, value: float) -> None:
        self.index = index
        self.value = value
        super().__init__(f"non-finite value {value} at node {index}")


class ShapeMismatchError(CBVFError, ValueError):
    """Two fields or a field and a series do not share a grid."""


class NegativeObstacleError(CBVFError, ValueError):
    """The immediate safety function handed to the solver has negative values."""


class StiffnessError(CBVFError, ArithmeticError):
    """The CFL condition forces an unusably small time step."""


class TruncationError(CBVFError, RuntimeError):
    """The solver hit its step budget before the last checkpoint."""

    def __init__(self, message: str, partial: "ValueSeries") -> None:
        self.partial = partial
        super().__init__(message)


class CapacityError(CBVFError, ValueError):
    """A brute-force enumeration would exceed its size guard."""


class ConfigError(CBVFError, ValueError):
    """A run configuration failed to parse or validate."""

    def __init__(self, message: str, location: Optional[str] = None) -> None:
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)
