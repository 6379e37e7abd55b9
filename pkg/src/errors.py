"""Exception hierarchy shared by the library and the CLI."""

from typing import Optional, Tuple


class ConvexJetsError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class InputError(ConvexJetsError):
    """Malformed or inconsistent input data."""

    def __init__(self, message: str, record: Optional[str] = None):
        self.record = record
        super().__init__(f"{record}: {message}" if record else message)


class DomainError(ConvexJetsError):
    """Argument outside the mathematical domain of an operation."""


class RegionError(ConvexJetsError):
    """Query point outside the region where an operation is defined."""

    exit_code = 2


class NumericalError(ConvexJetsError):
    """An iterative solver stopped at its cap without meeting tolerance."""

    exit_code = 3

    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.3e})")


class InfeasibleError(ConvexJetsError):
    """Tangency data violates the pairwise condition for the requested class."""

    exit_code = 2

    def __init__(self, message: str, pair: Optional[Tuple[int, int]] = None):
        self.pair = pair
        super().__init__(f"{message} (pair {pair[0]}, {pair[1]})" if pair else message)


class BackendDisagreementError(ConvexJetsError):
    """The two convex-envelope backends returned different values."""

    exit_code = 3

    def __init__(self, point, first: float, second: float, tolerance: float):
        self.point = point
        self.first = first
        self.second = second
        self.tolerance = tolerance
        super().__init__(
            f"envelope backends disagree at {list(point)}: "
            f"{first:.12g} vs {second:.12g} (tolerance {tolerance:.3e})"
        )
