"""Exception hierarchy for the qops package.

Every error derives from ``QOpsError`` and also from the closest builtin,
so callers may catch either the package error or the builtin one.
"""

from typing import Optional


class QOpsError(Exception):
    """Base class for all qops errors."""


class DomainError(QOpsError, ValueError):
    """Parameters outside the domain of an operation."""


class EmptySectorError(DomainError):
    """Requested sector has no members (l > M * cap)."""

    def __init__(self, sites: int, degree: int, cap: int):
        self.sites = sites
        self.degree = degree
        self.cap = cap
        super().__init__(
            f"sector l={degree} is empty for M={sites} sites capped at {cap}"
        )


class NotInSectorError(QOpsError, LookupError):
    """Monomial is not a member of the basis."""


class PoleError(QOpsError, ZeroDivisionError):
    """A denominator Pochhammer of a standard series vanishes."""

    def __init__(self, parameter_index: int, k: int, value: complex):
        self.parameter_index = parameter_index
        self.k = k
        self.value = value
        super().__init__(
            f"pole in denominator parameter b[{parameter_index}]={value!r} "
            f"at k={k}"
        )


class SingularityError(QOpsError, ArithmeticError):
    """Operator formula hits a singular point."""

    def __init__(self, message: str, s: Optional[int] = None):
        self.s = s
        super().__init__(message)


class NonFiniteError(QOpsError, ArithmeticError):
    """A computation produced NaN or infinity."""


class DivergenceError(QOpsError, ArithmeticError):
    """Fock-space trace did not decay within the truncation policy."""

    def __init__(self, message: str, observed_ratio: float, predicted_ratio: float):
        self.observed_ratio = observed_ratio
        self.predicted_ratio = predicted_ratio
        super().__init__(message)


class UnsupportedSpinError(QOpsError, NotImplementedError):
    """Operation requires integer spin."""


class ConsistencyError(QOpsError, RuntimeError):
    """Internal cross-check failed."""


class ConfigurationError(QOpsError, ValueError):
    """Invalid run configuration; the CLI exits with status 2."""
