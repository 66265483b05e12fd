"""
Exception hierarchy for prodist.

Validation failures derive from DistributionError (and ValueError), so callers
that only care about "bad input" can catch either.
"""

from typing import Optional


class ProdistError(Exception):
    """Base class for every error raised by prodist."""


# ==============================================================================
# Distribution validation
# ==============================================================================

class DistributionError(ProdistError, ValueError):
    """Raised when a Distribution violates its invariants."""


class NegativeProbability(DistributionError):
    """A probability is below zero."""

    def __init__(self, label: str, value):
        self.label = label
        self.value = value
        super().__init__(f"Negative probability {value} at label '{label}'")


class NonFiniteProbability(DistributionError):
    """A float probability is NaN or infinite."""

    def __init__(self, label: str, value):
        self.label = label
        self.value = value
        super().__init__(f"Probability {value} at label '{label}' is not a finite number")


class SumNotOne(DistributionError):
    """Probabilities do not sum to one (exactly, or within tolerance in float mode)."""

    def __init__(self, total, deviation):
        self.total = total
        self.deviation = deviation
        super().__init__(f"Probabilities sum to {total} (deviation {deviation})")


class DuplicateLabel(DistributionError):
    """A label occurs more than once in the alphabet."""

    def __init__(self, label: str):
        self.label = label
        super().__init__(f"Duplicate label '{label}'")


class FieldMismatch(DistributionError):
    """Two operands live in different numeric fields."""


# ==============================================================================
# Engine and bound preconditions
# ==============================================================================

class TooLarge(ProdistError):
    """An exact engine refused an instance that exceeds its guard."""

    def __init__(self, engine: str, size: int, limit: int):
        self.engine = engine
        self.size = size
        self.limit = limit
        super().__init__(f"{engine}: instance size {size} exceeds guard {limit}")


class NotTwoPoint(ProdistError):
    """The pair differs at some label other than the two designated points."""


class PbarNotPositive(ProdistError):
    """The minimum differing probability is zero, so the square-root bounds do not apply."""

    def __init__(self, pbar: Optional[object] = None):
        self.pbar = pbar
        super().__init__(f"Bound inapplicable: minimum differing probability is {pbar}, must be > 0")


class NonpositiveMass(ProdistError):
    """A two-point mass p or p' is not strictly positive."""


class OutOfRange(ProdistError, ValueError):
    """An argument lies outside the domain of the operation."""


class BoundViolation(ProdistError, AssertionError):
    """An exact distance exceeded an applicable upper bound."""

    def __init__(self, bound: str, exact, value):
        self.bound = bound
        self.exact = exact
        self.value = value
        super().__init__(f"{bound} violated: exact {exact} > bound {value}")
