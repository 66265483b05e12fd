"""
Numeric fields for prodist.

Two backends are supported:

- RATIONAL: every probability is a ``fractions.Fraction``; nothing is ever rounded.
- FLOAT: probabilities are Python floats; products of many probabilities are
  formed in the log domain and differences ``|e^a - e^b|`` are evaluated in a
  max-factored form so that n in the thousands does not underflow.

Closed-form bounds are always evaluated in float and rounded *up* by a few ulps
(see ``round_up``) so that comparisons ``exact <= bound`` cannot fail because of
rounding on the right-hand side.
"""

import math
from enum import Enum
from fractions import Fraction
from typing import Any, Union

import numpy as np
from scipy.special import gammaln

Numeric = Union[Fraction, float, int]

DEFAULT_UPWARD_ULPS = 4
DEFAULT_SUM_TOLERANCE = 1e-12
DEFAULT_EQUALITY_TOLERANCE = 1e-15


class NumericField(str, Enum):
    RATIONAL = "rational"
    FLOAT = "float"


def field_of(value: Any) -> NumericField:
    """Infer the field of a single value (ints count as rational)."""
    if isinstance(value, (Fraction, int)) and not isinstance(value, bool):
        return NumericField.RATIONAL
    return NumericField.FLOAT


def to_field(value: Any, field: NumericField) -> Numeric:
    """
    Convert a user-supplied probability into the requested field.

    Strings such as "3/10" or "0.1" are accepted in both modes. Floats entering
    rational mode go through their decimal repr, so 0.1 becomes 1/10 rather than
    the binary expansion of the nearest double.
    """
    if field is NumericField.RATIONAL:
        if isinstance(value, Fraction):
            return value
        if isinstance(value, int) and not isinstance(value, bool):
            return Fraction(value)
        if isinstance(value, float):
            return Fraction(repr(value))
        return Fraction(str(value).strip())
    if isinstance(value, str):
        return float(Fraction(value.strip()))
    return float(value)


def zero(field: NumericField) -> Numeric:
    return Fraction(0) if field is NumericField.RATIONAL else 0.0


def one(field: NumericField) -> Numeric:
    return Fraction(1) if field is NumericField.RATIONAL else 1.0


def render(value: Any) -> Any:
    """JSON-friendly rendering: Fractions become "a/b" strings, numpy scalars become floats."""
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, np.generic):
        return value.item()
    return value


def round_up(value: Numeric, ulps: int = DEFAULT_UPWARD_ULPS) -> float:
    """Float value of ``value`` moved ``ulps`` steps towards +inf."""
    x = float(value)
    if math.isinf(x) or math.isnan(x):
        return x
    return math.nextafter(x, math.inf, steps=ulps)


def exact_sum(values) -> Numeric:
    """Sum in the field of the inputs: exact for Fractions, fsum for floats."""
    values = list(values)
    if values and all(isinstance(v, (Fraction, int)) for v in values):
        return sum(values, Fraction(0))
    return math.fsum(float(v) for v in values)


# ==============================================================================
# Log-domain helpers (float backend)
# ==============================================================================

def safe_log(x: float) -> float:
    """log(x) with log(0) = -inf."""
    return math.log(x) if x > 0 else -math.inf


def abs_exp_diff(a: float, b: float) -> float:
    """Stable ``|e^a - e^b|`` for log-domain values (either may be -inf)."""
    hi, lo = (a, b) if a >= b else (b, a)
    if hi == -math.inf:
        return 0.0
    if lo == -math.inf:
        return math.exp(hi)
    return math.exp(hi) * -math.expm1(lo - hi)


def log_abs_exp_diff(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Vectorised ``log|e^a - e^b|`` (``-inf`` where the two agree or both are ``-inf``).

    Returned in the log domain so callers can add coefficient logs before exponentiating.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    hi = np.maximum(a, b)
    lo = np.minimum(a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        gap = np.where(np.isneginf(lo), -np.inf, lo - hi)
        gap = np.where(np.isneginf(hi), -np.inf, gap)
        tail = np.log(-np.expm1(gap))
        out = hi + tail
    return np.where(np.isneginf(hi), -np.inf, out)


def log_factorials(n: int) -> np.ndarray:
    """Table of log(k!) for k = 0..n via the log-gamma function."""
    return gammaln(np.arange(n + 1, dtype=float) + 1.0)


def log_binomial(n, k):
    """log C(n, k) through gammaln; works elementwise on arrays."""
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    return gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)
