"""
Closed-form upper bounds on delta(P^n, Q^n) and the inequalities their proofs rest on.

Every bound is evaluated in float and rounded up by a few ulps, so a comparison
``exact <= bound`` with an exact Fraction on the left never fails on rounding.
0^0 is taken to be 1 throughout.
"""

import logging
import math
from fractions import Fraction
from typing import Annotated, Any, Dict, NamedTuple, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PlainSerializer
from scipy.special import xlog1py, xlogy

from prodist.core.distribution import Distribution, diff_profile, variational_distance
from prodist.core.errors import BoundViolation, NonpositiveMass, NotTwoPoint, OutOfRange, PbarNotPositive, TooLarge
from prodist.core.family import TwoPointFamily
from prodist.core.numeric import (
    DEFAULT_EQUALITY_TOLERANCE,
    DEFAULT_SUM_TOLERANCE,
    DEFAULT_UPWARD_ULPS,
    Numeric,
    NumericField,
    render,
    round_up,
)
from prodist.engines import exact as engines
from prodist.engines.sampling import McEstimate, mc_distance

logger = logging.getLogger("prodist.proof.bounds")

SerializedNumber = Annotated[Any, PlainSerializer(render, when_used="json")]

MAXPOT_RELATIVE_TOLERANCE = 1e-12


class LinearBound(NamedTuple):
    value: float
    capped: bool


class ChainSummary(BaseModel):
    """Per-step view of the square-root bound assembled along a two-point chain."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    step_distances: list[SerializedNumber]
    per_step_first: list[SerializedNumber]
    per_step_second: list[SerializedNumber]
    sum_first: SerializedNumber
    sum_second: SerializedNumber
    product_distance: Optional[SerializedNumber] = None
    sum_step_product_distances: Optional[SerializedNumber] = None


class BoundReport(BaseModel):
    """Every applicable upper bound for a (P, Q, n) query, plus the distance when known."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    n: int = Field(ge=1)
    delta_1: SerializedNumber
    pbar: Optional[SerializedNumber] = None
    linear: float
    linear_capped: bool = False
    lemma1_first: Optional[float] = None
    lemma1_second: Optional[float] = None
    applicable: Dict[str, bool] = Field(default_factory=dict)
    exact: Optional[SerializedNumber] = None
    exact_engine: Optional[str] = None
    mc_estimate: Optional[McEstimate] = None
    chain: Optional[ChainSummary] = None

    def bounds(self) -> Dict[str, float]:
        """Applicable bound values by name."""
        out = {"linear": self.linear}
        if self.lemma1_first is not None:
            out["lemma1_first"] = self.lemma1_first
        if self.lemma1_second is not None:
            out["lemma1_second"] = self.lemma1_second
        return out

    def assert_dominance(self, exact: Optional[Numeric] = None) -> None:
        """Raise BoundViolation if the exact distance exceeds any applicable bound."""
        value = self.exact if exact is None else exact
        if value is None:
            return
        for name, bound in self.bounds().items():
            if value > bound:
                raise BoundViolation(name, value, bound)


# ==============================================================================
# Preconditions
# ==============================================================================

def _check_n(n: int) -> None:
    if n < 1:
        raise OutOfRange(f"n must be a positive integer, got {n}")


def _check_masses(p: Numeric, p_prime: Numeric, sum_tolerance: float = DEFAULT_SUM_TOLERANCE) -> None:
    if not (p > 0 and p_prime > 0):
        raise NonpositiveMass(f"Two-point masses must be positive (p={p}, p'={p_prime})")
    # float masses may overshoot one by the validation tolerance
    slack = 0 if isinstance(p + p_prime, (Fraction, int)) else sum_tolerance
    if p + p_prime > 1 + slack:
        raise OutOfRange(f"p + p' = {p + p_prime} exceeds one")


def _alpha_beta(p: Numeric, p_prime: Numeric) -> Tuple[float, float, float]:
    mass = float(p + p_prime)
    return float(p) / mass, float(p_prime) / mass, mass


# ==============================================================================
# Distance bounds
# ==============================================================================

def linear_bound(delta_1: Numeric, n: int, ulps: int = DEFAULT_UPWARD_ULPS) -> LinearBound:
    """n * delta(P, Q), capped at one with a flag (the uncapped form is never below the cap)."""
    _check_n(n)
    if not 0 <= delta_1 <= 1:
        raise OutOfRange(f"delta must lie in [0, 1], got {delta_1}")
    raw = n * delta_1
    if raw > 1:
        return LinearBound(1.0, True)
    if raw == 0:
        return LinearBound(0.0, False)
    return LinearBound(round_up(raw, ulps), False)


def lemma1_first_bound(delta_1: Numeric, pbar: Numeric, n: int, ulps: int = DEFAULT_UPWARD_ULPS) -> float:
    """sqrt(1/(pi pbar)) * sqrt(n + 1/pbar) * delta."""
    _check_n(n)
    if pbar is None or not pbar > 0:
        raise PbarNotPositive(pbar)
    if delta_1 == 0:
        return 0.0
    pb = float(pbar)
    return round_up(math.sqrt(1.0 / (math.pi * pb)) * math.sqrt(n + 1.0 / pb) * float(delta_1), ulps)


def lemma1_second_bound(delta_1: Numeric, pbar: Numeric, n: int, ulps: int = DEFAULT_UPWARD_ULPS) -> float:
    """sqrt(n / (2 pbar)) * delta."""
    _check_n(n)
    if pbar is None or not pbar > 0:
        raise PbarNotPositive(pbar)
    if delta_1 == 0:
        return 0.0
    return round_up(math.sqrt(n / (2.0 * float(pbar))) * float(delta_1), ulps)


def lemma1_proof_coefficient(pbar: Numeric, n: int) -> float:
    """(1/sqrt(2 pi)) sqrt(2/pbar) sqrt(n + 1/pbar): the per-unit-distance rate from the path argument."""
    if pbar is None or not pbar > 0:
        raise PbarNotPositive(pbar)
    pb = float(pbar)
    return math.sqrt(2.0 / pb) * math.sqrt(n + 1.0 / pb) / math.sqrt(2.0 * math.pi)


# ==============================================================================
# Derivative bounds for two-point families
# ==============================================================================

def lemma2_first_bound(p: Numeric, p_prime: Numeric, n: int, ulps: int = DEFAULT_UPWARD_ULPS) -> float:
    """(1/sqrt(2 pi)) sqrt(1/p + 1/p') sqrt(n + 1/min(p, p'))."""
    _check_n(n)
    _check_masses(p, p_prime)
    a, b = float(p), float(p_prime)
    value = math.sqrt(1.0 / a + 1.0 / b) * math.sqrt(n + 1.0 / min(a, b)) / math.sqrt(2.0 * math.pi)
    return round_up(value, ulps)


def lemma2_second_bound(p: Numeric, p_prime: Numeric, n: int, ulps: int = DEFAULT_UPWARD_ULPS) -> float:
    """(1/2) sqrt(1/p + 1/p') sqrt(n)."""
    _check_n(n)
    _check_masses(p, p_prime)
    a, b = float(p), float(p_prime)
    return round_up(0.5 * math.sqrt(1.0 / a + 1.0 / b) * math.sqrt(n), ulps)


def s_k(p: Numeric, p_prime: Numeric, k: float, ulps: int = 0) -> float:
    """
    s(k) = (1/(p+p')) sqrt((k + 1/min(alpha, beta)) / (2 pi alpha beta)).

    Accepts real k, since the concavity argument evaluates s at k = n (p + p').
    """
    _check_masses(p, p_prime)
    if k < 0:
        raise OutOfRange(f"k must be nonnegative, got {k}")
    alpha, beta, mass = _alpha_beta(p, p_prime)
    value = math.sqrt((float(k) + 1.0 / min(alpha, beta)) / (2.0 * math.pi * alpha * beta)) / mass
    return round_up(value, ulps) if ulps else value


def s_tilde_k(p: Numeric, p_prime: Numeric, k: float, ulps: int = 0) -> float:
    """s~(k) = (1/(p+p')) sqrt(k / (4 alpha beta))."""
    _check_masses(p, p_prime)
    if k < 0:
        raise OutOfRange(f"k must be nonnegative, got {k}")
    alpha, beta, mass = _alpha_beta(p, p_prime)
    value = math.sqrt(float(k) / (4.0 * alpha * beta)) / mass
    return round_up(value, ulps) if ulps else value


def s_vs_s_tilde_chain(p: Numeric, p_prime: Numeric, k: int) -> Optional[Tuple[float, float, float]]:
    """
    The large-k comparison between the two majorants.

    When alpha k >= 2 and beta k >= 2, 1/min(alpha, beta) <= k/2 and
    s(k) <= (1/(p+p')) sqrt((3k/2) / (2 pi alpha beta)) < s~(k). Returns
    (s(k), middle, s~(k)), or None when the hypothesis does not hold.
    """
    alpha, beta, mass = _alpha_beta(p, p_prime)
    if alpha * k < 2 or beta * k < 2:
        return None
    middle = math.sqrt(1.5 * k / (2.0 * math.pi * alpha * beta)) / mass
    return s_k(p, p_prime, k), middle, s_tilde_k(p, p_prime, k)


# ==============================================================================
# Binomial and power inequalities
# ==============================================================================

def stirling_binom_check(
    n: int,
    k: int,
    field: NumericField = NumericField.RATIONAL,
    ulps: int = DEFAULT_UPWARD_ULPS,
) -> Tuple[Numeric, float]:
    """
    Both sides of C(n,k) (k/n)^k ((n-k)/n)^(n-k) <= sqrt(n / (2 pi k (n-k))).

    The left side is an exact Fraction in rational mode (big integers throughout)
    and a log-gamma float otherwise; the right side is rounded up. Only
    0 < k < n is accepted: at k = n the right side is undefined (the left is 1).
    """
    if not 0 < k < n:
        raise OutOfRange(f"Need 0 < k < n, got n={n}, k={k}")
    rhs = round_up(math.sqrt(n / (2.0 * math.pi * k * (n - k))), ulps)
    if field is NumericField.RATIONAL:
        lhs = Fraction(math.comb(n, k) * k**k * (n - k) ** (n - k), n**n)
    else:
        lhs = math.exp(
            math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
            + k * math.log(k / n) + (n - k) * math.log((n - k) / n)
        )
    return lhs, rhs


def stirling_factorial_bracket(n: int) -> Tuple[float, float, float]:
    """
    (lower, log n!, upper) in the log domain for
    sqrt(2 pi) n^(n+1/2) e^(-n + 1/(12n+1)) < n! < sqrt(2 pi) n^(n+1/2) e^(-n + 1/(12n)).
    """
    if n < 1:
        raise OutOfRange(f"n must be positive, got {n}")
    base = 0.5 * math.log(2.0 * math.pi) + (n + 0.5) * math.log(n) - n
    return base + 1.0 / (12 * n + 1), math.lgamma(n + 1), base + 1.0 / (12 * n)


def _power_product(x: Numeric, k: Numeric, n: Numeric) -> Numeric:
    # 0^0 = 1 on both factors
    left = 1 if k == 0 else x**k
    right = 1 if n - k == 0 else (1 - x) ** (n - k)
    return left * right


def _check_maxpot_domain(n: Numeric, k: Numeric, x: Numeric) -> None:
    if not n > 0:
        raise OutOfRange(f"n must be positive, got {n}")
    if not 0 <= k <= n:
        raise OutOfRange(f"k must lie in [0, n], got {k}")
    if not 0 <= x <= 1:
        raise OutOfRange(f"x must lie in [0, 1], got {x}")


def maxpot_check(n: Numeric, k: Numeric, x: Numeric) -> bool:
    """
    x^k (1-x)^(n-k) <= (k/n)^k (1 - k/n)^(n-k).

    Exact when every argument is a Fraction or int and k is integral; otherwise
    compared in float with a relative tolerance of 1e-12.
    """
    _check_maxpot_domain(n, k, x)
    exact = all(isinstance(v, (Fraction, int)) for v in (n, k, x)) and k == int(k)
    if exact:
        k_int, n_frac = int(k), Fraction(n)
        return _power_product(Fraction(x), k_int, n_frac) <= _power_product(k_int / n_frac, k_int, n_frac)
    lhs = _power_product(float(x), float(k), float(n))
    rhs = _power_product(float(k) / float(n), float(k), float(n))
    return lhs <= rhs * (1.0 + MAXPOT_RELATIVE_TOLERANCE)


def derpot_sign_check(n: float, k: float, x: float, h: float = 1e-7, ambiguity: float = 1e-6) -> bool:
    """
    Finite-difference test that d/dx x^k (1-x)^(n-k) >= 0 exactly when x <= k/n.

    Evaluated on the log of the function (same sign as the derivative for
    0 < x < 1) with a central difference. Points within ``ambiguity`` of k/n,
    where the derivative vanishes, count as agreeing.
    """
    _check_maxpot_domain(n, k, x)
    if not 0 < x < 1:
        raise OutOfRange(f"The sign test needs 0 < x < 1, got {x}")
    if abs(x - k / n) <= ambiguity:
        return True
    lo, hi = max(x - h, 0.5 * x), min(x + h, 0.5 * (1 + x))

    def log_f(v: float) -> float:
        return k * math.log(v) + (n - k) * math.log1p(-v)

    slope = (log_f(hi) - log_f(lo)) / (hi - lo)
    return (slope >= 0) == (x <= k / n)


def maxpot_scan(n_values, k_fractions, x_values) -> Dict[str, int]:
    """
    Vectorised sweep of both power identities over a (n, k, x) grid.

    ``k_fractions`` are positions k/n in [0, 1]. Returns violation counts for the
    maximum test and the sign test (the latter restricted to 0 < x < 1 and
    points farther than 1e-6 from k/n).
    """
    n = np.asarray(n_values, dtype=float)[:, None, None]
    frac = np.asarray(k_fractions, dtype=float)[None, :, None]
    x = np.asarray(x_values, dtype=float)[None, None, :]
    k = frac * n
    with np.errstate(divide="ignore", invalid="ignore"):
        log_lhs = xlogy(k, x) + xlog1py(n - k, -x)
        log_rhs = xlogy(k, frac) + xlog1py(n - k, -frac)
        tol = MAXPOT_RELATIVE_TOLERANCE * np.maximum(1.0, np.abs(log_rhs))
        max_violations = int(np.count_nonzero(log_lhs > log_rhs + tol))

        interior = (x > 0) & (x < 1) & (np.abs(x - frac) > 1e-6)
        log_slope = np.where(interior, k / x - (n - k) / (1.0 - x), 0.0)
        sign_violations = int(np.count_nonzero(interior & ((log_slope >= 0) != (x <= frac))))
    return {"maxpot": max_violations, "derpot": sign_violations}


# ==============================================================================
# Reports
# ==============================================================================

def bound_report(
    p: Distribution,
    q: Distribution,
    n: int,
    compute_exact: bool = True,
    brute_force_limit: Optional[int] = None,
    type_class_limit: Optional[int] = None,
    mc_samples: Optional[int] = None,
    seed: int = 0,
    ulps: int = DEFAULT_UPWARD_ULPS,
    partitions: int = 1,
    equality_tolerance: float = DEFAULT_EQUALITY_TOLERANCE,
) -> BoundReport:
    """
    Collect every applicable bound for (P, Q, n).

    When ``compute_exact`` is set the fastest applicable exact engine runs
    (two-point, then type classes); if every engine refuses the instance and
    ``mc_samples`` is given, a Monte Carlo estimate is attached instead. Any
    exact distance found is checked against every applicable bound.
    """
    delta_1 = variational_distance(p, q)
    profile = diff_profile(p, q, equality_tolerance)
    pbar = profile.min_diff_prob
    linear = linear_bound(delta_1, n, ulps)
    report = BoundReport(
        n=n,
        delta_1=delta_1,
        pbar=pbar,
        linear=linear.value,
        linear_capped=linear.capped,
        applicable={"linear": True, "lemma1_first": False, "lemma1_second": False},
    )
    if profile.pbar_positive:
        report.lemma1_first = lemma1_first_bound(delta_1, pbar, n, ulps)
        report.lemma1_second = lemma1_second_bound(delta_1, pbar, n, ulps)
        report.applicable.update(lemma1_first=True, lemma1_second=True)

    if compute_exact:
        engine, value = exact_distance(
            p, q, n,
            brute_force_limit=brute_force_limit or engines.DEFAULT_BRUTE_FORCE_LIMIT,
            type_class_limit=type_class_limit or engines.DEFAULT_TYPE_CLASS_LIMIT,
            partitions=partitions,
            equality_tolerance=equality_tolerance,
        )
        if engine is not None:
            report.exact, report.exact_engine = value, engine
            report.assert_dominance()
        elif mc_samples:
            report.mc_estimate = mc_distance(engines.ProductQuery(p=p, q=q, n=n), mc_samples, seed)
    logger.debug(f"Bound report n={n}: delta={delta_1}, pbar={pbar}, exact via {report.exact_engine}")
    return report


def exact_distance(
    p: Distribution,
    q: Distribution,
    n: int,
    brute_force_limit: Optional[int] = None,
    type_class_limit: Optional[int] = None,
    partitions: int = 1,
    equality_tolerance: float = DEFAULT_EQUALITY_TOLERANCE,
) -> Tuple[Optional[str], Optional[Numeric]]:
    """
    delta(P^n, Q^n) from the cheapest engine that accepts the instance.

    Returns (engine name, value), or (None, None) when every guard refuses.
    Float pairs within ``equality_tolerance`` everywhere count as identical.
    """
    profile = diff_profile(p, q, equality_tolerance)
    if profile.is_empty:
        return "identity", (Fraction(0) if p.field is NumericField.RATIONAL else 0.0)
    if len(profile.diff_set) == 2 and profile.pbar_positive:
        try:
            family, t = TwoPointFamily.from_pair(p, q, equality_tolerance)
            return "two_point", engines.two_point_distance(family, t, n)
        except (NotTwoPoint, OutOfRange) as e:
            logger.debug(f"Two-point engine declined: {e}")
    query = engines.ProductQuery(p=p, q=q, n=n)
    try:
        return "type_class", engines.type_class_distance(
            query, limit=type_class_limit or engines.DEFAULT_TYPE_CLASS_LIMIT, partitions=partitions
        )
    except TooLarge:
        pass
    try:
        return "brute_force", engines.brute_force_distance(
            query, limit=brute_force_limit or engines.DEFAULT_BRUTE_FORCE_LIMIT
        )
    except TooLarge:
        logger.warning(f"Every exact engine refused n={n} on a {len(query.aligned()[0])}-letter alphabet")
        return None, None
