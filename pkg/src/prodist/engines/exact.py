"""
Exact engines for delta(P^n, Q^n).

Three computations at increasing scale:

1. ``brute_force_distance``: enumerates all |Z|^n outcome strings (the oracle).
2. ``type_class_distance``: aggregates outcomes by type class (symbol counts),
   streaming the count vectors so memory stays O(|Z|).
3. ``two_point_distance``: the O(n^2) double sum over k (coordinates landing in
   {z1, z2}) and r (those equal to z1) for pairs that differ at two points.

All three are generic over the numeric field of their inputs: exact Fractions in
rational mode, log-domain floats in float mode.
"""

import logging
import math
from fractions import Fraction
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import xlogy

from prodist.core.distribution import Distribution, align
from prodist.core.errors import OutOfRange, TooLarge
from prodist.core.family import TwoPointFamily
from prodist.core.numeric import (
    Numeric,
    NumericField,
    abs_exp_diff,
    log_abs_exp_diff,
    log_factorials,
    safe_log,
    to_field,
)

logger = logging.getLogger("prodist.engines.exact")

DEFAULT_BRUTE_FORCE_LIMIT = 10**7
DEFAULT_TYPE_CLASS_LIMIT = 10**7


class ProductQuery(BaseModel):
    """A pair (P, Q) and the number n of i.i.d. repetitions."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    p: Distribution
    q: Distribution
    n: int = Field(ge=1)

    @model_validator(mode="after")
    def _check_fields(self) -> "ProductQuery":
        if self.p.field is not self.q.field:
            raise ValueError(f"p is {self.p.field.value} but q is {self.q.field.value}")
        return self

    @property
    def field(self) -> NumericField:
        return self.p.field

    def aligned(self) -> Tuple[Tuple[str, ...], List[Numeric], List[Numeric]]:
        return align(self.p, self.q)


class TypeClass(BaseModel):
    """
    One type class: every outcome string with the given symbol counts.

    ``weight_p`` is multinomial(n; counts) * prod P(z)^count(z). In float mode the
    log weights are kept as well so differences can be formed stably.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    counts: Dict[str, int]
    weight_p: Any
    weight_q: Any
    log_weight_p: Optional[float] = None
    log_weight_q: Optional[float] = None

    def abs_difference(self) -> Numeric:
        if self.log_weight_p is None:
            return abs(self.weight_p - self.weight_q)
        return abs_exp_diff(self.log_weight_p, self.log_weight_q)


# ==============================================================================
# Brute force
# ==============================================================================

def brute_force_distance(query: ProductQuery, limit: int = DEFAULT_BRUTE_FORCE_LIMIT) -> Numeric:
    """
    1/2 sum over every z-vector of |P^n(z) - Q^n(z)|, by direct enumeration.

    Prefix products are carried down a depth-first walk, so each outcome costs one
    multiplication per side. Raises TooLarge when |Z|^n exceeds ``limit``.
    """
    _, pv, qv = query.aligned()
    n = query.n
    size = len(pv) ** n
    if size > limit:
        raise TooLarge("brute_force", size, limit)
    logger.debug(f"Brute force over {size} outcomes (|Z|={len(pv)}, n={n})")

    if query.field is NumericField.RATIONAL:
        return _brute_force_rational(pv, qv, n) / 2
    lp = [safe_log(float(x)) for x in pv]
    lq = [safe_log(float(x)) for x in qv]
    return math.fsum(_brute_force_log(lp, lq, n)) / 2


def _brute_force_rational(pv: List[Fraction], qv: List[Fraction], n: int) -> Fraction:
    total = Fraction(0)
    stack: List[Tuple[int, Fraction, Fraction]] = [(0, Fraction(1), Fraction(1))]
    while stack:
        depth, wp, wq = stack.pop()
        if depth == n:
            total += abs(wp - wq)
            continue
        for a, b in zip(pv, qv):
            stack.append((depth + 1, wp * a, wq * b))
    return total


def _brute_force_log(lp: List[float], lq: List[float], n: int) -> Iterator[float]:
    stack: List[Tuple[int, float, float]] = [(0, 0.0, 0.0)]
    while stack:
        depth, a, b = stack.pop()
        if depth == n:
            yield abs_exp_diff(a, b)
            continue
        for x, y in zip(lp, lq):
            stack.append((depth + 1, a + x, b + y))


# ==============================================================================
# Type classes
# ==============================================================================

def type_class_count(alphabet_size: int, n: int) -> int:
    """Number of type classes, C(n + |Z| - 1, |Z| - 1)."""
    return math.comb(n + alphabet_size - 1, alphabet_size - 1)


def compositions(n: int, parts: int, first: Optional[range] = None) -> Iterator[Tuple[int, ...]]:
    """
    Count vectors of length ``parts`` summing to ``n``, in lexicographic order.

    ``first`` restricts the first coordinate (used for partitioned reduction).
    """
    if parts == 1:
        if first is None or n in first:
            yield (n,)
        return
    heads = range(n + 1) if first is None else [c for c in first if 0 <= c <= n]
    for head in heads:
        for tail in compositions(n - head, parts - 1):
            yield (head,) + tail


def iter_type_classes(
    query: ProductQuery,
    limit: int = DEFAULT_TYPE_CLASS_LIMIT,
    first: Optional[range] = None,
) -> Iterator[TypeClass]:
    """Stream every type class of the query with its weights under P^n and Q^n."""
    labels, pv, qv = query.aligned()
    n, size = query.n, len(labels)
    count = type_class_count(size, n)
    if count > limit:
        raise TooLarge("type_class", count, limit)

    if query.field is NumericField.RATIONAL:
        pow_p = [[a**c for c in range(n + 1)] for a in pv]
        pow_q = [[b**c for c in range(n + 1)] for b in qv]
        fact = [math.factorial(c) for c in range(n + 1)]
        for counts in compositions(n, size, first):
            multinomial = fact[n]
            wp = Fraction(1)
            wq = Fraction(1)
            for i, c in enumerate(counts):
                multinomial //= fact[c]
                wp *= pow_p[i][c]
                wq *= pow_q[i][c]
            yield TypeClass.model_construct(
                counts=dict(zip(labels, counts)),
                weight_p=multinomial * wp,
                weight_q=multinomial * wq,
            )
        return

    log_fact = log_factorials(n).tolist()
    grid = np.arange(n + 1, dtype=float)
    # xlogy gives c * log p with 0 * log 0 = 0
    log_pow_p = [xlogy(grid, float(a)).tolist() for a in pv]
    log_pow_q = [xlogy(grid, float(b)).tolist() for b in qv]
    for counts in compositions(n, size, first):
        log_multinomial = log_fact[n] - math.fsum(log_fact[c] for c in counts)
        lwp = log_multinomial + math.fsum(log_pow_p[i][c] for i, c in enumerate(counts))
        lwq = log_multinomial + math.fsum(log_pow_q[i][c] for i, c in enumerate(counts))
        yield TypeClass.model_construct(
            counts=dict(zip(labels, counts)),
            weight_p=math.exp(lwp),
            weight_q=math.exp(lwq),
            log_weight_p=lwp,
            log_weight_q=lwq,
        )


def type_class_partial_sum(
    query: ProductQuery,
    first: Optional[range] = None,
    limit: int = DEFAULT_TYPE_CLASS_LIMIT,
) -> Numeric:
    """sum of |weight_p - weight_q| over the type classes whose first count lies in ``first``."""
    terms = (tc.abs_difference() for tc in iter_type_classes(query, limit=limit, first=first))
    if query.field is NumericField.RATIONAL:
        return sum(terms, Fraction(0))
    return math.fsum(terms)


def type_class_distance(
    query: ProductQuery,
    limit: int = DEFAULT_TYPE_CLASS_LIMIT,
    partitions: int = 1,
) -> Numeric:
    """
    1/2 sum over type classes of |weight_p - weight_q|.

    With ``partitions > 1`` the classes are split by the count of the first symbol
    into contiguous blocks whose partial sums are combined in block order; in
    rational mode the result does not depend on the partitioning.
    """
    labels, _, _ = query.aligned()
    count = type_class_count(len(labels), query.n)
    if count > limit:
        raise TooLarge("type_class", count, limit)
    logger.debug(f"Type-class reduction over {count} classes in {partitions} partition(s)")

    bounds = np.linspace(0, query.n + 1, max(1, partitions) + 1).round().astype(int).tolist()
    blocks = [range(lo, hi) for lo, hi in zip(bounds, bounds[1:]) if hi > lo]
    partials = [type_class_partial_sum(query, first=block, limit=limit) for block in blocks]
    if query.field is NumericField.RATIONAL:
        return sum(partials, Fraction(0)) / 2
    return math.fsum(partials) / 2


# ==============================================================================
# Two-point decomposition
# ==============================================================================

def binomial_weights(n: int, mass: Numeric) -> List[Numeric]:
    """q(k) = C(n,k) m^k (1-m)^(n-k) for k = 0..n, exact for Fraction mass."""
    if isinstance(mass, Fraction):
        return [math.comb(n, k) * mass**k * (1 - mass) ** (n - k) for k in range(n + 1)]
    return np.exp(log_binomial_weights(n, float(mass))).tolist()


def log_binomial_weights(n: int, mass: float) -> np.ndarray:
    """log q(k) for k = 0..n (with 0 * log 0 = 0, so m = 1 puts all weight on k = n)."""
    k = np.arange(n + 1, dtype=float)
    log_fact = log_factorials(n)
    return log_fact[n] - log_fact - log_fact[::-1] + xlogy(k, mass) + xlogy(n - k, 1.0 - mass)


def two_point_distance(family: TwoPointFamily, t: Any, n: int) -> Numeric:
    """
    delta(P_t^n, P_{t0}^n) through the binomial decomposition.

    1/2 sum_k q(k) sum_r C(k,r) |alpha^r beta^(k-r) - alpha_t^r beta_t^(k-r)|,
    with alpha = p/(p+p'), alpha_t = P_t(z1)/(p+p'). Raises OutOfRange if P_t leaves
    the simplex.
    """
    if n < 1:
        raise OutOfRange(f"n must be positive, got {n}")
    x, _ = family.point(t)
    mass = family.binomial_mass()
    alpha = family.alpha
    alpha_t = x / family.mass

    if family.field is NumericField.RATIONAL:
        return _two_point_rational(n, mass, alpha, alpha_t) / 2
    return _two_point_float(n, float(mass), float(alpha), float(alpha_t)) / 2


def _two_point_rational(n: int, mass: Fraction, alpha: Fraction, alpha_t: Fraction) -> Fraction:
    if alpha == alpha_t:
        return Fraction(0)
    beta, beta_t = 1 - alpha, 1 - alpha_t
    pow_a = [alpha**r for r in range(n + 1)]
    pow_b = [beta**r for r in range(n + 1)]
    pow_at = [alpha_t**r for r in range(n + 1)]
    pow_bt = [beta_t**r for r in range(n + 1)]
    total = Fraction(0)
    for k, qk in enumerate(binomial_weights(n, mass)):
        if qk == 0:
            continue
        inner = Fraction(0)
        for r in range(k + 1):
            inner += math.comb(k, r) * abs(pow_a[r] * pow_b[k - r] - pow_at[r] * pow_bt[k - r])
        total += qk * inner
    return total


def _two_point_float(n: int, mass: float, alpha: float, alpha_t: float) -> float:
    if alpha == alpha_t:
        return 0.0
    beta, beta_t = 1.0 - alpha, 1.0 - alpha_t
    log_q = log_binomial_weights(n, mass)
    log_fact = log_factorials(n)
    terms = []
    for k in range(n + 1):
        if np.isneginf(log_q[k]):
            continue
        r = np.arange(k + 1, dtype=float)
        log_c = log_fact[k] - log_fact[: k + 1] - log_fact[k::-1]
        la = xlogy(r, alpha) + xlogy(k - r, beta)
        lb = xlogy(r, alpha_t) + xlogy(k - r, beta_t)
        logs = log_q[k] + log_c + log_abs_exp_diff(la, lb)
        terms.append(math.fsum(np.exp(logs).tolist()))
    return math.fsum(terms)


def two_point_pair_distance(p: Distribution, q: Distribution, n: int) -> Numeric:
    """delta(P^n, Q^n) for a pair that differs at exactly two labels."""
    family, t = TwoPointFamily.from_pair(p, q)
    return two_point_distance(family, t, n)


def to_query(p: Distribution, q: Distribution, n: int, field: Optional[NumericField] = None) -> ProductQuery:
    """Convenience: build a ProductQuery, optionally converting both sides to ``field``."""
    if field is not None and field is not p.field:
        p = Distribution(labels=p.labels, probs=tuple(to_field(x, field) for x in p.probs), field=field)
    if field is not None and field is not q.field:
        q = Distribution(labels=q.labels, probs=tuple(to_field(x, field) for x in q.probs), field=field)
    return ProductQuery(p=p, q=q, n=n)
