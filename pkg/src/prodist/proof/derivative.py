"""
Right derivative of delta(P_t^n, P_{t0}^n) at t0 for a two-point family.

Writing k for the number of coordinates that land in {z1, z2} and r for those
equal to z1, the distance splits into binomial weights q(k) times inner sums
over r. Each inner sum collapses to a single term,

    sum_{r <= rbar} C(k,r) a'_{k,r} = (k/(p+p')) C(k-1, rbar) alpha^rbar beta^(k-rbar-1),

with rbar = floor(k alpha), and that term is bounded through the maximum of
x^a (1-x)^b, the binomial Stirling bound and Jensen's inequality. This module
evaluates every link of that argument so each can be checked on its own.
"""

import logging
import math
from fractions import Fraction
from typing import Any, List, Literal, NamedTuple, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from prodist.core.errors import NonpositiveMass, OutOfRange
from prodist.core.family import TwoPointFamily
from prodist.core.numeric import DEFAULT_UPWARD_ULPS, Numeric, NumericField, log_binomial, round_up, to_field
from prodist.engines.exact import binomial_weights, log_binomial_weights, two_point_distance
from prodist.proof.bounds import lemma2_first_bound, lemma2_second_bound, s_k, s_tilde_k, stirling_binom_check

logger = logging.getLogger("prodist.proof.derivative")

FLOAT_IDENTITY_TOLERANCE = 1e-10

Method = Literal["closed", "direct"]
Majorant = Literal["s", "s_tilde"]


class DerivativeTerm(BaseModel):
    """The k-th summand of the derivative decomposition."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    k: int
    qk: Any
    rbar: int
    inner_sum: Any
    closed_form: Any
    alpha_tilde: Any
    beta_tilde: Any
    gamma: Any

    @property
    def contribution(self) -> Numeric:
        return self.qk * self.closed_form


class DerivativeDecomposition(BaseModel):
    """All n + 1 terms for one family and one n."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n: int
    field: NumericField
    alpha: Any
    beta: Any
    mass: Any
    terms: List[DerivativeTerm]

    def total(self) -> Numeric:
        """sum_k q(k) * closed_form(k), in ascending k."""
        values = [t.contribution for t in self.terms]
        if self.field is NumericField.RATIONAL:
            return sum(values, Fraction(0))
        return math.fsum(values)

    def weight_total(self) -> Numeric:
        values = [t.qk for t in self.terms]
        if self.field is NumericField.RATIONAL:
            return sum(values, Fraction(0))
        return math.fsum(values)


# ==============================================================================
# Helpers
# ==============================================================================

def _masses(p: Any, p_prime: Any) -> Tuple[Numeric, Numeric, NumericField]:
    if isinstance(p, Fraction) or isinstance(p_prime, Fraction):
        field = NumericField.RATIONAL
    elif isinstance(p, int) and isinstance(p_prime, int):
        field = NumericField.RATIONAL
    else:
        field = NumericField.FLOAT
    a, b = to_field(p, field), to_field(p_prime, field)
    if not (a > 0 and b > 0):
        raise NonpositiveMass(f"Two-point masses must be positive (p={p}, p'={p_prime})")
    return a, b, field


def _rbar(k: int, alpha: Numeric) -> int:
    return math.floor(k * alpha)


def _pow(x: Numeric, e: int) -> Numeric:
    # 0^0 = 1
    return 1 if e == 0 else x**e


# ==============================================================================
# Per-k quantities
# ==============================================================================

def a_prime(k: int, r: int, p: Any, p_prime: Any) -> Numeric:
    """
    d/dt [alpha_t^r beta_t^(k-r)] at t0:
    (1/(p+p')) [(k-r) alpha^r beta^(k-r-1) - r alpha^(r-1) beta^(k-r)].

    The first bracket term vanishes at r = k and the second at r = 0.
    """
    if not 0 <= r <= k:
        raise OutOfRange(f"Need 0 <= r <= k, got k={k}, r={r}")
    a, b, _ = _masses(p, p_prime)
    mass = a + b
    alpha, beta = a / mass, b / mass
    up = (k - r) * _pow(alpha, r) * _pow(beta, k - r - 1) if r < k else 0
    down = r * _pow(alpha, r - 1) * _pow(beta, k - r) if r > 0 else 0
    return (up - down) / mass


def inner_sum_direct(k: int, p: Any, p_prime: Any) -> Numeric:
    """sum_{r <= rbar} C(k,r) a'_{k,r}, term by term."""
    a, b, field = _masses(p, p_prime)
    alpha = a / (a + b)
    rbar = _rbar(k, alpha)
    terms = [math.comb(k, r) * a_prime(k, r, a, b) for r in range(rbar + 1)]
    if field is NumericField.RATIONAL:
        return sum(terms, Fraction(0))
    return math.fsum(terms)


def inner_sum_closed(k: int, p: Any, p_prime: Any) -> Numeric:
    """(k/(p+p')) C(k-1, rbar) alpha^rbar beta^(k-rbar-1); zero at k = 0."""
    a, b, field = _masses(p, p_prime)
    if k == 0:
        return Fraction(0) if field is NumericField.RATIONAL else 0.0
    mass = a + b
    alpha, beta = a / mass, b / mass
    rbar = _rbar(k, alpha)
    return k * math.comb(k - 1, rbar) * _pow(alpha, rbar) * _pow(beta, k - rbar - 1) / mass


def inner_sum_identity_check(k: int, p: Any, p_prime: Any) -> Tuple[Numeric, Numeric]:
    """Both sides of the inner-sum collapse: (term-by-term sum, closed form)."""
    if k < 1:
        raise OutOfRange(f"k must be at least 1, got {k}")
    return inner_sum_direct(k, p, p_prime), inner_sum_closed(k, p, p_prime)


def telescoping_check(k: int, p: Any, p_prime: Any) -> Tuple[Numeric, Numeric]:
    """
    The telescoping step of the collapse:
    sum_{r <= rbar} C(k-1,r) a^r b^(k-1-r) - sum_{r <= rbar-1} C(k-1,r) a^(r) b^(k-1-r)
    against the single surviving term C(k-1,rbar) alpha^rbar beta^(k-1-rbar).
    """
    if k < 1:
        raise OutOfRange(f"k must be at least 1, got {k}")
    a, b, field = _masses(p, p_prime)
    alpha, beta = a / (a + b), b / (a + b)
    rbar = _rbar(k, alpha)
    partial = [math.comb(k - 1, r) * _pow(alpha, r) * _pow(beta, k - 1 - r) for r in range(rbar + 1)]
    if field is NumericField.RATIONAL:
        difference = sum(partial, Fraction(0)) - sum(partial[:-1], Fraction(0))
    else:
        difference = math.fsum(partial) - math.fsum(partial[:-1])
    return difference, partial[-1]


def _term_geometry(k: int, alpha: Numeric, field: NumericField) -> Tuple[int, Numeric, Numeric, Numeric]:
    rbar = _rbar(k, alpha)
    if field is NumericField.RATIONAL:
        alpha_tilde = Fraction(rbar + 1, k + 1)
    else:
        alpha_tilde = (rbar + 1) / (k + 1)
    return rbar, alpha_tilde, 1 - alpha_tilde, k * alpha - rbar


# ==============================================================================
# Decomposition and the derivative itself
# ==============================================================================

def decompose(fam: TwoPointFamily, n: int) -> DerivativeDecomposition:
    """Every per-k quantity of the decomposition, k = 0..n."""
    if n < 1:
        raise OutOfRange(f"n must be positive, got {n}")
    field = fam.field
    p, p_prime = fam.p, fam.p_prime
    alpha = fam.alpha
    weights = binomial_weights(n, fam.binomial_mass())
    terms = []
    for k in range(n + 1):
        rbar, alpha_tilde, beta_tilde, gamma = _term_geometry(k, alpha, field)
        if k == 0:
            inner = closed = Fraction(0) if field is NumericField.RATIONAL else 0.0
        else:
            inner, closed = inner_sum_identity_check(k, p, p_prime)
        terms.append(
            DerivativeTerm(
                k=k,
                qk=weights[k],
                rbar=rbar,
                inner_sum=inner,
                closed_form=closed,
                alpha_tilde=alpha_tilde,
                beta_tilde=beta_tilde,
                gamma=gamma,
            )
        )
    return DerivativeDecomposition(
        n=n, field=field, alpha=alpha, beta=fam.beta, mass=fam.mass, terms=terms
    )


def derivative_exact(fam: TwoPointFamily, n: int, method: Method = "closed") -> Numeric:
    """
    sum_k q(k) sum_{r <= rbar} C(k,r) a'_{k,r}: the right derivative at t0.

    ``method="closed"`` uses the collapsed inner sum (O(n)); ``"direct"`` sums
    every a' term (O(n^2)). Float mode works in the log domain.
    """
    if n < 1:
        raise OutOfRange(f"n must be positive, got {n}")
    if method not in ("closed", "direct"):
        raise ValueError(f"Unknown method '{method}'")
    weight_mass = fam.binomial_mass()

    if fam.field is NumericField.RATIONAL:
        weights = binomial_weights(n, weight_mass)
        inner = inner_sum_closed if method == "closed" else inner_sum_direct
        return sum((weights[k] * inner(k, fam.p, fam.p_prime) for k in range(1, n + 1)), Fraction(0))
    return _derivative_float(float(fam.p), float(fam.p_prime), n, method, float(weight_mass))


def _derivative_float(p: float, p_prime: float, n: int, method: Method, weight_mass: float) -> float:
    mass = p + p_prime
    alpha, beta = p / mass, p_prime / mass
    la, lb = math.log(alpha), math.log(beta)
    log_q = log_binomial_weights(n, weight_mass)
    terms: List[float] = []
    for k in range(1, n + 1):
        if np.isneginf(log_q[k]):
            continue
        rbar = _rbar(k, alpha)
        if method == "closed":
            log_term = (
                log_q[k] + math.log(k / mass) + float(log_binomial(k - 1, rbar))
                + rbar * la + (k - 1 - rbar) * lb
            )
            terms.append(math.exp(log_term))
            continue
        r = np.arange(rbar + 1, dtype=float)
        log_c = log_q[k] + log_binomial(k, r) - math.log(mass)
        with np.errstate(divide="ignore", invalid="ignore"):
            up = np.where(r < k, np.exp(log_c + np.log(k - r) + r * la + (k - r - 1) * lb), 0.0)
            down = np.where(r > 0, np.exp(log_c + np.log(r) + (r - 1) * la + (k - r) * lb), 0.0)
        terms.append(math.fsum((up - down).tolist()))
    return math.fsum(terms)


def finite_difference_derivative(fam: TwoPointFamily, n: int, h: Any = 1e-6) -> Numeric:
    """Forward difference delta(P_{t0+h}^n, P_{t0}^n) / h; only h > 0 (right derivative)."""
    h = to_field(h, fam.field)
    if not h > 0:
        raise OutOfRange(f"Step must be positive, got {h}")
    return two_point_distance(fam, fam.t0 + h, n) / h


# ==============================================================================
# Links of the bound chain
# ==============================================================================

class BinomialChainLinks(BaseModel):
    """
    The bound on C(k-1, rbar) alpha^rbar beta^(k-rbar-1), one value per link.

    lhs == rewritten (exact identity via C(k+1, rbar+1)),
    rewritten <= maxpot (alpha replaced by the maximiser alpha~),
    maxpot <= stirling (binomial Stirling bound at n = k+1),
    stirling == final, the closed form (1/k) sqrt((k+1)/(2 pi alpha beta)) sqrt(alpha~ beta~ / (alpha beta)).
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    k: int
    rbar: int
    lhs: Any
    rewritten: Any
    maxpot: Any
    stirling: float
    final: float

    def holds(self, tolerance: float = FLOAT_IDENTITY_TOLERANCE) -> bool:
        exact = isinstance(self.lhs, Fraction)
        identity = self.lhs == self.rewritten if exact else math.isclose(
            self.lhs, self.rewritten, rel_tol=tolerance
        )
        maxpot_ok = self.rewritten <= self.maxpot * (1 if exact else 1 + tolerance)
        stirling_ok = self.maxpot <= round_up(self.stirling, DEFAULT_UPWARD_ULPS)
        final_ok = math.isclose(self.stirling, self.final, rel_tol=tolerance)
        return bool(identity and maxpot_ok and stirling_ok and final_ok)


def binomial_chain_links(k: int, p: Any, p_prime: Any) -> BinomialChainLinks:
    if k < 1:
        raise OutOfRange(f"k must be at least 1, got {k}")
    a, b, field = _masses(p, p_prime)
    mass = a + b
    alpha, beta = a / mass, b / mass
    rbar, alpha_tilde, beta_tilde, _ = _term_geometry(k, alpha, field)

    lhs = math.comb(k - 1, rbar) * _pow(alpha, rbar) * _pow(beta, k - 1 - rbar)
    # C(k-1, rbar) = C(k+1, rbar+1) (rbar+1)(k-rbar) / (k (k+1))
    coefficient = Fraction((rbar + 1) * (k - rbar), k * (k + 1))
    if field is NumericField.FLOAT:
        coefficient = float(coefficient)
    big = math.comb(k + 1, rbar + 1)
    rewritten = coefficient * big * alpha ** (rbar + 1) * beta ** (k - rbar) / (alpha * beta)
    maxpot = coefficient * big * alpha_tilde ** (rbar + 1) * beta_tilde ** (k - rbar) / (alpha * beta)

    _, stirling_rhs = stirling_binom_check(k + 1, rbar + 1, NumericField.FLOAT, ulps=0)
    af, bf = float(alpha), float(beta)
    stirling = float(coefficient) * stirling_rhs / (af * bf)
    final = (
        math.sqrt((k + 1) / (2.0 * math.pi * af * bf))
        * math.sqrt(float(alpha_tilde) * float(beta_tilde) / (af * bf))
        / k
    )
    return BinomialChainLinks(k=k, rbar=rbar, lhs=lhs, rewritten=rewritten, maxpot=maxpot, stirling=stirling, final=final)


class GammaLink(NamedTuple):
    lhs: Numeric
    rhs: Numeric
    not_both_exceed_one: bool


def gamma_link(k: int, p: Any, p_prime: Any) -> GammaLink:
    """
    alpha~ beta~ / (alpha beta) against (k + 1/min(alpha, beta)) / (k + 1), plus the
    predicate that (1 - gamma)/alpha and gamma/beta are not both above one.
    Exact in rational mode.
    """
    if k < 1:
        raise OutOfRange(f"k must be at least 1, got {k}")
    a, b, field = _masses(p, p_prime)
    mass = a + b
    alpha, beta = a / mass, b / mass
    _, alpha_tilde, beta_tilde, gamma = _term_geometry(k, alpha, field)
    lhs = alpha_tilde * beta_tilde / (alpha * beta)
    rhs = (k + 1 / min(alpha, beta)) / (k + 1)
    not_both = not ((1 - gamma) / alpha > 1 and gamma / beta > 1)
    return GammaLink(lhs, rhs, not_both)


class PerKMajorants(NamedTuple):
    inner_sum: Numeric
    s: float
    s_tilde: float

    def holds(self) -> bool:
        return self.inner_sum <= self.s and self.inner_sum <= self.s_tilde


def per_k_majorants(k: int, p: Any, p_prime: Any, ulps: int = DEFAULT_UPWARD_ULPS) -> PerKMajorants:
    """inner_sum(k) with s(k) and s~(k), both rounded up."""
    if k < 0:
        raise OutOfRange(f"k must be nonnegative, got {k}")
    a, b, _ = _masses(p, p_prime)
    return PerKMajorants(
        inner_sum_closed(k, a, b),
        s_k(a, b, k, ulps=ulps),
        s_tilde_k(a, b, k, ulps=ulps),
    )


def jensen_step_check(
    fam: TwoPointFamily,
    n: int,
    majorant: Majorant = "s",
    ulps: int = DEFAULT_UPWARD_ULPS,
) -> Tuple[float, float]:
    """
    (sum_k q(k) m(k), m(n (p+p'))) for the concave majorant m = s or s~.

    The right side is rounded up; the left is an fsum of float terms.
    """
    if n < 1:
        raise OutOfRange(f"n must be positive, got {n}")
    if majorant not in ("s", "s_tilde"):
        raise ValueError(f"Unknown majorant '{majorant}'")
    fn = s_k if majorant == "s" else s_tilde_k
    p, p_prime = fam.p, fam.p_prime
    weights = np.exp(log_binomial_weights(n, float(fam.binomial_mass()))).tolist()
    lhs = math.fsum(weights[k] * fn(p, p_prime, k) for k in range(n + 1))
    rhs = round_up(fn(p, p_prime, n * float(fam.mass)), ulps)
    return lhs, rhs


def derivative_bounds(
    fam: TwoPointFamily,
    n: int,
    method: Method = "closed",
    ulps: int = DEFAULT_UPWARD_ULPS,
) -> Tuple[Numeric, float, float]:
    """(derivative, first derivative bound, second derivative bound)."""
    value = derivative_exact(fam, n, method)
    first = lemma2_first_bound(fam.p, fam.p_prime, n, ulps)
    second = lemma2_second_bound(fam.p, fam.p_prime, n, ulps)
    if value > first or value > second:
        logger.warning(f"Derivative {value} above a bound ({first}, {second}) at n={n}")
    return value, first, second


def small_k_binomial_case(k: int, alpha: Numeric) -> Optional[str]:
    """
    Which small-k case of the s~ argument applies: C(k-1, rbar) equal to 1 or k-1,
    or None when alpha k >= 2 and beta k >= 2 (the general case).
    """
    if k < 1:
        return None
    if alpha * k >= 2 and (1 - alpha) * k >= 2:
        return None
    c = math.comb(k - 1, _rbar(k, alpha))
    if c == 1:
        return "one"
    if c == k - 1:
        return "k_minus_one"
    return None
