"""
Desk-scale experiments on the growth of delta(P^n, Q^n).

- ``growth_sweep``: exact distance against every applicable bound, n by n.
- ``tightness_probe``: quotient of the exact distance and the first
  square-root bound for small-distance two-point pairs.
- ``constant_probe``: the constant c with delta(P^n, Q^n) = sqrt(c n / pbar) delta(P, Q).
- ``path_integral_check``: distance along a two-point path against the upper
  Riemann sum of the derivative bound.

Every emitted row re-checks dominance and raises BoundViolation on failure.
"""

import logging
import math
from fractions import Fraction
from typing import Any, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from prodist.core.distribution import Distribution, diff_profile, variational_distance
from prodist.core.errors import BoundViolation, OutOfRange
from prodist.core.family import TwoPointFamily
from prodist.core.numeric import DEFAULT_EQUALITY_TOLERANCE, DEFAULT_UPWARD_ULPS, Numeric, NumericField, round_up, to_field
from prodist.engines.exact import DEFAULT_TYPE_CLASS_LIMIT, two_point_distance
from prodist.experiments.reporting import SweepTable
from prodist.proof.bounds import (
    exact_distance,
    lemma1_first_bound,
    lemma1_proof_coefficient,
    lemma1_second_bound,
    lemma2_first_bound,
    linear_bound,
)

logger = logging.getLogger("prodist.experiments.probes")

DEFAULT_REGIME = 0.1
DEFAULT_PROBE_DELTA = 1e-3
DEFAULT_PBARS = (0.05, 0.1, 0.2, 0.3, 0.4, 0.45, 0.49)
DEFAULT_DELTAS = (1e-3, 1e-2, 0.02)
MAX_CONSTANT = 0.5

GROWTH_COLUMNS = [
    "n", "engine", "exact", "linear", "linear_capped", "lemma1_first", "lemma1_second",
    "ratio_linear", "ratio_first", "ratio_second",
]
TIGHTNESS_COLUMNS = ["n", "exact", "lemma1_first", "quotient", "running_max", "in_regime"]
CONSTANT_COLUMNS = ["pbar", "delta", "n", "exact", "c_required"]


def n_grid(n_max: int, points: Optional[int] = None) -> List[int]:
    """1..n_max, or a geometric grid of about ``points`` distinct integers ending at n_max."""
    if n_max < 1:
        raise OutOfRange(f"n_max must be positive, got {n_max}")
    if points is None or points >= n_max:
        return list(range(1, n_max + 1))
    grid = np.unique(np.geomspace(1, n_max, num=points).round().astype(int))
    return [int(n) for n in grid]


def _ratio(value: Numeric, bound: Optional[float]) -> Optional[float]:
    if bound is None or bound == 0:
        return None
    return float(value) / float(bound)


def _check(name: str, exact: Numeric, bound: Optional[float]) -> None:
    if bound is not None and exact > bound:
        raise BoundViolation(name, exact, bound)


# ==============================================================================
# Growth sweep
# ==============================================================================

def growth_sweep(
    p: Distribution,
    q: Distribution,
    n_max: int,
    n_values: Optional[Iterable[int]] = None,
    type_class_limit: int = DEFAULT_TYPE_CLASS_LIMIT,
    ulps: int = DEFAULT_UPWARD_ULPS,
    equality_tolerance: float = DEFAULT_EQUALITY_TOLERANCE,
) -> SweepTable:
    """
    One row per n: exact distance, the linear bound, both square-root bounds when
    pbar > 0, and the quotient of the distance by each (uncapped for the linear
    one, so values near one mean the linear bound is almost tight).
    """
    delta_1 = variational_distance(p, q)
    profile = diff_profile(p, q, equality_tolerance)
    pbar = profile.min_diff_prob if profile.pbar_positive else None
    ns = sorted(set(n_values)) if n_values is not None else n_grid(n_max)

    table = SweepTable(
        kind="growth",
        columns=GROWTH_COLUMNS,
        meta={"delta_1": delta_1, "pbar": pbar, "field": p.field.value, "n_max": max(ns)},
    )
    for n in ns:
        engine, exact = exact_distance(
            p, q, n, type_class_limit=type_class_limit, equality_tolerance=equality_tolerance
        )
        if engine is None:
            raise OutOfRange(f"No exact engine accepts n={n}")
        linear = linear_bound(delta_1, n, ulps)
        first = lemma1_first_bound(delta_1, pbar, n, ulps) if pbar is not None else None
        second = lemma1_second_bound(delta_1, pbar, n, ulps) if pbar is not None else None
        _check("linear", exact, linear.value)
        _check("lemma1_first", exact, first)
        _check("lemma1_second", exact, second)
        table.add(
            n=n,
            engine=engine,
            exact=exact,
            linear=linear.value,
            linear_capped=linear.capped,
            lemma1_first=first,
            lemma1_second=second,
            ratio_linear=_ratio(exact, n * delta_1),
            ratio_first=_ratio(exact, first),
            ratio_second=_ratio(exact, second),
        )
    logger.info(f"Growth sweep over {len(ns)} value(s) of n, delta={delta_1}, pbar={pbar}")
    return table


def loglog_slope(ns: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of log(value) against log(n)."""
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray([float(v) for v in values], dtype=float))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


# ==============================================================================
# Tightness and constant probes
# ==============================================================================

def probe_pair(
    pbar: Any,
    delta: Any,
    field: NumericField = NumericField.FLOAT,
) -> Tuple[Distribution, Distribution]:
    """
    P = (pbar + e, pbar, rest), Q = (pbar, pbar + e, rest) with e = min(delta, 1 - 2 pbar).

    The pair differs at two labels, has minimum differing probability pbar and
    distance e. No such pair exists at pbar = 1/2.
    """
    pb = to_field(pbar, field)
    if not 0 < pb < Fraction(1, 2):
        raise OutOfRange(f"A two-point pair with minimum differing probability {pbar} needs 0 < pbar < 1/2")
    eps = min(to_field(delta, field), 1 - 2 * pb)
    if not eps > 0:
        raise OutOfRange(f"delta must be positive, got {delta}")
    rest = 1 - 2 * pb - eps
    p_probs, q_probs = [pb + eps, pb], [pb, pb + eps]
    labels = ["a", "b"]
    if rest > 0:
        p_probs.append(rest)
        q_probs.append(rest)
        labels.append("rest")
    return (
        Distribution.from_probs(p_probs, labels, field),
        Distribution.from_probs(q_probs, labels, field),
    )


def tightness_probe(
    pbar: Any,
    n_max: int,
    delta: Any = DEFAULT_PROBE_DELTA,
    regime: float = DEFAULT_REGIME,
    points: Optional[int] = None,
    field: NumericField = NumericField.FLOAT,
    ulps: int = DEFAULT_UPWARD_ULPS,
) -> SweepTable:
    """
    exact / lemma1_first as n grows for a small-distance two-point pair.

    Rows with exact < ``regime`` are flagged in-regime; the metadata records the
    regime and the largest in-regime quotient.
    """
    p, q = probe_pair(pbar, delta, field)
    family, t = TwoPointFamily.from_pair(p, q)
    delta_1 = variational_distance(p, q)
    pb = diff_profile(p, q).min_diff_prob

    table = SweepTable(
        kind="tightness",
        columns=TIGHTNESS_COLUMNS,
        meta={"pbar": pb, "delta_1": delta_1, "regime": regime, "field": field.value},
    )
    running = 0.0
    best_in_regime = None
    for n in n_grid(n_max, points):
        exact = two_point_distance(family, t, n)
        bound = lemma1_first_bound(delta_1, pb, n, ulps)
        _check("lemma1_first", exact, bound)
        quotient = float(exact) / bound
        running = max(running, quotient)
        in_regime = float(exact) < regime
        if in_regime:
            best_in_regime = quotient if best_in_regime is None else max(best_in_regime, quotient)
        table.add(n=n, exact=exact, lemma1_first=bound, quotient=quotient, running_max=running, in_regime=in_regime)
    table.meta["max_quotient"] = running
    table.meta["max_quotient_in_regime"] = best_in_regime
    return table


def constant_probe(
    n_max: int,
    pbars: Sequence[Any] = DEFAULT_PBARS,
    deltas: Sequence[Any] = DEFAULT_DELTAS,
    points: Optional[int] = None,
    field: NumericField = NumericField.FLOAT,
) -> SweepTable:
    """
    c_required(n) = pbar (exact / delta)^2 / n over a grid of two-point pairs.

    The square-root bound with constant 1/2 means c_required never exceeds 1/2;
    the supremum found is recorded in the metadata.
    """
    table = SweepTable(
        kind="constant",
        columns=CONSTANT_COLUMNS,
        meta={"pbars": list(pbars), "deltas": list(deltas), "n_max": n_max, "field": field.value},
    )
    sup, sup_at = 0.0, None
    ns = n_grid(n_max, points)
    for pbar in pbars:
        for delta in deltas:
            p, q = probe_pair(pbar, delta, field)
            family, t = TwoPointFamily.from_pair(p, q)
            eps = variational_distance(p, q)
            pb = float(diff_profile(p, q).min_diff_prob)
            for n in ns:
                exact = two_point_distance(family, t, n)
                c_required = pb * (float(exact) / float(eps)) ** 2 / n
                if c_required > MAX_CONSTANT * (1 + 1e-12):
                    raise BoundViolation("constant", c_required, MAX_CONSTANT)
                if c_required > sup:
                    sup, sup_at = c_required, (float(pbar), float(eps), n)
                table.add(pbar=pbar, delta=eps, n=n, exact=exact, c_required=c_required)
    table.meta["sup_c_required"] = sup
    table.meta["sup_at"] = sup_at
    logger.info(f"Constant probe: sup c_required = {sup:.6f} at {sup_at}")
    return table


# ==============================================================================
# Path integral
# ==============================================================================

class PathIntegral(NamedTuple):
    distance: Numeric
    integral: float


def _segment_bound(fam: TwoPointFamily, t: Any, n: int) -> float:
    x, y = fam.point(t)
    if not (x > 0 and y > 0):
        raise OutOfRange(f"The derivative bound is unbounded at t={t} (P_t(z1)={x}, P_t(z2)={y})")
    return lemma2_first_bound(x, y, n)


def _path_grid(fam: TwoPointFamily, lo: Any, hi: Any, grid: int) -> List[Any]:
    points = [lo + (hi - lo) * i / grid for i in range(grid + 1)]
    # the bound decreases up to P_t(z1) = (p + p')/2 and increases after it
    midpoint = fam.t0 + fam.mass / 2 - fam.p
    if lo < midpoint < hi and midpoint not in points:
        points.append(midpoint)
        points.sort()
    return points


def path_integral_check(
    fam: TwoPointFamily,
    t_from: Any,
    t_to: Any,
    n: int,
    grid: int = 64,
    ulps: int = DEFAULT_UPWARD_ULPS,
) -> PathIntegral:
    """
    delta(P_{t_to}^n, P_{t_from}^n) and an upper Riemann sum of the derivative bound
    between the two parameters. The grid gains the point where the bound switches
    from decreasing to increasing, so each cell's supremum sits at an endpoint.
    """
    if grid < 1:
        raise OutOfRange(f"grid must be positive, got {grid}")
    lo, hi = to_field(t_from, fam.field), to_field(t_to, fam.field)
    if lo > hi:
        lo, hi = hi, lo
    if lo == hi:
        fam.point(lo)
        zero = Fraction(0) if fam.field is NumericField.RATIONAL else 0.0
        return PathIntegral(zero, 0.0)

    distance = two_point_distance(fam.rebase(lo), hi, n)
    points = _path_grid(fam, lo, hi, grid)
    values = [_segment_bound(fam, t, n) for t in points]
    cells = [float(b - a) * max(va, vb) for a, b, va, vb in zip(points, points[1:], values, values[1:])]
    integral = round_up(math.fsum(cells), ulps)
    if distance > integral:
        raise BoundViolation("path_integral", distance, integral)
    return PathIntegral(distance, integral)


def lemma1_path_bound(fam: TwoPointFamily, t_from: Any, t_to: Any, n: int, ulps: int = DEFAULT_UPWARD_ULPS) -> float:
    """|t_to - t_from| sqrt(2/pbar) sqrt(n + 1/pbar) / sqrt(2 pi), pbar the smallest endpoint mass."""
    lo, hi = to_field(t_from, fam.field), to_field(t_to, fam.field)
    pbar = min(min(fam.point(lo)), min(fam.point(hi)))
    return round_up(float(abs(hi - lo)) * lemma1_proof_coefficient(pbar, n), ulps)


def path_derivative_check(
    fam: TwoPointFamily,
    t_from: Any,
    t: Any,
    n: int,
    h: Any = Fraction(1, 10**6),
) -> Tuple[float, float]:
    """
    (forward difference of r -> delta(P_r^n, P_{t_from}^n) at t, derivative bound at t).

    The first never exceeds the second up to O(h).
    """
    h = to_field(h, fam.field)
    if not h > 0:
        raise OutOfRange(f"Step must be positive, got {h}")
    start = fam.rebase(t_from)
    t = to_field(t, fam.field)
    slope = (two_point_distance(start, t + h, n) - two_point_distance(start, t, n)) / h
    return float(slope), _segment_bound(fam, t, n)
