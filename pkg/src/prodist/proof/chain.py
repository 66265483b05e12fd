"""
Two-point chains between arbitrary distributions.

Any pair (P, Q) is joined by P = P_1, ..., P_m = Q where consecutive members
differ at exactly two labels of the difference set D. Mass moves greedily from
the first surplus label to the first deficit label (merged-alphabet order), so
each coordinate travels monotonically from P(z) to Q(z). That gives additive
step distances and keeps every coordinate in D at or above pbar.
"""

import logging
import math
from fractions import Fraction
from typing import Any, Dict, List, Tuple

from pydantic import BaseModel, ConfigDict

from prodist.core.distribution import Distribution, align_distributions, diff_profile, variational_distance
from prodist.core.errors import BoundViolation, PbarNotPositive
from prodist.core.numeric import (
    DEFAULT_EQUALITY_TOLERANCE,
    DEFAULT_SUM_TOLERANCE,
    DEFAULT_UPWARD_ULPS,
    Numeric,
    NumericField,
    exact_sum,
    render,
    round_up,
)
from prodist.engines.exact import type_class_count
from prodist.proof.bounds import BoundReport, ChainSummary, bound_report, exact_distance

logger = logging.getLogger("prodist.proof.chain")

DEFAULT_ASSEMBLY_LIMIT = 10**5


class ChainDecomposition(BaseModel):
    """The chain itself: m distributions, m - 1 label pairs and m - 1 step distances."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    steps: List[Distribution]
    step_pairs: List[Tuple[str, str]]
    step_distances: List[Any]

    @property
    def length(self) -> int:
        return len(self.steps)

    def total_distance(self) -> Numeric:
        if not self.step_distances:
            return Fraction(0) if self.steps[0].field is NumericField.RATIONAL else 0.0
        return exact_sum(self.step_distances)

    def to_json(self) -> Dict[str, Any]:
        return {
            "steps": [s.to_json() for s in self.steps],
            "step_pairs": [list(pair) for pair in self.step_pairs],
            "step_distances": [render(d) for d in self.step_distances],
        }


def two_point_chain(
    p: Distribution,
    q: Distribution,
    equality_tolerance: float = DEFAULT_EQUALITY_TOLERANCE,
) -> ChainDecomposition:
    """
    Greedy monotone transport from P to Q.

    Each step moves min(C(z+) - Q(z+), Q(z-) - C(z-)) from the first surplus label
    z+ to the first deficit label z-, so at least one coordinate reaches its target
    and the chain has at most |D| members. In float mode coordinates within
    ``equality_tolerance`` of their target are snapped onto it, and the residue
    left when the two sums differ by rounding is folded into the last step so the
    chain ends exactly on Q. A float pair that differs only by such residue
    yields the single-member chain [P].
    """
    pa, qa = align_distributions(p, q)
    labels = pa.labels
    target = list(qa.probs)
    current = list(pa.probs)
    floating = pa.field is NumericField.FLOAT

    def settled(i: int) -> bool:
        if floating:
            return abs(current[i] - target[i]) <= equality_tolerance
        return current[i] == target[i]

    steps = [pa]
    pairs: List[Tuple[str, str]] = []
    distances: List[Numeric] = []
    while True:
        if floating:
            for i in range(len(current)):
                if settled(i):
                    current[i] = target[i]
        surplus = next((i for i in range(len(current)) if not settled(i) and current[i] > target[i]), None)
        deficit = next((i for i in range(len(current)) if not settled(i) and current[i] < target[i]), None)
        if surplus is None or deficit is None:
            break
        gap_plus = current[surplus] - target[surplus]
        gap_minus = target[deficit] - current[deficit]
        if gap_plus <= gap_minus:
            moved = gap_plus
            current[surplus] = target[surplus]
            current[deficit] = current[deficit] + moved
        else:
            moved = gap_minus
            current[deficit] = target[deficit]
            current[surplus] = current[surplus] - moved
        nxt = pa.with_probs(current)
        distances.append(variational_distance(steps[-1], nxt))
        pairs.append((labels[surplus], labels[deficit]))
        steps.append(nxt)

    if len(steps) > 1 and steps[-1].probs != qa.probs:
        steps[-1] = qa
        distances[-1] = variational_distance(steps[-2], qa)
    if floating and steps[-1].probs != qa.probs:
        residue = max(abs(a - b) for a, b in zip(steps[-1].probs, qa.probs))
        logger.debug(f"Pair differs only by rounding residue {residue:.3g}; no two-point step taken")
    logger.debug(f"Two-point chain with {len(steps)} member(s) over {len(labels)} labels")
    return ChainDecomposition(steps=steps, step_pairs=pairs, step_distances=distances)


def chain_invariants(
    chain: ChainDecomposition,
    p: Distribution,
    q: Distribution,
    equality_tolerance: float = DEFAULT_EQUALITY_TOLERANCE,
    sum_tolerance: float = DEFAULT_SUM_TOLERANCE,
) -> Dict[str, bool]:
    """
    The four chain properties: endpoints, two-point steps inside D, the pbar floor
    on D, and additivity of step distances. Exact in rational mode.

    In float mode a step may also shift labels outside its pair by at most
    ``sum_tolerance`` (the rounding residue folded into the last step), and the
    endpoint and additivity checks allow the same slack.
    """
    pa, qa = align_distributions(p, q)
    profile = diff_profile(pa, qa, equality_tolerance)
    d_set = set(profile.diff_set)
    floating = pa.field is NumericField.FLOAT

    def residue(a: Distribution, b: Distribution, z: str) -> bool:
        return floating and abs(a.prob(z) - b.prob(z)) <= sum_tolerance

    last = chain.steps[-1]
    if floating:
        end_ok = all(abs(x - y) <= sum_tolerance for x, y in zip(last.probs, qa.probs))
    else:
        end_ok = last.probs == qa.probs
    endpoints = chain.steps[0].probs == pa.probs and end_ok

    two_point = len(chain.step_pairs) == len(chain.steps) - 1
    for (a, b), pair in zip(zip(chain.steps, chain.steps[1:]), chain.step_pairs):
        moved = set(diff_profile(a, b, equality_tolerance).diff_set)
        stray = {z for z in moved - set(pair) if not residue(a, b, z)}
        if len(set(pair)) != 2 or not set(pair) <= d_set or not moved or stray:
            two_point = False

    floor = True
    if profile.pbar_positive:
        for step in chain.steps:
            if min(step.prob(z) for z in d_set) < profile.min_diff_prob:
                floor = False

    total = chain.total_distance()
    delta = variational_distance(pa, qa)
    additive = math.isclose(total, delta, rel_tol=1e-12, abs_tol=sum_tolerance) if floating else total == delta

    return {"endpoints": endpoints, "two_point": two_point, "pbar_floor": floor, "additive": additive}


def chain_bound_assembly(
    p: Distribution,
    q: Distribution,
    n: int,
    assembly_limit: int = DEFAULT_ASSEMBLY_LIMIT,
    ulps: int = DEFAULT_UPWARD_ULPS,
    equality_tolerance: float = DEFAULT_EQUALITY_TOLERANCE,
) -> BoundReport:
    """
    Assemble the general distance bound from the two-point special case.

    Per-step bounds c * delta(P_i, P_{i+1}) sum to c * delta(P, Q) for both bound
    constants c (exactly in rational mode). When the instance has at most
    ``assembly_limit`` type classes, delta(P^n, Q^n) <= sum_i delta(P_i^n, P_{i+1}^n)
    is also checked with the exact engines.
    """
    profile = diff_profile(p, q, equality_tolerance)
    if not profile.is_empty and not profile.pbar_positive:
        raise PbarNotPositive(profile.min_diff_prob)
    pbar = profile.min_diff_prob

    chain = two_point_chain(p, q, equality_tolerance)
    small = type_class_count(len(align_distributions(p, q)[0]), n) <= assembly_limit
    report = bound_report(p, q, n, compute_exact=small, ulps=ulps, equality_tolerance=equality_tolerance)

    rational = p.field is NumericField.RATIONAL
    if pbar is None:
        first_c = second_c = 0.0
    else:
        pb = float(pbar)
        first_c = math.sqrt(1.0 / (math.pi * pb)) * math.sqrt(n + 1.0 / pb)
        second_c = math.sqrt(n / (2.0 * pb))
    if rational:
        first_c, second_c = Fraction(first_c), Fraction(second_c)
    per_first = [first_c * d for d in chain.step_distances]
    per_second = [second_c * d for d in chain.step_distances]

    summary = ChainSummary(
        step_distances=chain.step_distances,
        per_step_first=per_first,
        per_step_second=per_second,
        sum_first=exact_sum(per_first) if per_first else 0,
        sum_second=exact_sum(per_second) if per_second else 0,
    )

    if small and len(chain.step_distances) > 0:
        step_products = []
        for a, b in zip(chain.steps, chain.steps[1:]):
            _, value = exact_distance(a, b, n, equality_tolerance=equality_tolerance)
            step_products.append(value)
        total_steps = exact_sum(step_products)
        product = report.exact
        summary.product_distance = product
        summary.sum_step_product_distances = total_steps
        limit = total_steps if rational else round_up(total_steps, ulps)
        if product is not None and product > limit:
            raise BoundViolation("triangle", product, total_steps)

    report.chain = summary
    logger.debug(f"Chain assembly n={n}: {len(chain.step_distances)} step(s), small={small}")
    return report
