"""
Finite-support probability distributions and the variational distance.

A Distribution is an immutable pair (labels, probs) tagged with the numeric
field its probabilities live in. Pairs of distributions are compared over the
union of their alphabets, with missing labels carrying probability zero.
"""

import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field

from prodist.core.errors import DuplicateLabel, FieldMismatch, NegativeProbability, NonFiniteProbability, SumNotOne
from prodist.core.numeric import (
    DEFAULT_EQUALITY_TOLERANCE,
    DEFAULT_SUM_TOLERANCE,
    DEFAULT_UPWARD_ULPS,
    Numeric,
    NumericField,
    exact_sum,
    field_of,
    round_up,
    to_field,
    zero,
)

logger = logging.getLogger("prodist.core.distribution")


class Distribution(BaseModel):
    """A probability vector over a labelled finite alphabet."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    labels: Tuple[str, ...]
    probs: Tuple[Any, ...]
    field: NumericField = NumericField.RATIONAL

    @classmethod
    def from_probs(
        cls,
        probs: Sequence[Any],
        labels: Optional[Sequence[str]] = None,
        field: Optional[NumericField] = None,
    ) -> "Distribution":
        """
        Build a distribution, converting every probability into ``field``.

        Labels default to "z1", "z2", ... When ``field`` is omitted it is
        inferred: all-Fraction/int/str input is rational, anything else float.
        """
        probs = list(probs)
        if field is None:
            if all(isinstance(p, str) or field_of(p) is NumericField.RATIONAL for p in probs):
                field = NumericField.RATIONAL
            else:
                field = NumericField.FLOAT
        if labels is None:
            labels = [f"z{i + 1}" for i in range(len(probs))]
        if len(labels) != len(probs):
            raise ValueError(f"{len(labels)} labels for {len(probs)} probabilities")
        return cls(
            labels=tuple(str(label) for label in labels),
            probs=tuple(to_field(p, field) for p in probs),
            field=field,
        )

    @classmethod
    def from_json(cls, data: Dict[str, Any], field: Optional[NumericField] = None) -> "Distribution":
        """Parse ``{"labels": [...], "probs": [...]}`` or the ``{"probs": [...]}`` shorthand."""
        if "probs" not in data:
            raise ValueError("Distribution JSON requires a 'probs' array")
        return cls.from_probs(data["probs"], data.get("labels"), field)

    def to_json(self) -> Dict[str, Any]:
        probs = [str(p) for p in self.probs] if self.field is NumericField.RATIONAL else list(self.probs)
        return {"labels": list(self.labels), "probs": probs}

    def prob(self, label: str) -> Numeric:
        """P(label), zero for labels outside the alphabet."""
        try:
            return self.probs[self.labels.index(label)]
        except ValueError:
            return zero(self.field)

    def as_dict(self) -> Dict[str, Numeric]:
        return dict(zip(self.labels, self.probs))

    def with_probs(self, probs: Sequence[Numeric]) -> "Distribution":
        """Same alphabet and field, new probabilities (taken as already in the field)."""
        return Distribution(labels=self.labels, probs=tuple(probs), field=self.field)

    def to_float(self) -> "Distribution":
        if self.field is NumericField.FLOAT:
            return self
        return Distribution(labels=self.labels, probs=tuple(float(p) for p in self.probs), field=NumericField.FLOAT)

    def __len__(self) -> int:
        return len(self.labels)


class DiffProfile(BaseModel):
    """The difference set and the minimum differing probability of a pair."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    diff_set: Tuple[str, ...] = Field(default_factory=tuple)
    min_diff_prob: Optional[Any] = None

    @property
    def is_empty(self) -> bool:
        return not self.diff_set

    @property
    def pbar_positive(self) -> bool:
        return self.min_diff_prob is not None and self.min_diff_prob > 0


# ==============================================================================
# Operations
# ==============================================================================

def validate(d: Distribution, sum_tolerance: float = DEFAULT_SUM_TOLERANCE) -> None:
    """
    Check the Distribution invariants; raise on the first violation.

    Rational distributions must sum to exactly one, float distributions to within
    ``sum_tolerance``. Nothing is renormalised.
    """
    seen = set()
    for label in d.labels:
        if label in seen:
            raise DuplicateLabel(label)
        seen.add(label)

    for label, p in zip(d.labels, d.probs):
        if d.field is NumericField.FLOAT and not math.isfinite(p):
            raise NonFiniteProbability(label, p)
        if p < 0:
            raise NegativeProbability(label, p)

    total = exact_sum(d.probs)
    deviation = total - 1
    if d.field is NumericField.RATIONAL:
        if deviation != 0:
            raise SumNotOne(total, deviation)
    elif abs(deviation) > sum_tolerance:
        raise SumNotOne(total, deviation)


def align(p: Distribution, q: Distribution) -> Tuple[Tuple[str, ...], List[Numeric], List[Numeric]]:
    """
    Merge two alphabets by label union (P's order first, then Q's new labels).

    Returns the merged labels and both probability vectors over them.
    """
    if p.field is not q.field:
        raise FieldMismatch(f"Cannot compare a {p.field.value} distribution with a {q.field.value} one")
    labels = list(p.labels)
    known = set(labels)
    for label in q.labels:
        if label not in known:
            labels.append(label)
            known.add(label)
    pmap, qmap = p.as_dict(), q.as_dict()
    nil = zero(p.field)
    return tuple(labels), [pmap.get(z, nil) for z in labels], [qmap.get(z, nil) for z in labels]


def align_distributions(p: Distribution, q: Distribution) -> Tuple[Distribution, Distribution]:
    """Both distributions re-expressed over the merged alphabet."""
    labels, pv, qv = align(p, q)
    return (
        Distribution(labels=labels, probs=tuple(pv), field=p.field),
        Distribution(labels=labels, probs=tuple(qv), field=q.field),
    )


def variational_distance(p: Distribution, q: Distribution) -> Numeric:
    """delta(P, Q) = 1/2 sum_z |P(z) - Q(z)|, exact in rational mode."""
    _, pv, qv = align(p, q)
    return exact_sum(abs(a - b) for a, b in zip(pv, qv)) / 2


def diff_profile(
    p: Distribution,
    q: Distribution,
    equality_tolerance: float = DEFAULT_EQUALITY_TOLERANCE,
) -> DiffProfile:
    """
    Labels where P and Q differ, and the smallest probability either assigns there.

    Comparison is exact in rational mode; in float mode values within
    ``equality_tolerance`` are treated as equal.
    """
    labels, pv, qv = align(p, q)
    if p.field is NumericField.RATIONAL:
        differs = [a != b for a, b in zip(pv, qv)]
    else:
        differs = [abs(a - b) > equality_tolerance for a, b in zip(pv, qv)]

    diff_set = tuple(z for z, d in zip(labels, differs) if d)
    if not diff_set:
        return DiffProfile()
    pbar = min(min(a, b) for a, b, d in zip(pv, qv, differs) if d)
    return DiffProfile(diff_set=diff_set, min_diff_prob=pbar)


def triangle_check(
    p: Distribution,
    p_mid: Distribution,
    q: Distribution,
    ulps: int = DEFAULT_UPWARD_ULPS,
) -> bool:
    """delta(P, Q) <= delta(P, P') + delta(P', Q); exact in rational mode, ulp slack in float mode."""
    lhs = variational_distance(p, q)
    rhs = variational_distance(p, p_mid) + variational_distance(p_mid, q)
    if p.field is NumericField.FLOAT:
        rhs = round_up(rhs, ulps)
    return lhs <= rhs
