"""
Two-point families: distributions that move mass at unit rate between two labels.

P_t(z1) = p + (t - t0), P_t(z2) = p' - (t - t0), every other label fixed. With the
default t0 = p this reads P_t(z1) = t, which is the parameterisation used when a
pair (P, Q) differing at two points is joined by a straight path.
"""

import logging
from typing import Any, Optional, Tuple

from pydantic import BaseModel, ConfigDict, model_validator

from prodist.core.distribution import Distribution, align_distributions, diff_profile
from prodist.core.errors import NonpositiveMass, NotTwoPoint, OutOfRange
from prodist.core.numeric import DEFAULT_EQUALITY_TOLERANCE, DEFAULT_SUM_TOLERANCE, Numeric, NumericField, to_field

logger = logging.getLogger("prodist.core.family")


class TwoPointFamily(BaseModel):
    """A one-parameter family P_t anchored at the base distribution P_{t0}."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    base: Distribution
    z1: str
    z2: str
    t0: Optional[Any] = None

    @model_validator(mode="after")
    def _check(self) -> "TwoPointFamily":
        if self.z1 == self.z2:
            raise ValueError("z1 and z2 must be distinct labels")
        for z in (self.z1, self.z2):
            if z not in self.base.labels:
                raise ValueError(f"Label '{z}' not in the base alphabet")
        if not (self.p > 0 and self.p_prime > 0):
            raise NonpositiveMass(f"Two-point masses must be positive (p={self.p}, p'={self.p_prime})")
        if self.t0 is None:
            object.__setattr__(self, "t0", self.p)
        else:
            object.__setattr__(self, "t0", to_field(self.t0, self.field))
        return self

    # --------------------------------------------------------------------------
    # Derived quantities
    # --------------------------------------------------------------------------

    @property
    def field(self) -> NumericField:
        return self.base.field

    @property
    def p(self) -> Numeric:
        return self.base.prob(self.z1)

    @property
    def p_prime(self) -> Numeric:
        return self.base.prob(self.z2)

    @property
    def mass(self) -> Numeric:
        """p + p', conserved along the family."""
        return self.p + self.p_prime

    def binomial_mass(self, sum_tolerance: float = DEFAULT_SUM_TOLERANCE) -> Numeric:
        """
        p + p' as the success probability of the binomial split over k.

        Float sums up to 1 + sum_tolerance (validated inputs that overshoot by
        rounding) are clamped to one.
        """
        mass = self.mass
        if mass <= 1:
            return mass
        if self.field is NumericField.FLOAT and mass <= 1 + sum_tolerance:
            return 1.0
        raise OutOfRange(f"p + p' = {mass} exceeds one")

    @property
    def alpha(self) -> Numeric:
        return self.p / self.mass

    @property
    def beta(self) -> Numeric:
        return self.p_prime / self.mass

    def point(self, t: Any) -> Tuple[Numeric, Numeric]:
        """(P_t(z1), P_t(z2)); raises OutOfRange if either leaves [0, p + p']."""
        shift = to_field(t, self.field) - self.t0
        x, y = self.p + shift, self.p_prime - shift
        if x < 0 or y < 0:
            raise OutOfRange(f"t={t} moves the family outside the simplex (P_t(z1)={x}, P_t(z2)={y})")
        return x, y

    def at(self, t: Any) -> Distribution:
        """The distribution P_t."""
        x, y = self.point(t)
        probs = []
        for label, value in zip(self.base.labels, self.base.probs):
            if label == self.z1:
                probs.append(x)
            elif label == self.z2:
                probs.append(y)
            else:
                probs.append(value)
        return self.base.with_probs(probs)

    def rebase(self, t: Any) -> "TwoPointFamily":
        """The same path, anchored at P_t (so t becomes the new reference parameter)."""
        return TwoPointFamily(base=self.at(t), z1=self.z1, z2=self.z2, t0=to_field(t, self.field))

    # --------------------------------------------------------------------------
    # Construction from a pair
    # --------------------------------------------------------------------------

    @classmethod
    def from_pair(
        cls,
        p: Distribution,
        q: Distribution,
        equality_tolerance: float = DEFAULT_EQUALITY_TOLERANCE,
    ) -> Tuple["TwoPointFamily", Numeric]:
        """
        The straight path from P to Q when they differ at exactly two labels.

        z1 is the label where P(z1) < Q(z1). Returns the family (P_t(z1) = t) and
        the parameter t = Q(z1) at which it reaches Q.
        """
        pa, qa = align_distributions(p, q)
        profile = diff_profile(pa, qa, equality_tolerance)
        if len(profile.diff_set) != 2:
            raise NotTwoPoint(f"Pair differs at {len(profile.diff_set)} labels, expected 2")
        a, b = profile.diff_set
        z1, z2 = (a, b) if pa.prob(a) < qa.prob(a) else (b, a)
        family = cls(base=pa, z1=z1, z2=z2)
        return family, qa.prob(z1)
