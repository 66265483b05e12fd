"""
Monte Carlo estimation of delta(P^n, Q^n).

delta(P^n, Q^n) = E_{z ~ P^n}[max(0, 1 - Q^n(z)/P^n(z))], and the likelihood
ratio of an i.i.d. string depends only on its symbol counts, so each sample is
one multinomial draw of counts over the support of P. Ratios are accumulated in
the log domain. Shards use independent generators spawned from one
SeedSequence and are combined in shard order.
"""

import logging
import math
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy.stats import norm

from prodist.core.numeric import safe_log
from prodist.engines.exact import ProductQuery

logger = logging.getLogger("prodist.engines.sampling")

MIN_SAMPLES = 100
CHUNK_SIZE = 100_000


class McEstimate(BaseModel):
    """
    Point estimate and normal-approximation interval half width.

    ``half_width_95`` keeps the name of the output field, but the width is taken
    at ``confidence`` (0.95 unless configured otherwise).
    """

    mean: float = Field(ge=0.0, le=1.0)
    half_width_95: float = Field(ge=0.0)
    samples: int
    seed: int
    shards: int = 1
    confidence: float = 0.95

    @property
    def interval(self) -> Tuple[float, float]:
        return self.mean - self.half_width_95, self.mean + self.half_width_95

    def covers(self, value: float) -> bool:
        lo, hi = self.interval
        return lo <= float(value) <= hi


def _shard_sizes(samples: int, shards: int) -> List[int]:
    base, extra = divmod(samples, shards)
    return [base + (1 if i < extra else 0) for i in range(shards)]


def _shard_moments(
    rng: np.random.Generator,
    size: int,
    n: int,
    probs: np.ndarray,
    log_ratio: np.ndarray,
) -> Tuple[int, float, float]:
    """(count, mean, sum of squared deviations) of the integrand over one shard."""
    values = []
    remaining = size
    while remaining > 0:
        batch = min(CHUNK_SIZE, remaining)
        counts = rng.multinomial(n, probs, size=batch)
        with np.errstate(invalid="ignore"):
            # a letter with Q(z) = 0 contributes -inf only when it was drawn
            per_letter = np.where(counts > 0, counts * log_ratio, 0.0)
        lr = per_letter.sum(axis=1)
        values.append(np.clip(-np.expm1(lr), 0.0, None))
        remaining -= batch
    x = np.concatenate(values)
    mean = math.fsum(x.tolist()) / size
    m2 = math.fsum(((x - mean) ** 2).tolist())
    return size, mean, m2


def mc_distance(
    query: ProductQuery,
    samples: int,
    seed: int = 0,
    shards: int = 1,
    confidence: float = 0.95,
) -> McEstimate:
    """
    Unbiased estimate of delta(P^n, Q^n) sampling from P^n only.

    Results depend only on (seed, samples, shards). Labels with P(z) = 0 are
    never drawn and are dropped before sampling.
    """
    if samples < MIN_SAMPLES:
        raise ValueError(f"At least {MIN_SAMPLES} samples are required, got {samples}")
    if shards < 1 or shards > samples:
        raise ValueError(f"Shard count must lie in [1, samples], got {shards}")

    _, pv, qv = query.aligned()
    support = [i for i, x in enumerate(pv) if x > 0]
    probs = np.array([float(pv[i]) for i in support])
    probs = probs / probs.sum()
    log_ratio = np.array([safe_log(float(qv[i])) - math.log(float(pv[i])) for i in support])

    children = np.random.SeedSequence(seed).spawn(shards)
    moments = [
        _shard_moments(np.random.default_rng(child), size, query.n, probs, log_ratio)
        for child, size in zip(children, _shard_sizes(samples, shards))
    ]

    mean = math.fsum(c * m for c, m, _ in moments) / samples
    m2 = math.fsum(s + c * (m - mean) ** 2 for c, m, s in moments)
    variance = m2 / (samples - 1)
    z = float(norm.ppf(0.5 + confidence / 2.0))
    half_width = z * math.sqrt(variance / samples)
    logger.debug(f"MC estimate {mean:.6g} +/- {half_width:.3g} from {samples} samples in {shards} shard(s)")
    return McEstimate(
        mean=min(max(mean, 0.0), 1.0),
        half_width_95=half_width,
        samples=samples,
        seed=seed,
        shards=shards,
        confidence=confidence,
    )
