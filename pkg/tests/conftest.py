from fractions import Fraction
from typing import Callable, List

import numpy as np
import pytest

from prodist.core.distribution import Distribution


def rational_probs(rng: np.random.Generator, size: int, scale: int = 12, positive: bool = False) -> List[Fraction]:
    """Random probability vector with small-integer weights, so sums stay exact."""
    low = 1 if positive else 0
    weights = rng.integers(low, scale + 1, size=size).tolist()
    if sum(weights) == 0:
        weights[0] = 1
    total = sum(weights)
    return [Fraction(w, total) for w in weights]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240531)


@pytest.fixture
def random_distribution(rng) -> Callable[..., Distribution]:
    def make(size: int, positive: bool = False, scale: int = 12) -> Distribution:
        return Distribution.from_probs(rational_probs(rng, size, scale, positive))
    return make
