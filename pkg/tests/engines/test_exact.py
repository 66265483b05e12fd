import math
from fractions import Fraction

import pytest

from prodist.core.distribution import Distribution
from prodist.core.errors import OutOfRange, TooLarge
from prodist.core.family import TwoPointFamily
from prodist.core.numeric import NumericField
from prodist.engines import exact
from prodist.engines.exact import (
    ProductQuery,
    binomial_weights,
    brute_force_distance,
    compositions,
    iter_type_classes,
    to_query,
    two_point_distance,
    two_point_pair_distance,
    type_class_count,
    type_class_distance,
)
from tests.conftest import rational_probs

F = Fraction


def pair(p, q, n, field=None):
    return to_query(Distribution.from_probs(p), Distribution.from_probs(q), n, field)


# ==============================================================================
# Brute force
# ==============================================================================

def test_brute_force_small_example():
    # |1/4 - 4/25| + 2 |1/4 - 6/25| + |1/4 - 9/25| = 11/50, halved
    assert brute_force_distance(pair([F(1, 2), F(1, 2)], [F(2, 5), F(3, 5)], 2)) == F(11, 100)


def test_brute_force_n1_is_single_letter_distance():
    query = pair([F(1, 2), F(3, 10), F(1, 5)], [F(1, 5), F(1, 2), F(3, 10)], 1)
    assert brute_force_distance(query) == F(3, 10)


def test_brute_force_point_masses():
    query = pair([F(1), F(0)], [F(99, 100), F(1, 100)], 10)
    assert brute_force_distance(query) == 1 - F(99, 100) ** 10


def test_brute_force_guard():
    query = pair([F(1, 4)] * 4, [F(1, 4)] * 4, 12)
    with pytest.raises(TooLarge) as info:
        brute_force_distance(query, limit=10**6)
    assert info.value.size == 4**12
    assert info.value.limit == 10**6


def test_brute_force_float_matches_rational():
    query = pair([F(1, 2), F(1, 2)], [F(2, 5), F(3, 5)], 5)
    exact_value = brute_force_distance(query)
    float_value = brute_force_distance(to_query(query.p, query.q, 5, NumericField.FLOAT))
    assert float_value == pytest.approx(float(exact_value), abs=1e-12)


# ==============================================================================
# Type classes
# ==============================================================================

def test_type_class_count():
    assert type_class_count(3, 4) == 15
    assert type_class_count(2, 100) == 101


def test_compositions_order_and_count():
    comps = list(compositions(2, 3))
    assert comps[0] == (0, 0, 2)
    assert comps[-1] == (2, 0, 0)
    assert len(comps) == type_class_count(3, 2)
    assert all(sum(c) == 2 for c in comps)


def test_type_class_weights_sum_to_one():
    query = pair([F(1, 2), F(3, 10), F(1, 5)], [F(1, 5), F(1, 2), F(3, 10)], 4)
    classes = list(iter_type_classes(query))
    assert sum((tc.weight_p for tc in classes), F(0)) == 1
    assert sum((tc.weight_q for tc in classes), F(0)) == 1


def test_engines_agree_exactly(rng):
    for _ in range(60):
        size = int(rng.integers(2, 5))
        n = int(rng.integers(1, 6))
        query = to_query(
            Distribution.from_probs(rational_probs(rng, size)),
            Distribution.from_probs(rational_probs(rng, size)),
            n,
        )
        assert brute_force_distance(query) == type_class_distance(query)


@pytest.mark.slow
def test_engines_agree_exactly_full_scan(rng):
    for _ in range(500):
        size = int(rng.integers(2, 5))
        n = int(rng.integers(1, 7))
        p = Distribution.from_probs(rational_probs(rng, size))
        q = Distribution.from_probs(rational_probs(rng, size))
        query = to_query(p, q, n)
        value = brute_force_distance(query)
        assert value == type_class_distance(query)
        float_query = to_query(p, q, n, NumericField.FLOAT)
        assert type_class_distance(float_query) == pytest.approx(float(value), abs=1e-12)


def test_type_class_float_matches_rational(rng):
    for _ in range(20):
        p = Distribution.from_probs(rational_probs(rng, 3))
        q = Distribution.from_probs(rational_probs(rng, 3))
        value = type_class_distance(to_query(p, q, 5))
        assert type_class_distance(to_query(p, q, 5, NumericField.FLOAT)) == pytest.approx(float(value), abs=1e-12)


@pytest.mark.parametrize("partitions", [2, 3, 7])
def test_partitioned_reduction_is_partition_independent(partitions):
    query = pair([F(1, 2), F(3, 10), F(1, 5)], [F(1, 5), F(1, 2), F(3, 10)], 6)
    assert type_class_distance(query, partitions=partitions) == type_class_distance(query)


def test_type_class_guard():
    query = pair([F(1, 10)] * 10, [F(1, 10)] * 10, 30)
    with pytest.raises(TooLarge):
        type_class_distance(query, limit=1000)


def test_query_rejects_mixed_fields():
    with pytest.raises(ValueError):
        ProductQuery(p=Distribution.from_probs([F(1)]), q=Distribution.from_probs([1.0]), n=1)


def test_query_rejects_nonpositive_n():
    with pytest.raises(ValueError):
        pair([F(1)], [F(1)], 0)


# ==============================================================================
# Two-point decomposition
# ==============================================================================

def test_binomial_weights_exact():
    weights = binomial_weights(3, F(1, 2))
    assert weights == [F(1, 8), F(3, 8), F(3, 8), F(1, 8)]


def test_binomial_weights_float_mass_one():
    weights = binomial_weights(4, 1.0)
    assert weights[-1] == pytest.approx(1.0)
    assert sum(weights[:-1]) == 0.0


def test_two_point_matches_type_class(rng):
    for _ in range(30):
        probs = rational_probs(rng, 4, positive=True)
        p = Distribution.from_probs(probs)
        shift = min(probs[0], probs[1]) * F(int(rng.integers(1, 10)), 10)
        q = p.with_probs([probs[0] - shift, probs[1] + shift, probs[2], probs[3]])
        n = int(rng.integers(1, 9))
        assert two_point_pair_distance(p, q, n) == type_class_distance(to_query(p, q, n))


def test_two_point_small_example():
    p = Distribution.from_probs([F(1, 2), F(1, 2)])
    q = Distribution.from_probs([F(2, 5), F(3, 5)])
    assert two_point_pair_distance(p, q, 2) == F(11, 100)


def test_two_point_float_large_n_stays_finite():
    base = Distribution.from_probs([0.5, 0.5])
    fam = TwoPointFamily(base=base, z1="z1", z2="z2")
    value = two_point_distance(fam, 0.502, 10_000)
    assert 0.0 < value < 1.0
    assert math.isfinite(value)


def test_two_point_float_matches_rational():
    base = Distribution.from_probs([F(1, 5), F(3, 10), F(1, 2)])
    fam = TwoPointFamily(base=base, z1="z1", z2="z2")
    value = two_point_distance(fam, F(1, 4), 40)
    float_fam = TwoPointFamily(base=base.to_float(), z1="z1", z2="z2")
    assert two_point_distance(float_fam, 0.25, 40) == pytest.approx(float(value), rel=1e-10)


def test_two_point_at_t0_is_zero():
    base = Distribution.from_probs([F(1, 5), F(4, 5)])
    fam = TwoPointFamily(base=base, z1="z1", z2="z2")
    assert two_point_distance(fam, fam.t0, 10) == 0


def test_two_point_out_of_range():
    base = Distribution.from_probs([F(1, 5), F(4, 5)])
    fam = TwoPointFamily(base=base, z1="z1", z2="z2")
    with pytest.raises(OutOfRange):
        two_point_distance(fam, F(6, 5), 3)
    with pytest.raises(OutOfRange):
        two_point_distance(fam, F(1, 2), 0)


def test_default_guards():
    assert exact.DEFAULT_BRUTE_FORCE_LIMIT == 10**7
    assert exact.DEFAULT_TYPE_CLASS_LIMIT == 10**7


def test_binomial_mass_clamps_float_overshoot():
    fam = TwoPointFamily(base=Distribution.from_probs([0.5, 0.5 + 1e-13]), z1="z1", z2="z2")
    assert fam.binomial_mass() == 1.0
    assert fam.mass > 1.0
    value = two_point_distance(fam, 0.6, 5)
    assert 0.0 < value < 1.0
    wide = TwoPointFamily(base=Distribution.from_probs([0.5, 0.5 + 1e-9]), z1="z1", z2="z2")
    with pytest.raises(OutOfRange):
        wide.binomial_mass()


def test_binomial_weights_mean_is_n_times_mass():
    for n, mass in [(1, F(1, 3)), (7, F(2, 5)), (20, F(9, 10)), (12, F(1))]:
        weights = binomial_weights(n, mass)
        assert sum(weights) == 1
        assert sum(k * w for k, w in enumerate(weights)) == n * mass


# ==============================================================================
# Structural properties
# ==============================================================================

def test_distance_nondecreasing_in_n(rng):
    for _ in range(15):
        p = Distribution.from_probs(rational_probs(rng, 3))
        q = Distribution.from_probs(rational_probs(rng, 3))
        values = [type_class_distance(to_query(p, q, n)) for n in range(1, 9)]
        assert all(a <= b for a, b in zip(values, values[1:]))
        assert values[-1] <= 1


def test_engines_invariant_under_relabelling(rng):
    for _ in range(10):
        probs = rational_probs(rng, 4, positive=True)
        shift = min(probs[0], probs[1]) * F(int(rng.integers(1, 10)), 10)
        other = [probs[0] - shift, probs[1] + shift, probs[2], probs[3]]
        order = rng.permutation(4).tolist()
        p = Distribution.from_probs(probs)
        q = Distribution.from_probs(other)
        p_perm = Distribution.from_probs([probs[i] for i in order])
        q_perm = Distribution.from_probs([other[i] for i in order])
        n = int(rng.integers(1, 6))
        reference = brute_force_distance(to_query(p, q, n))
        assert brute_force_distance(to_query(p_perm, q_perm, n)) == reference
        assert type_class_distance(to_query(p_perm, q_perm, n)) == reference
        assert two_point_pair_distance(p_perm, q_perm, n) == reference
        assert two_point_pair_distance(q_perm, p_perm, n) == reference


def test_float_matches_rational_on_eight_letters(rng):
    for _ in range(5):
        p = Distribution.from_probs(rational_probs(rng, 8))
        q = Distribution.from_probs(rational_probs(rng, 8))
        for n in (2, 4):
            value = type_class_distance(to_query(p, q, n))
            float_value = type_class_distance(to_query(p, q, n, NumericField.FLOAT))
            assert float_value == pytest.approx(float(value), abs=1e-12)


# ==============================================================================
# Full-scale scans
# ==============================================================================

@pytest.mark.slow
def test_two_point_float_matches_rational_full_scan(rng):
    for _ in range(200):
        probs = rational_probs(rng, 3, positive=True)
        p = Distribution.from_probs(probs)
        shift = min(probs[0], probs[1]) * F(int(rng.integers(1, 10)), 10)
        q = p.with_probs([probs[0] - shift, probs[1] + shift, probs[2]])
        n = int(rng.integers(1, 51))
        value = two_point_pair_distance(p, q, n)
        assert 0 <= value <= 1
        assert two_point_pair_distance(p.to_float(), q.to_float(), n) == pytest.approx(float(value), abs=1e-12)
        assert value == type_class_distance(to_query(p, q, n))
