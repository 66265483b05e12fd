from fractions import Fraction

import pytest

from prodist.core.distribution import Distribution, variational_distance
from prodist.core.errors import NonpositiveMass, NotTwoPoint, OutOfRange
from prodist.core.family import TwoPointFamily

F = Fraction


@pytest.fixture
def base():
    return Distribution.from_probs([F(1, 4), F(1, 4), F(1, 2)], labels=["a", "b", "c"])


def test_family_defaults_t0_to_p(base):
    fam = TwoPointFamily(base=base, z1="a", z2="b")
    assert fam.t0 == F(1, 4)
    assert fam.mass == F(1, 2)
    assert fam.alpha == F(1, 2)


def test_point_moves_at_unit_rate(base):
    fam = TwoPointFamily(base=base, z1="a", z2="b")
    assert fam.point(F(3, 10)) == (F(3, 10), F(1, 5))
    moved = fam.at(F(3, 10))
    assert moved.prob("c") == F(1, 2)
    assert variational_distance(moved, base) == F(1, 20)


def test_point_outside_simplex(base):
    fam = TwoPointFamily(base=base, z1="a", z2="b")
    with pytest.raises(OutOfRange):
        fam.point(F(3, 5))


def test_nonpositive_mass_rejected():
    d = Distribution.from_probs([F(0), F(1)], labels=["a", "b"])
    with pytest.raises(NonpositiveMass):
        TwoPointFamily(base=d, z1="a", z2="b")


def test_unknown_label_rejected(base):
    with pytest.raises(ValueError):
        TwoPointFamily(base=base, z1="a", z2="x")


def test_rebase_keeps_path(base):
    fam = TwoPointFamily(base=base, z1="a", z2="b")
    moved = fam.rebase(F(3, 10))
    assert moved.t0 == F(3, 10)
    assert moved.at(F(2, 5)) == fam.at(F(2, 5))


def test_from_pair_orients_z1_towards_q():
    p = Distribution.from_probs([F(1, 2), F(1, 2)], labels=["a", "b"])
    q = Distribution.from_probs([F(2, 5), F(3, 5)], labels=["a", "b"])
    fam, t = TwoPointFamily.from_pair(p, q)
    assert fam.z1 == "b"
    assert t == F(3, 5)
    assert fam.at(t) == q


def test_from_pair_requires_two_points():
    p = Distribution.from_probs([F(1, 2), F(3, 10), F(1, 5)])
    q = Distribution.from_probs([F(1, 5), F(1, 2), F(3, 10)])
    with pytest.raises(NotTwoPoint):
        TwoPointFamily.from_pair(p, q)
