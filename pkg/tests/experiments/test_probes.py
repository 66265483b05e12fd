from fractions import Fraction

import pytest

from prodist.core.distribution import Distribution
from prodist.core.errors import OutOfRange
from prodist.core.family import TwoPointFamily
from prodist.core.numeric import NumericField
from prodist.experiments.probes import (
    constant_probe,
    growth_sweep,
    lemma1_path_bound,
    loglog_slope,
    n_grid,
    path_derivative_check,
    path_integral_check,
    probe_pair,
    tightness_probe,
)
from tests.conftest import rational_probs

F = Fraction


@pytest.fixture
def fam():
    return TwoPointFamily(base=Distribution.from_probs([F(1, 5), F(3, 10), F(1, 2)]), z1="z1", z2="z2")


def test_n_grid():
    assert n_grid(5) == [1, 2, 3, 4, 5]
    grid = n_grid(10_000, 20)
    assert grid[0] == 1
    assert grid[-1] == 10_000
    assert grid == sorted(set(grid))
    with pytest.raises(OutOfRange):
        n_grid(0)


# ==============================================================================
# Growth sweep
# ==============================================================================

def test_growth_epsilon_example_is_nearly_linear():
    eps = F(1, 1000)
    p = Distribution.from_probs([F(1), F(0)])
    q = Distribution.from_probs([1 - eps, eps])
    table = growth_sweep(p, q, 100)
    assert table.column("n") == list(range(1, 101))
    for row in table.rows:
        n = row["n"]
        assert row["exact"] == 1 - (1 - eps) ** n
        assert row["ratio_linear"] >= 1 - n * float(eps) / 2
        assert row["ratio_linear"] >= 0.95
        assert row["lemma1_first"] is None
    assert table.meta["pbar"] is None


def test_growth_identical_pair_is_zero():
    p = Distribution.from_probs([F(1, 3), F(2, 3)])
    table = growth_sweep(p, p, 10)
    assert all(v == 0 for v in table.column("exact"))
    assert set(table.column("engine")) == {"identity"}
    assert all(v is None for v in table.column("ratio_linear"))


def test_growth_rows_report_square_root_bounds():
    p = Distribution.from_probs([F(1, 2), F(3, 10), F(1, 5)])
    q = Distribution.from_probs([F(1, 5), F(1, 2), F(3, 10)])
    table = growth_sweep(p, q, 6)
    for row in table.rows:
        assert row["engine"] == "type_class"
        assert row["exact"] <= row["lemma1_first"]
        assert row["exact"] <= row["lemma1_second"]
        assert 0 < row["ratio_first"] <= 1


@pytest.mark.slow
def test_growth_square_root_slope():
    p = Distribution.from_probs([0.5, 0.5])
    q = Distribution.from_probs([0.502, 0.498])
    ns = [100, 300, 1000, 3000, 10_000]
    table = growth_sweep(p, q, 10_000, n_values=ns)
    assert set(table.column("engine")) == {"two_point"}
    exact = table.column("exact")
    assert max(exact) < 0.5
    assert 0.45 <= loglog_slope(ns, exact) <= 0.55


def test_loglog_slope():
    ns = [1, 10, 100]
    assert loglog_slope(ns, [2.0, 20.0, 200.0]) == pytest.approx(1.0)
    assert loglog_slope(ns, [1.0, 10**0.5, 10.0]) == pytest.approx(0.5)


# ==============================================================================
# Probes
# ==============================================================================

def test_probe_pair():
    p, q = probe_pair(F(1, 4), F(1, 100), NumericField.RATIONAL)
    assert p.probs == (F(26, 100), F(1, 4), F(49, 100))
    assert q.probs == (F(1, 4), F(26, 100), F(49, 100))
    with pytest.raises(OutOfRange):
        probe_pair(0.5, 0.01)
    with pytest.raises(OutOfRange):
        probe_pair(0.0, 0.01)


def test_probe_pair_without_rest():
    p, q = probe_pair(F(2, 5), F(1, 2), NumericField.RATIONAL)
    assert p.labels == ("a", "b")
    assert p.probs == (F(3, 5), F(2, 5))


def test_tightness_probe():
    table = tightness_probe(0.25, 400, points=30)
    quotients = table.column("quotient")
    running = table.column("running_max")
    assert all(0 < x <= 1 for x in quotients)
    assert running == [max(quotients[: i + 1]) for i in range(len(quotients))]
    assert running[-1] >= quotients[0]
    assert table.meta["max_quotient"] == running[-1]
    assert table.meta["max_quotient_in_regime"] is not None
    assert table.meta["regime"] == 0.1


def test_tightness_probe_grows_in_regime():
    table = tightness_probe(0.3, 200, points=15)
    in_regime = [row["quotient"] for row in table.rows if row["in_regime"]]
    assert in_regime[-1] > in_regime[0]


def test_constant_probe():
    table = constant_probe(60, points=12)
    values = table.column("c_required")
    assert all(0 <= c <= 0.5 for c in values)
    assert table.meta["sup_c_required"] > 0.4
    assert table.meta["sup_c_required"] == max(values)
    assert table.meta["sup_at"] is not None


# ==============================================================================
# Path integral
# ==============================================================================

def test_path_integral_dominates_distance(fam):
    for n in [1, 5, 20, 60]:
        result = path_integral_check(fam, F(1, 5), F(7, 20), n)
        assert result.distance <= result.integral


def test_path_integral_crosses_midpoint(fam):
    # the bound switches from decreasing to increasing at P_t(z1) = 1/4
    result = path_integral_check(fam, F(1, 10), F(2, 5), 10, grid=8)
    assert result.distance <= result.integral


def test_path_integral_refinement(fam):
    coarse = path_integral_check(fam, F(1, 5), F(2, 5), 30, grid=64)
    fine = path_integral_check(fam, F(1, 5), F(2, 5), 30, grid=1024)
    assert coarse.integral >= fine.integral >= fine.distance
    assert coarse.distance == fine.distance


def test_path_integral_empty_interval(fam):
    assert path_integral_check(fam, F(1, 4), F(1, 4), 10) == (0, 0.0)


def test_path_integral_float_family():
    fam = TwoPointFamily(base=Distribution.from_probs([0.2, 0.3, 0.5]), z1="z1", z2="z2")
    result = path_integral_check(fam, 0.2, 0.35, 200)
    assert result.distance <= result.integral


def test_lemma1_path_bound(fam):
    for n in [1, 10, 50]:
        distance = path_integral_check(fam, F(1, 5), F(7, 20), n).distance
        assert distance <= lemma1_path_bound(fam, F(1, 5), F(7, 20), n)


def test_path_derivative_check(fam):
    for t in [F(1, 5), F(1, 4), F(3, 10)]:
        slope, bound = path_derivative_check(fam, F(1, 5), t, 12)
        assert 0 <= slope <= bound


@pytest.mark.slow
def test_path_integral_full_scan(rng):
    for _ in range(100):
        fam = TwoPointFamily(base=Distribution.from_probs(rational_probs(rng, 3, positive=True)), z1="z1", z2="z2")
        t_to = fam.mass * F(int(rng.integers(1, 20)), 20)
        n = int(rng.integers(1, 101))
        result = path_integral_check(fam, fam.t0, t_to, n, grid=64)
        assert result.distance <= result.integral
        assert result.distance <= lemma1_path_bound(fam, fam.t0, t_to, n)
