import math

import pytest
from hypothesis import given, strategies as st

from treelines.bounds import (
    bddp_bounds,
    bddp_chain_exact,
    bddp_kahn_upper,
    bddp_lower,
    fast_road_mass,
    mean_ball_bound,
    nonexplosion_threshold,
)
from treelines.roads import edge_speed_cdf

import oracles

GRID = [(n, t, b) for n in range(1, 11) for t in (0.1, 0.5, 1.0) for b in (2.2, 2.5, 3.0, 4.0)]


def test_lower_examples():
    assert bddp_lower(2, 2.0, 3.0) == pytest.approx(1 - math.exp(-0.25))
    assert bddp_lower(4, 0.5, 2.5) == pytest.approx(1 - math.exp(-(0.125**1.5) / 16), rel=1e-12)
    assert bddp_lower(4, 0.5, 2.5) == pytest.approx(0.0027583, abs=1e-7)
    assert bddp_lower(3, 1e-9, 3.0) < 1e-18


def test_kahn_examples():
    assert bddp_kahn_upper(3, 1.0, 4.0) == pytest.approx(math.exp(2.375) / 216, rel=1e-12)
    assert bddp_kahn_upper(3, 1.0, 4.0) == pytest.approx(0.04977, abs=1e-5)
    for t in (0.3, 1.0, 2.0):
        assert bddp_kahn_upper(1, t, 2.5) == pytest.approx(0.5 * t**1.5)
    s = sum((k + 1) * k**-1.5 for k in range(1, 4))
    assert s == pytest.approx(3.8305, abs=1e-4)
    assert bddp_kahn_upper(4, 0.5, 2.5) == pytest.approx(0.125**1.5 / 16 * math.exp(s * 0.5**1.5))
    assert bddp_kahn_upper(4, 0.5, 2.5) == pytest.approx(0.0107, abs=1e-4)


def test_chain_examples():
    assert bddp_chain_exact(2, 1.0, 2.0) == pytest.approx(0.375)
    for t in (0.3, 1.0):
        assert bddp_chain_exact(1, t, 3.0) == pytest.approx(bddp_kahn_upper(1, t, 3.0))
    assert bddp_chain_exact(3, 1.0, 4.0) <= 0.04977


def test_chain_matches_enumeration():
    for n, t, b in GRID:
        if n <= 8:
            assert bddp_chain_exact(n, t, b) == pytest.approx(oracles.chain_sum_bruteforce(n, t, b), rel=1e-12)


def test_chain_below_kahn_on_grid():
    for n, t, b in GRID:
        assert bddp_chain_exact(n, t, b) <= bddp_kahn_upper(n, t, b)


def test_lower_equals_single_road_probability():
    for n, t, b in GRID:
        assert bddp_lower(n, t, b) == pytest.approx(1 - edge_speed_cdf(n / t, n, b), rel=1e-9, abs=1e-15)


def test_bounds_record():
    r = bddp_bounds(3, 2.0, 3.0)
    assert r.kahn_upper > 1 and r.kahn_upper_clamped == 1.0
    assert r.row()["kahn_upper"] == r.kahn_upper
    with pytest.raises(ValueError):
        bddp_bounds(0, 1.0, 3.0)
    with pytest.raises(ValueError):
        bddp_lower(2, -1.0, 3.0)


def test_threshold_values():
    assert nonexplosion_threshold(3.0) == pytest.approx(1 / 9)
    assert nonexplosion_threshold(2.1) == pytest.approx((4 / 33) ** 10, rel=1e-12)
    assert nonexplosion_threshold(2.1) == pytest.approx(6.84637e-10, rel=1e-5)
    assert nonexplosion_threshold(1e6) == pytest.approx(1 / 9)
    for b in (2.0, 1.5):
        with pytest.raises(ValueError):
            nonexplosion_threshold(b)


def test_threshold_meets_mass_condition():
    for b in (2.05, 2.1, 2.5, 3.0, 6.0):
        t = nonexplosion_threshold(b)
        assert t <= 1 / 9
        assert fast_road_mass(t, b) <= 1 + 1e-12
    # below the cap the mass condition is active
    assert fast_road_mass(nonexplosion_threshold(2.1), 2.1) == pytest.approx(1.0)


def test_mean_ball_bound():
    assert mean_ball_bound() == 2


@given(st.integers(1, 30), st.floats(1e-3, 5.0), st.floats(1.1, 6.0))
def test_bound_properties(n, t, beta):
    lo = bddp_lower(n, t, beta)
    assert 0.0 <= lo <= 1.0
    assert bddp_chain_exact(n, t, beta) <= bddp_kahn_upper(n, t, beta) * (1 + 1e-12)
    assert bddp_lower(n, t / 2, beta) <= lo
