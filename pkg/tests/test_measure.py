import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from treelines.measure import (
    BOUNDARY_CONSTANT,
    NotDivergedError,
    RayPrefix,
    TruncatedLine,
    apex_partition_mass,
    boundary_distance,
    boundary_oracle,
    estimate_mu_by_rays,
    estimate_mu_unnormalized,
    lambda_map,
    mu_hitting_connected,
    mu_pair,
    mu_through_set,
    ray_hit_probability,
    sample_ray,
)
from treelines.lines import hitting_mass
from treelines.tree import ROOT, Vertex, ball, line_of_ones, parse_vertex, sphere

import oracles


def V(s):
    return parse_vertex(s)


def test_pair_and_through_set_examples():
    assert mu_pair(ROOT, V("1")) == Fraction(1, 2)
    assert mu_pair(V("11"), V("2")) == Fraction(1, 8)
    with pytest.raises(ValueError):
        mu_pair(V("1"), V("1"))
    assert mu_through_set([V("12")]) == Fraction(3, 4)
    assert mu_through_set([V("1"), ROOT, V("2")]) == Fraction(1, 4)
    assert mu_through_set([V("1"), V("2"), V("3")]) == 0
    with pytest.raises(ValueError):
        mu_through_set([])


def test_hitting_connected_examples():
    assert mu_hitting_connected({ROOT}) == Fraction(3, 4)
    assert mu_hitting_connected({ROOT, V("1")}) == 1
    assert mu_hitting_connected(ball(2)) == Fraction(12, 4)
    with pytest.raises(ValueError):
        mu_hitting_connected({V("1"), V("2")})
    with pytest.raises(ValueError):
        apex_partition_mass({V("1"), V("2")})


def test_line_classes_total_mass():
    for r in range(1, 5):
        total = sum(m for _, m in oracles.line_classes(r))
        assert total == Fraction(3 * 2**r, 4)
        assert float(total) == hitting_mass(r)


def test_truncated_line_masses_match_classes():
    r = 3
    pts = sphere(r)
    total = sum(TruncatedLine(r, u, v).mass for u, v in itertools.combinations_with_replacement(pts, 2))
    assert total == Fraction(3 * 2**r, 4)


def test_connected_subset_count_formula():
    assert sum(1 for _ in oracles.connected_subsets(2)) == oracles.count_connected_subsets(2)


def test_hitting_mass_three_ways_on_ball3():
    # every connected subset of ball(3): closed form, apex partition, line classes
    classes = oracles.line_classes(3)
    n = 0
    for s in oracles.connected_subsets(3):
        verts = {V(x) if x else ROOT for x in s}
        closed = mu_hitting_connected(verts)
        assert apex_partition_mass(verts) == closed
        assert sum((m for tr, m in classes if tr & s), Fraction(0)) == closed
        n += 1
    assert n == oracles.count_connected_subsets(3)


def test_ray_prefix_validation():
    with pytest.raises(ValueError):
        RayPrefix((V("1"),))
    with pytest.raises(ValueError):
        RayPrefix((ROOT, V("11")))
    r = RayPrefix.through(V("121"))
    assert r.depth == 3 and r.tip == V("121")


def test_ray_hit_probability_empirical():
    rng = np.random.default_rng(11)
    x = V("12")
    n = 20000
    hits = sum(sample_ray(rng, 2).tip == x for _ in range(n))
    p = float(ray_hit_probability(x))
    assert p == 1 / 6
    assert abs(hits / n - p) < 4 * math.sqrt(p * (1 - p) / n)


def test_boundary_distance_and_lambda():
    a = RayPrefix.through(V("112"))
    b = RayPrefix.through(V("121"))
    assert boundary_distance(a, b) == Fraction(1, 2)
    line = lambda_map(a, b, 3)
    assert line.apex == V("1")
    assert line.contains(V("11")) and not line.contains(ROOT)
    with pytest.raises(NotDivergedError):
        boundary_distance(a, a)
    with pytest.raises(NotDivergedError):
        lambda_map(a, RayPrefix.through(V("112")), 3)
    with pytest.raises(ValueError):
        lambda_map(a, b, 4)


def test_truncated_line_normalizes_order():
    line = TruncatedLine(2, V("21"), V("11"))
    assert line.u == V("11") and line.trace[0] == V("11")
    assert line.apex == ROOT
    flat = TruncatedLine(2, V("12"), V("12"))
    assert flat.mass == Fraction(1, 4) and flat.trace == (V("12"),)
    with pytest.raises(ValueError):
        TruncatedLine(2, V("1"), V("11"))


def exact_estimator_mean(x: str, y: str) -> Fraction:
    """Exact expectation of the estimator by enumerating all ray-prefix pairs."""
    depth = max(len(x), len(y))
    pts = [s for s in oracles.labels(depth) if len(s) == depth]
    total = Fraction(0)
    for a in pts:
        for b in pts:
            if a == b:
                continue
            m = len(os_common(a, b))
            tr = oracles.path_between(a, b)
            if x in tr and y in tr:
                total += 4**m
    return total / len(pts) ** 2


def os_common(a, b):
    k = 0
    while k < len(a) and a[k] == b[k]:
        k += 1
    return a[:k]


def test_estimator_expectation_is_exact():
    # the weighted boundary average equals (8/9) mu<x,y> for every pair of ball(3)
    pts = oracles.labels(3)
    for x, y in itertools.combinations(pts, 2):
        vx = V(x) if x else ROOT
        vy = V(y) if y else ROOT
        assert exact_estimator_mean(x, y) == BOUNDARY_CONSTANT * mu_pair(vx, vy)


def test_boundary_oracle_values():
    assert boundary_oracle(ROOT, V("1")) == Fraction(4, 9)
    for d in range(1, 5):
        assert boundary_oracle(ROOT, line_of_ones(d)) == Fraction(8, 9) / 2**d


def test_estimator_statistics():
    x, y = V("11"), V("2")
    est = estimate_mu_unnormalized((x, y), 200000, seed=5)
    assert abs(est.z(float(boundary_oracle(x, y)))) < 4


def test_estimator_kernels_agree():
    x, y = V("1"), V("2")
    ref = float(boundary_oracle(x, y))
    slow = estimate_mu_by_rays((x, y), 20000, np.random.default_rng(3))
    fast = estimate_mu_unnormalized((x, y), 20000, seed=3)
    assert abs(slow.value - ref) < 4 * slow.stderr
    diff = slow.value - fast.value
    assert abs(diff) < 4 * math.hypot(slow.stderr, fast.stderr)


def test_estimator_reproducible_and_worker_independent():
    t = (ROOT, V("12"))
    a = estimate_mu_unnormalized(t, 150000, seed=9, workers=1)
    b = estimate_mu_unnormalized(t, 150000, seed=9, workers=2)
    assert a == b


def test_estimator_rejects_bad_targets():
    with pytest.raises(ValueError):
        estimate_mu_unnormalized((ROOT, ROOT), 10, seed=0)
    with pytest.raises(ValueError):
        estimate_mu_unnormalized((ROOT, V("1")), 0, seed=0)


geodesic_sets = st.tuples(st.sampled_from(ball(4)), st.sampled_from(ball(4)))


@settings(max_examples=200)
@given(geodesic_sets, st.data())
def test_through_set_of_geodesic_pieces(pair, data):
    from treelines.tree import geodesic

    u, v = pair
    if u == v:
        return
    path = geodesic(u, v)
    sub = data.draw(st.lists(st.sampled_from(path), min_size=1))
    # any subset containing both ends has the pair measure
    assert mu_through_set(sub + [u, v]) == mu_pair(u, v)
    if len(set(sub)) >= 2:
        ends = sorted(set(sub), key=lambda z: path.index(z))
        assert mu_through_set(sub) == mu_pair(ends[0], ends[-1])
