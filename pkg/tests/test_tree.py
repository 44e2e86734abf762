import pytest
from hypothesis import given, strategies as st

from treelines.tree import (
    ROOT,
    Edge,
    Vertex,
    ball,
    ball_size,
    distance,
    format_vertex,
    geodesic,
    geodesic_edges,
    is_connected,
    level_offset,
    line_of_ones,
    meet,
    on_one_geodesic,
    parse_vertex,
    sphere,
    sphere_size,
)

import oracles


@st.composite
def vertices(draw, max_depth=8):
    n = draw(st.integers(0, max_depth))
    if n == 0:
        return ROOT
    first = draw(st.integers(1, 3))
    rest = draw(st.lists(st.integers(1, 2), min_size=n - 1, max_size=n - 1))
    return Vertex((first, *rest))


def test_sizes():
    assert [sphere_size(n) for n in range(5)] == [1, 3, 6, 12, 24]
    assert [ball_size(n) for n in range(5)] == [1, 4, 10, 22, 46]
    assert ball_size(6) == 190
    assert level_offset(0) == 0 and level_offset(3) == 10


def test_invalid_labels_rejected():
    for bad in [(4,), (0,), (1, 3), (2, 1, 0)]:
        with pytest.raises(ValueError):
            Vertex(bad)
    with pytest.raises(ValueError):
        ROOT.parent
    with pytest.raises(ValueError):
        parse_vertex("13")
    with pytest.raises(ValueError):
        parse_vertex("")


def test_label_basics():
    x = Vertex.of(1, 2)
    assert x.parent == Vertex.of(1)
    assert x.children == (Vertex.of(1, 2, 1), Vertex.of(1, 2, 2))
    assert ROOT.children == (Vertex.of(1), Vertex.of(2), Vertex.of(3))
    assert len(ROOT.neighbors) == 3 and len(x.neighbors) == 3
    assert str(ROOT) == "@" and str(x) == "12"


def test_meet_and_distance_examples():
    assert meet(Vertex.of(1, 1), Vertex.of(1, 2)) == Vertex.of(1)
    assert distance(Vertex.of(1, 1), Vertex.of(1, 2)) == 2
    assert distance(Vertex.of(1), Vertex.of(2)) == 2
    assert distance(ROOT, line_of_ones(5)) == 5
    assert geodesic(Vertex.of(1), Vertex.of(2)) == (Vertex.of(1), ROOT, Vertex.of(2))


def test_sphere_and_ball_order():
    assert [str(x) for x in sphere(2)] == ["11", "12", "21", "22", "31", "32"]
    b = ball(3)
    assert len(b) == ball_size(3)
    assert all(x.index == i for i, x in enumerate(b))
    assert sorted(b) == list(b)


def test_distances_match_bfs_on_ball6():
    ref = oracles.bfs_distances(6)
    pts = ball(6)
    for x in pts:
        row = ref[format_vertex(x).replace("@", "")]
        for y in pts:
            assert distance(x, y) == row[format_vertex(y).replace("@", "")]


def test_edges():
    e = Edge(Vertex.of(2, 1))
    assert e.endpoints == (Vertex.of(2), Vertex.of(2, 1))
    assert Edge.from_index(e.index) == e
    with pytest.raises(ValueError):
        Edge(ROOT)
    assert geodesic_edges(Vertex.of(1), Vertex.of(2)) == (Edge(Vertex.of(1)), Edge(Vertex.of(2)))


def test_connected():
    assert is_connected({ROOT})
    assert is_connected({ROOT, Vertex.of(1), Vertex.of(1, 2)})
    assert not is_connected({Vertex.of(1), Vertex.of(2)})
    assert not is_connected(set())


def test_on_one_geodesic():
    assert on_one_geodesic([Vertex.of(1), ROOT, Vertex.of(2)]) == (Vertex.of(1), Vertex.of(2))
    assert on_one_geodesic([Vertex.of(1), Vertex.of(2), Vertex.of(3)]) is None
    assert on_one_geodesic([Vertex.of(3)]) == (Vertex.of(3), Vertex.of(3))


@given(vertices())
def test_text_roundtrip(x):
    assert parse_vertex(format_vertex(x)) == x


@given(vertices())
def test_index_roundtrip(x):
    assert Vertex.from_index(x.index) == x
    assert Vertex.from_level_index(x.depth, x.level_index) == x


@given(vertices(), vertices(), vertices())
def test_metric_axioms(x, y, z):
    assert distance(x, y) == distance(y, x)
    assert (distance(x, y) == 0) == (x == y)
    assert distance(x, z) <= distance(x, y) + distance(y, z)


@given(vertices(), vertices())
def test_geodesic_is_a_path(x, y):
    path = geodesic(x, y)
    assert path[0] == x and path[-1] == y
    assert len(path) == distance(x, y) + 1
    assert len(set(path)) == len(path)
    assert all(distance(a, b) == 1 for a, b in zip(path, path[1:]))
    assert meet(x, y) in path
