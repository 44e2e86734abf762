"""Independent reference computations used by the tests.

Nothing here imports the package's geometry: vertices are plain digit
strings, graphs come from networkx and sums are exact fractions.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import networkx as nx


def labels(radius: int) -> list[str]:
    out = [""]
    level = [""]
    for n in range(radius):
        level = [s + d for s in level for d in ("123" if n == 0 else "12")]
        out += level
    return out


def tree_graph(radius: int) -> nx.Graph:
    g = nx.Graph()
    for s in labels(radius):
        g.add_node(s)
        if s:
            g.add_edge(s[:-1], s)
    return g


def bfs_distances(radius: int) -> dict[str, dict[str, int]]:
    return dict(nx.all_pairs_shortest_path_length(tree_graph(radius)))


def path_between(u: str, v: str) -> set[str]:
    k = 0
    while k < min(len(u), len(v)) and u[k] == v[k]:
        k += 1
    return {u[:i] for i in range(k, len(u) + 1)} | {v[:i] for i in range(k, len(v) + 1)}


def line_classes(radius: int) -> list[tuple[set[str], Fraction]]:
    """Traces and masses of the classes of lines hitting ``ball(radius)``.

    Lines are grouped by their two exit points on the sphere; a line whose
    closest point to the root lies on the sphere has one exit point.
    """
    sph = [s for s in labels(radius) if len(s) == radius]
    out = [({s}, Fraction(1, 4)) for s in sph]
    for u, v in itertools.combinations(sph, 2):
        tr = path_between(u, v)
        d = len(tr) - 1
        out.append((tr, Fraction(1, 2**d)))
    return out


def mu_hitting_by_classes(s: set[str], radius: int) -> Fraction:
    return sum((m for tr, m in line_classes(radius) if tr & s), Fraction(0))


def connected_subsets(radius: int):
    """All connected vertex sets of ``ball(radius)``, as sets of labels."""

    def below(x: str):
        # connected sets hanging from x (x included) inside the ball
        if len(x) == radius:
            yield {x}
            return
        kids = [x + d for d in ("123" if x == "" else "12")]
        options = [[set()] + list(below(k)) for k in kids]
        for combo in itertools.product(*options):
            yield {x}.union(*combo)

    for top in labels(radius):
        yield from below(top)


def count_connected_subsets(radius: int) -> int:
    def a(h: int) -> int:
        return 1 if h == 0 else (1 + a(h - 1)) ** 2

    total = 0
    for n in range(radius + 1):
        h = radius - n
        if n == 0:
            total += 1 if h == 0 else (1 + a(h - 1)) ** 3
        else:
            total += 3 * 2 ** (n - 1) * a(h)
    return total


def chain_sum_bruteforce(n: int, t: float, beta: float) -> float:
    """Sum over all strictly decreasing cardinality chains ``n > k_1 > ... > 0``."""
    g = beta - 1

    def w(k: int) -> float:
        return (k + 1) * k**-g * t**g

    total = 0.0
    for r in range(n):
        for mid in itertools.combinations(range(1, n), r):
            total += math.prod(w(k) for k in mid)
    return 2.0**-n * (t / n) ** g * total


def gw_bruteforce(alpha: float, n: int) -> float:
    """``P(Z_n > 0)`` by summing over every apex configuration of ``ball(n)``."""
    verts = labels(n)
    p_root = math.exp(-0.75 * alpha)
    p = math.exp(-0.25 * alpha)
    total = 0.0
    for occupied in itertools.product((False, True), repeat=len(verts)):
        prob = 1.0
        apex = {}
        for s, o in zip(verts, occupied):
            q = p_root if s == "" else p
            prob *= (1 - q) if o else q
            apex[s] = o
        # a root path is vacant iff no apex lies on it
        alive = any(all(not apex[s[:i]] for i in range(n + 1)) for s in verts if len(s) == n)
        total += prob * alive
    return total
