"""Label arithmetic on the rooted planar 3-regular tree.

Vertices carry Ulam-Harris labels: the root is the empty label, its
children are ``1``, ``2``, ``3`` and every other vertex ``x`` has the two
children ``x1`` and ``x2``.  Every geometric question (meets, distances,
geodesics, balls) is answered from the labels alone.

Besides the :class:`Vertex` value type, the module fixes the integer
encoding shared by the vectorised samplers:

* the *level index* of a depth-``n`` vertex is its rank in shortlex order
  among the ``3 * 2**(n-1)`` vertices of that depth; for ``n >= 1`` the
  children of level index ``j`` are ``2j`` and ``2j + 1``;
* the *global index* is ``level_offset(n) + level index``, i.e. the
  breadth-first rank inside any ball containing the vertex;
* the edge joining ``x`` to its parent has index ``global(x) - 1``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

ROOT_TEXT = "@"


def sphere_size(n: int) -> int:
    """Number of vertices at depth ``n``."""
    if n < 0:
        raise ValueError(f"negative depth {n}")
    return 1 if n == 0 else 3 << (n - 1)


def ball_size(n: int) -> int:
    """Number of vertices at depth at most ``n``."""
    if n < 0:
        raise ValueError(f"negative radius {n}")
    return 3 * (1 << n) - 2


def level_offset(n: int) -> int:
    """Global index of the first vertex at depth ``n``."""
    return 0 if n == 0 else ball_size(n - 1)


@functools.total_ordering
@dataclass(frozen=True)
class Vertex:
    """A vertex of the tree, identified by its Ulam-Harris label.

    Ordering is shortlex (depth first, then lexicographic), so the minimal
    label among siblings is the one with the smallest last digit.
    """

    digits: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        digits = tuple(int(d) for d in self.digits)
        for pos, d in enumerate(digits):
            top = 3 if pos == 0 else 2
            if not 1 <= d <= top:
                raise ValueError(f"digit {d} out of range at position {pos} in {digits}")
        object.__setattr__(self, "digits", digits)

    @classmethod
    def of(cls, *digits: int) -> Vertex:
        return cls(tuple(digits))

    @property
    def depth(self) -> int:
        return len(self.digits)

    @property
    def is_root(self) -> bool:
        return not self.digits

    @property
    def parent(self) -> Vertex:
        if self.is_root:
            raise ValueError("the root has no parent")
        return Vertex(self.digits[:-1])

    @property
    def children(self) -> tuple[Vertex, ...]:
        n = 3 if self.is_root else 2
        return tuple(Vertex(self.digits + (i,)) for i in range(1, n + 1))

    def child(self, i: int) -> Vertex:
        return Vertex(self.digits + (i,))

    @property
    def neighbors(self) -> tuple[Vertex, ...]:
        if self.is_root:
            return self.children
        return (self.parent,) + self.children

    def ancestor(self, k: int) -> Vertex:
        """The ancestor at depth ``k`` (``k <= depth``)."""
        if not 0 <= k <= self.depth:
            raise ValueError(f"no ancestor at depth {k} for {self}")
        return Vertex(self.digits[:k])

    def is_ancestor_of(self, other: Vertex) -> bool:
        """Inclusive: every vertex is an ancestor of itself."""
        return other.digits[: self.depth] == self.digits

    @property
    def level_index(self) -> int:
        if self.is_root:
            return 0
        j = self.digits[0] - 1
        for d in self.digits[1:]:
            j = 2 * j + (d - 1)
        return j

    @property
    def index(self) -> int:
        return level_offset(self.depth) + self.level_index

    @classmethod
    def from_level_index(cls, depth: int, j: int) -> Vertex:
        if not 0 <= j < sphere_size(depth):
            raise ValueError(f"level index {j} out of range at depth {depth}")
        if depth == 0:
            return ROOT
        digits = []
        for _ in range(depth - 1):
            digits.append((j & 1) + 1)
            j >>= 1
        digits.append(j + 1)
        return cls(tuple(reversed(digits)))

    @classmethod
    def from_index(cls, g: int) -> Vertex:
        if g < 0:
            raise ValueError(f"negative global index {g}")
        depth = ((g + 2) // 3).bit_length()
        return cls.from_level_index(depth, g - level_offset(depth))

    def __lt__(self, other: Vertex) -> bool:
        if not isinstance(other, Vertex):
            return NotImplemented
        return (self.depth, self.digits) < (other.depth, other.digits)

    def __str__(self) -> str:
        return format_vertex(self)

    def __repr__(self) -> str:
        return f"Vertex({format_vertex(self)!r})"


ROOT = Vertex()


@dataclass(frozen=True, order=True)
class Edge:
    """An edge, named by its endpoint farther from the root."""

    child: Vertex

    def __post_init__(self) -> None:
        if self.child.is_root:
            raise ValueError("an edge needs a non-root deeper endpoint")

    @property
    def endpoints(self) -> tuple[Vertex, Vertex]:
        return (self.child.parent, self.child)

    @property
    def index(self) -> int:
        return self.child.index - 1

    @classmethod
    def from_index(cls, i: int) -> Edge:
        return cls(Vertex.from_index(i + 1))


def parse_vertex(text: str) -> Vertex:
    """Inverse of :func:`format_vertex`; ``"@"`` is the root."""
    text = text.strip()
    if text == ROOT_TEXT:
        return ROOT
    if not text or not text.isdigit():
        raise ValueError(f"malformed vertex label {text!r}")
    return Vertex(tuple(int(c) for c in text))


def format_vertex(x: Vertex) -> str:
    return ROOT_TEXT if x.is_root else "".join(map(str, x.digits))


def meet(x: Vertex, y: Vertex) -> Vertex:
    """Deepest common ancestor, i.e. the longest common label prefix."""
    k = 0
    for a, b in zip(x.digits, y.digits):
        if a != b:
            break
        k += 1
    return Vertex(x.digits[:k])


def distance(x: Vertex, y: Vertex) -> int:
    return x.depth + y.depth - 2 * meet(x, y).depth


def geodesic(x: Vertex, y: Vertex) -> tuple[Vertex, ...]:
    """Vertices of the geodesic from ``x`` to ``y``, both included."""
    m = meet(x, y).depth
    up = [x.ancestor(k) for k in range(x.depth, m - 1, -1)]
    down = [y.ancestor(k) for k in range(m + 1, y.depth + 1)]
    return tuple(up + down)


def geodesic_edges(x: Vertex, y: Vertex) -> tuple[Edge, ...]:
    path = geodesic(x, y)
    return tuple(Edge(a if a.depth > b.depth else b) for a, b in zip(path, path[1:]))


def iter_sphere(n: int) -> Iterator[Vertex]:
    for j in range(sphere_size(n)):
        yield Vertex.from_level_index(n, j)


def sphere(n: int) -> tuple[Vertex, ...]:
    """All vertices at depth ``n`` in shortlex order."""
    return tuple(iter_sphere(n))


def ball(n: int) -> tuple[Vertex, ...]:
    """All vertices at depth at most ``n``, ordered by global index."""
    return tuple(x for k in range(n + 1) for x in iter_sphere(k))


def line_of_ones(n: int) -> Vertex:
    """The vertex ``1...1`` at depth ``n``."""
    return Vertex((1,) * n)


def is_connected(vertices: Iterable[Vertex]) -> bool:
    """Whether a finite vertex set induces a connected subtree."""
    s = set(vertices)
    if not s:
        return False
    # a finite subset of a tree is connected iff exactly one member has no parent in it
    tops = sum(1 for x in s if x.is_root or x.parent not in s)
    return tops == 1


def on_one_geodesic(vertices: Sequence[Vertex]) -> tuple[Vertex, Vertex] | None:
    """Extremal pair ``(u, v)``, ``u <= v``, if all vertices lie on one geodesic, else None."""
    pts = sorted(set(vertices))
    if not pts:
        raise ValueError("empty vertex set")
    if len(pts) == 1:
        return pts[0], pts[0]
    u = max(pts, key=lambda z: (distance(pts[0], z), z))
    v = max(pts, key=lambda z: (distance(u, z), z))
    d = distance(u, v)
    if all(distance(u, z) + distance(z, v) == d for z in pts):
        return (u, v) if u <= v else (v, u)
    return None
