"""The invariant measure on lines: exact values, rays and the boundary estimator.

Measures are exact :class:`~fractions.Fraction` values under the
normalisation ``mu<x, y> = 2**-d(x, y)``.  Lines are only ever handled
through their truncation to a finite ball (:class:`TruncatedLine`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from .montecarlo import BLOCK, Estimate, blocks, parallel_map, replica_rng
from .tree import ROOT, Vertex, distance, geodesic, is_connected, meet, on_one_geodesic

MU_VERTEX = Fraction(3, 4)
MU_APEX = Fraction(1, 4)  # lines through a non-root vertex that avoid its parent
BOUNDARY_CONSTANT = Fraction(8, 9)


class NotDivergedError(ValueError):
    """Two ray prefixes still agree at the depth where they are compared."""


@dataclass(frozen=True)
class RayPrefix:
    """The first steps ``(root, x1, ..., xn)`` of a ray."""

    path: tuple[Vertex, ...]

    def __post_init__(self) -> None:
        if not self.path or self.path[0] != ROOT:
            raise ValueError("a ray starts at the root")
        for k, (a, b) in enumerate(zip(self.path, self.path[1:])):
            if b.depth != k + 1 or b.parent != a:
                raise ValueError(f"not a ray prefix at step {k + 1}: {a} -> {b}")

    @classmethod
    def through(cls, x: Vertex) -> RayPrefix:
        return cls(tuple(x.ancestor(k) for k in range(x.depth + 1)))

    @property
    def depth(self) -> int:
        return len(self.path) - 1

    @property
    def tip(self) -> Vertex:
        return self.path[-1]

    def extend(self, rng: np.random.Generator, depth: int) -> RayPrefix:
        """Continue with uniform child choices up to ``depth``."""
        path = list(self.path)
        while len(path) <= depth:
            x = path[-1]
            top = 3 if x.is_root else 2
            path.append(x.child(int(rng.integers(1, top + 1))))
        return RayPrefix(tuple(path))


def sample_ray(rng: np.random.Generator, depth: int) -> RayPrefix:
    """Non-backtracking random walk from the root, run for ``depth`` steps."""
    return RayPrefix((ROOT,)).extend(rng, depth)


def ray_hit_probability(x: Vertex) -> Fraction:
    """Probability that a uniform ray passes through ``x``."""
    return Fraction(1) if x.is_root else Fraction(1, 3 * 2 ** (x.depth - 1))


def boundary_distance(xi: RayPrefix, eta: RayPrefix) -> Fraction:
    """``2**-|xi ^ eta|`` for rays that have already split."""
    n = min(xi.depth, eta.depth)
    m = meet(xi.path[n], eta.path[n])
    if m.depth == n:
        raise NotDivergedError(f"prefixes agree up to depth {n}")
    return Fraction(1, 2 ** m.depth)


@dataclass(frozen=True)
class TruncatedLine:
    """Intersection of a line with the ball of radius ``radius``.

    ``u`` and ``v`` are the depth-``radius`` ends of the trace, ``u <= v``.
    ``u == v`` encodes a line whose apex sits on the sphere itself.
    """

    radius: int
    u: Vertex
    v: Vertex

    def __post_init__(self) -> None:
        if self.radius < 1:
            raise ValueError("radius must be at least 1")
        if self.u.depth != self.radius or self.v.depth != self.radius:
            raise ValueError("endpoints must lie on the sphere of the given radius")
        if self.v < self.u:
            u, v = self.v, self.u
            object.__setattr__(self, "u", u)
            object.__setattr__(self, "v", v)

    @property
    def apex(self) -> Vertex:
        return meet(self.u, self.v)

    @property
    def trace(self) -> tuple[Vertex, ...]:
        return geodesic(self.u, self.v)

    def contains(self, x: Vertex) -> bool:
        a = self.apex
        return x.depth >= a.depth and (x.is_ancestor_of(self.u) or x.is_ancestor_of(self.v))

    @property
    def mass(self) -> Fraction:
        """Measure of the set of lines with this truncation."""
        if self.u == self.v:
            return MU_APEX
        return mu_pair(self.u, self.v)


def mu_pair(x: Vertex, y: Vertex) -> Fraction:
    """Measure of the lines through both ``x`` and ``y``."""
    if x == y:
        raise ValueError("mu_pair needs two distinct vertices; use mu_through_set for one")
    return Fraction(1, 2 ** distance(x, y))


def mu_through_set(vertices: Iterable[Vertex]) -> Fraction:
    """Measure of the lines passing through every vertex of a finite set."""
    pts = list(set(vertices))
    if not pts:
        raise ValueError("empty vertex set")
    if len(pts) == 1:
        return MU_VERTEX
    ends = on_one_geodesic(pts)
    if ends is None:
        return Fraction(0)
    return Fraction(1, 2 ** distance(*ends))


def mu_hitting_connected(vertices: Iterable[Vertex]) -> Fraction:
    """Measure of the lines hitting a finite connected set ``S``: ``(|S| + 2) / 4``."""
    s = set(vertices)
    if not is_connected(s):
        raise ValueError("mu_hitting_connected needs a nonempty connected vertex set")
    return Fraction(len(s) + 2, 4)


def apex_partition_mass(vertices: Iterable[Vertex]) -> Fraction:
    """Same quantity as :func:`mu_hitting_connected`, summed by topmost hit vertex.

    Each line hitting a connected ``S`` meets it in a segment with a unique
    vertex closest to the root.  The top of ``S`` collects all lines through
    it; every other member collects the lines through it that avoid its
    parent.
    """
    s = set(vertices)
    if not is_connected(s):
        raise ValueError("apex partition is only valid for connected sets")
    total = Fraction(0)
    for w in s:
        top = w.is_root or w.parent not in s
        total += MU_VERTEX if top else MU_VERTEX - mu_pair(w, w.parent)
    return total


def lambda_map(xi: RayPrefix, eta: RayPrefix, radius: int) -> TruncatedLine:
    """Truncation to ``ball(radius)`` of the line with ends ``xi`` and ``eta``."""
    if xi.depth < radius or eta.depth < radius:
        raise ValueError(f"both prefixes must reach depth {radius}")
    u, v = xi.path[radius], eta.path[radius]
    if u == v:
        raise NotDivergedError(f"rays have not diverged by depth {radius}; extend them")
    return TruncatedLine(radius, u, v)


def boundary_oracle(x: Vertex, y: Vertex) -> Fraction:
    """Exact pair measure under the unnormalised boundary construction."""
    return BOUNDARY_CONSTANT * mu_pair(x, y)


def _estimator_block(args: tuple[int, int, int, int, tuple[int, int], tuple[int, int]]) -> tuple[float, float]:
    seed, block, rows, depth, (dx, jx), (dy, jy) = args
    rng = replica_rng(seed, 0, block)
    width = 3 << (depth - 1)
    a = rng.integers(0, width, size=rows)
    b = rng.integers(0, width, size=rows)
    # ray prefixes to `depth` are uniform vertices of that sphere
    spread = np.frexp((a ^ b).astype(float))[1]
    m = np.where(spread <= depth - 1, depth - spread, 0)

    def on_line(dz: int, jz: int) -> np.ndarray:
        if dz == 0:
            hit = np.ones(rows, dtype=bool)
        else:
            hit = ((a >> (depth - dz)) == jz) | ((b >> (depth - dz)) == jz)
        return hit & (dz >= m)

    # undiverged pairs (m == depth) cannot carry two distinct target vertices
    ok = on_line(dx, jx) & on_line(dy, jy) & (m < depth)
    w = np.where(ok, np.ldexp(1.0, 2 * m), 0.0)
    return float(w.sum()), float((w * w).sum())


def estimate_mu_unnormalized(
    target: tuple[Vertex, Vertex],
    samples: int,
    seed: int,
    workers: int | None = None,
) -> Estimate:
    """Monte Carlo value of ``E[1{Lambda(X, Y) hits x and y} / d(X, Y)**2]``.

    ``X`` and ``Y`` are independent uniform rays and ``d`` is the boundary
    metric, so the weight is ``4**|X ^ Y|``.  The expectation equals
    ``(8/9) * 2**-d(x, y)`` (see :func:`boundary_oracle`).
    """
    x, y = target
    if x == y:
        raise ValueError("target vertices must differ")
    if samples <= 0:
        raise ValueError("samples must be positive")
    depth = max(x.depth, y.depth)
    jobs = [
        (seed, b, rows, depth, (x.depth, x.level_index), (y.depth, y.level_index))
        for b, rows in blocks(samples, BLOCK)
    ]
    parts = parallel_map(_estimator_block, jobs, workers)
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s1 / samples
    var = max(s2 / samples - mean * mean, 0.0) * samples / max(samples - 1, 1)
    return Estimate(mean, math.sqrt(var / samples), samples)


def estimate_mu_by_rays(target: tuple[Vertex, Vertex], samples: int, rng: np.random.Generator) -> Estimate:
    """Slow object-level version of :func:`estimate_mu_unnormalized`.

    Builds ray prefixes and truncated lines explicitly; used to cross-check
    the vectorised kernel.
    """
    x, y = target
    depth = max(x.depth, y.depth)
    w = np.zeros(samples)
    for i in range(samples):
        xi, eta = sample_ray(rng, depth), sample_ray(rng, depth)
        try:
            scale = boundary_distance(xi, eta)
        except NotDivergedError:
            continue
        line = lambda_map(xi, eta, depth)
        if line.contains(x) and line.contains(y):
            w[i] = float(1 / scale**2)
    sd = float(w.std(ddof=1)) if samples > 1 else 0.0
    return Estimate(float(w.mean()), sd / math.sqrt(samples), samples)
