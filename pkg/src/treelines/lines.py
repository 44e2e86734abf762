"""Poisson line processes on a ball: exact sampling, vacancy, percolation.

A line hitting ``ball(R)`` is drawn through its apex (the trace vertex
closest to the root).  Under ``mu`` the apex is the root with mass 3/4
(1/4 for each pair of root directions) and any other vertex with mass 1/4,
so the total mass is ``(3/4) * 2**R`` and one uniform integer in
``[0, 3 * 2**R)`` selects apex and, at the root, the direction pair.
Both rays then descend to depth ``R`` by uniform child choices.

Lines are kept as :class:`LineArrays` (apex depth and level index plus the
level indices of the two depth-``R`` ends), which is what the vectorised
kernels consume; :class:`~treelines.measure.TruncatedLine` objects are
built on demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .measure import TruncatedLine
from .montecarlo import (
    ExperimentResult,
    mean_estimate,
    parallel_map,
    proportion_estimate,
    replica_rng,
)
from .tree import Vertex, ball, level_offset, sphere_size

ALPHA_CRITICAL = 4 * math.log(2)
POISSON_METHOD = "numpy-Generator.poisson (inversion below mean 10, PTRS rejection above)"

_ROOT_PAIRS = np.array([[0, 1], [0, 2], [1, 2]])


@dataclass(frozen=True)
class LineArrays:
    """Column store for lines truncated to ``ball(radius)``."""

    radius: int
    apex_depth: np.ndarray
    apex_index: np.ndarray  # level index of the apex
    u: np.ndarray  # level index of one depth-radius end
    v: np.ndarray

    def __len__(self) -> int:
        return int(self.apex_depth.size)

    def take(self, keep: np.ndarray) -> LineArrays:
        return LineArrays(self.radius, self.apex_depth[keep], self.apex_index[keep], self.u[keep], self.v[keep])

    def contains(self, x: Vertex) -> np.ndarray:
        """Mask of lines whose trace contains ``x``."""
        if x.depth > self.radius:
            raise ValueError(f"{x} lies outside ball({self.radius})")
        if x.is_root:
            return self.apex_depth == 0
        shift = self.radius - x.depth
        j = x.level_index
        on_rays = ((self.u >> shift) == j) | ((self.v >> shift) == j)
        return on_rays & (self.apex_depth <= x.depth)

    def lines(self) -> tuple[TruncatedLine, ...]:
        R = self.radius
        return tuple(
            TruncatedLine(R, Vertex.from_level_index(R, int(a)), Vertex.from_level_index(R, int(b)))
            for a, b in zip(self.u, self.v)
        )

    @staticmethod
    def concat(parts: Sequence[LineArrays], radius: int) -> LineArrays:
        if not parts:
            e = np.zeros(0, dtype=np.int64)
            return LineArrays(radius, e, e, e, e)
        return LineArrays(
            radius,
            np.concatenate([p.apex_depth for p in parts]),
            np.concatenate([p.apex_index for p in parts]),
            np.concatenate([p.u for p in parts]),
            np.concatenate([p.v for p in parts]),
        )


def hitting_mass(radius: int) -> float:
    """``mu`` of the lines hitting ``ball(radius)``."""
    return 0.75 * 2.0**radius


def decode_lines(codes: np.ndarray, bits: np.ndarray, radius: int) -> LineArrays:
    """Turn apex codes and descent bits into lines on ``ball(radius)``.

    ``codes`` in ``{0, 1, 2}`` put the apex at the root with that direction
    pair; a code ``c >= 3`` puts it at global index ``c - 2``.  ``bits`` has
    two columns of at least ``radius - 1`` uniform bits, one per ray.
    """
    R = radius
    codes = np.asarray(codes, dtype=np.int64)
    bits = np.asarray(bits, dtype=np.int64).reshape(-1, 2)
    n = codes.size
    depth = np.zeros(n, dtype=np.int64)
    level = np.zeros(n, dtype=np.int64)
    u = np.empty(n, dtype=np.int64)
    v = np.empty(n, dtype=np.int64)

    at_root = codes < 3
    if at_root.any():
        pair = _ROOT_PAIRS[codes[at_root]]
        low = (1 << (R - 1)) - 1
        u[at_root] = (pair[:, 0] << (R - 1)) | (bits[at_root, 0] & low)
        v[at_root] = (pair[:, 1] << (R - 1)) | (bits[at_root, 1] & low)

    rest = ~at_root
    if rest.any():
        g = codes[rest] - 2
        k = np.frexp(((g + 2) // 3).astype(float))[1].astype(np.int64)
        off = np.where(k == 0, 0, 3 * (np.int64(1) << np.maximum(k - 1, 0)) - 2)
        a = g - off
        depth[rest] = k
        level[rest] = a
        s = R - k - 1
        inner = s >= 0
        s0 = np.maximum(s, 0)
        mask = (np.int64(1) << s0) - 1
        uu = np.where(inner, ((2 * a) << s0) | (bits[rest, 0] & mask), a)
        vv = np.where(inner, ((2 * a + 1) << s0) | (bits[rest, 1] & mask), a)
        u[rest] = uu
        v[rest] = vv
    return LineArrays(R, depth, level, u, v)


def draw_lines(rng: np.random.Generator, radius: int, scale: float) -> LineArrays:
    """Poisson process with intensity ``scale * mu`` restricted to ``ball(radius)``."""
    if radius < 1:
        raise ValueError("radius must be at least 1")
    n = int(rng.poisson(scale * hitting_mass(radius)))
    codes = rng.integers(0, 3 << radius, size=n)
    bits = rng.integers(0, 1 << (radius - 1), size=(n, 2))
    return decode_lines(codes, bits, radius)


def extend_lines(lines: LineArrays, new_radius: int, rng: np.random.Generator, scale: float) -> LineArrays:
    """Grow a sample on ``ball(R)`` into an exact sample on ``ball(new_radius)``.

    Existing rays descend further by fresh uniform choices; lines whose apex
    lies strictly between the two spheres are added.
    """
    R, R2 = lines.radius, new_radius
    if R2 < R:
        raise ValueError("cannot shrink a sample")
    if R2 == R:
        return lines
    n = len(lines)
    d = R2 - R
    bits = rng.integers(0, 1 << d, size=(n, 2)) if n else np.zeros((0, 2), dtype=np.int64)
    flat = lines.u == lines.v
    if flat.any():
        # apex on the old sphere: the two rays leave through its two children
        lowmask = (np.int64(1) << (d - 1)) - 1
        u_new = np.where(flat, ((2 * lines.u) << (d - 1)) | (bits[:, 0] & lowmask), (lines.u << d) | bits[:, 0])
        v_new = np.where(flat, ((2 * lines.v + 1) << (d - 1)) | (bits[:, 1] & lowmask), (lines.v << d) | bits[:, 1])
    else:
        u_new = (lines.u << d) | bits[:, 0]
        v_new = (lines.v << d) | bits[:, 1]
    old = LineArrays(R2, lines.apex_depth, lines.apex_index, u_new, v_new)
    m = int(rng.poisson(scale * 0.75 * (2.0**R2 - 2.0**R)))
    codes = rng.integers(3 << R, 3 << R2, size=m)
    new_bits = rng.integers(0, 1 << (R2 - 1), size=(m, 2))
    return LineArrays.concat([old, decode_lines(codes, new_bits, R2)], R2)


@dataclass(frozen=True)
class LineProcessSample:
    alpha: float
    radius: int
    arrays: LineArrays
    seed: dict = field(default_factory=dict)

    @property
    def lines(self) -> tuple[TruncatedLine, ...]:
        return self.arrays.lines()

    @property
    def count(self) -> int:
        return len(self.arrays)

    def without(self, i: int) -> LineProcessSample:
        keep = np.ones(self.count, dtype=bool)
        keep[i] = False
        return LineProcessSample(self.alpha, self.radius, self.arrays.take(keep), self.seed)


def sample_line_process(alpha: float, radius: int, rng: np.random.Generator, seed: dict | None = None) -> LineProcessSample:
    """Lines of a Poisson process with intensity ``alpha * mu`` that hit ``ball(radius)``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    meta = {"poisson_method": POISSON_METHOD}
    meta.update(seed or {})
    return LineProcessSample(alpha, radius, draw_lines(rng, radius, alpha), meta)


def occupied_mask(lines: LineArrays, replica: np.ndarray, n_replicas: int) -> np.ndarray:
    """Boolean ``(n_replicas, |ball(R)|)`` array: vertex lies on some line."""
    R = lines.radius
    occ = np.zeros((n_replicas, 3 * (1 << R) - 2), dtype=bool)
    occ[replica[lines.apex_depth == 0], 0] = True
    for n in range(1, R + 1):
        sel = lines.apex_depth <= n
        rep = replica[sel]
        shift = R - n
        base = level_offset(n)
        occ[rep, base + (lines.u[sel] >> shift)] = True
        occ[rep, base + (lines.v[sel] >> shift)] = True
    return occ


def path_vacant_counts(occ: np.ndarray, radius: int) -> np.ndarray:
    """``Z[:, n]`` = number of depth-``n`` vertices whose root path is vacant.

    Column 0 holds the root's own vacancy indicator.
    """
    reps = occ.shape[0]
    z = np.zeros((reps, radius + 1), dtype=np.int64)
    open_prev = ~occ[:, :1]
    z[:, 0] = open_prev[:, 0]
    for n in range(1, radius + 1):
        base = level_offset(n)
        vac = ~occ[:, base : base + sphere_size(n)]
        parent = np.repeat(open_prev, 3, axis=1) if n == 1 else np.repeat(open_prev, 2, axis=1)
        open_prev = vac & parent
        z[:, n] = open_prev.sum(axis=1)
    return z


@dataclass(frozen=True)
class VacancyReport:
    vacant: frozenset[Vertex]
    Z: tuple[int, ...]  # Z_1 .. Z_R

    @property
    def survived(self) -> bool:
        return self.Z[-1] > 0


def vacancy_report(sample: LineProcessSample) -> VacancyReport:
    R = sample.radius
    occ = occupied_mask(sample.arrays, np.zeros(sample.count, dtype=np.int64), 1)
    z = path_vacant_counts(occ, R)[0]
    verts = ball(R)
    vacant = frozenset(verts[i] for i in np.flatnonzero(~occ[0]))
    return VacancyReport(vacant, tuple(int(c) for c in z[1:]))


def gw_oracle(alpha: float, n: int) -> float:
    """Exact ``P(Z_n > 0)``.

    The root is vacant with probability ``exp(-3 alpha / 4)``; each vertex
    below a vacant path is itself vacant, independently, with probability
    ``p = exp(-alpha / 4)`` (no line has its apex there).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    p = math.exp(-alpha / 4)
    s = 1.0
    for _ in range(n - 1):
        s = 1 - (1 - p * s) ** 2
    return math.exp(-0.75 * alpha) * (1 - (1 - p * s) ** 3)


def expected_Z(alpha: float, n: int) -> float:
    if n < 1:
        raise ValueError("n must be at least 1")
    return 3 * math.exp(-alpha) * (2 * math.exp(-alpha / 4)) ** (n - 1)


def _z_lines_chunk(args: tuple[int, int, float, int, int, int]) -> np.ndarray:
    seed, stage, alpha, radius, start, stop = args
    parts = [draw_lines(replica_rng(seed, stage, i), radius, alpha) for i in range(start, stop)]
    rep = np.repeat(np.arange(stop - start), [len(p) for p in parts])
    lines = LineArrays.concat(parts, radius)
    return path_vacant_counts(occupied_mask(lines, rep, stop - start), radius)


def _z_apex_chunk(args: tuple[int, int, float, int, int, int]) -> np.ndarray:
    """Lazy exploration of the apex field: only vertices below vacant paths are examined."""
    seed, stage, alpha, radius, start, stop = args
    p = math.exp(-alpha / 4)
    p_root = math.exp(-0.75 * alpha)
    out = np.zeros((stop - start, radius + 1), dtype=np.int64)
    for r, i in enumerate(range(start, stop)):
        rng = replica_rng(seed, stage, i)
        z = int(rng.random() < p_root)
        out[r, 0] = z
        width = 3
        for n in range(1, radius + 1):
            if z == 0:
                break
            z = int(rng.binomial(width * z, p))
            out[r, n] = z
            width = 2
    return out


ENGINES = {"lines": _z_lines_chunk, "apex": _z_apex_chunk}
CHUNK = 2000


def simulate_Z(
    alpha: float,
    radius: int,
    reps: int,
    seed: int,
    engine: str = "lines",
    stage: int = 1,
    workers: int | None = None,
) -> np.ndarray:
    """``(reps, radius + 1)`` array of path-vacancy counts, one row per replica.

    ``engine="lines"`` samples every line hitting the ball and reads the
    vacant set off their traces.  ``engine="apex"`` uses the fact that a line
    meets the root path of ``x`` iff its apex lies on that path, so the
    counts depend only on independent per-vertex apex occupancy.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    kernel = ENGINES[engine]
    jobs = [(seed, stage, alpha, radius, s, min(s + CHUNK, reps)) for s in range(0, reps, CHUNK)]
    return np.concatenate(parallel_map(kernel, jobs, workers))


def percolation_experiment(
    alpha: float,
    radius: int,
    reps: int,
    seed: int,
    engine: str = "lines",
    sigmas: float = 3.0,
    workers: int | None = None,
) -> tuple[ExperimentResult, ExperimentResult]:
    """Survival proxy ``P(Z_R > 0)`` and ``E[Z_R]`` against their exact values."""
    z = simulate_Z(alpha, radius, reps, seed, engine=engine, workers=workers)[:, radius]
    params = {"alpha": alpha, "R": radius, "reps": reps, "seed": seed, "engine": engine}
    surv = proportion_estimate(int((z > 0).sum()), reps)
    mean = mean_estimate(z)
    return (
        ExperimentResult("survival", surv.value, surv.stderr, gw_oracle(alpha, radius), params=params, sigmas=sigmas),
        ExperimentResult("mean_Z", mean.value, mean.stderr, expected_Z(alpha, radius), params=params, sigmas=sigmas),
    )


class NoCrossingError(ValueError):
    """The survival proxy never crosses the reference level on the grid."""


@dataclass(frozen=True)
class CriticalBracket:
    low: float
    high: float
    reference: float
    evaluations: tuple[tuple[float, float, float], ...]  # (alpha, estimate, stderr)
    low_confidence: bool

    @property
    def width(self) -> float:
        return self.high - self.low

    def contains(self, alpha: float) -> bool:
        return self.low <= alpha <= self.high


def estimate_critical_alpha(
    radius: int,
    reps: int,
    grid: Sequence[float],
    seed: int,
    tol: float = 0.05,
    engine: str = "apex",
    workers: int | None = None,
) -> CriticalBracket:
    """Bracket the intensity where ``P(Z_R > 0)`` falls through its critical value.

    The reference level is ``gw_oracle(4 ln 2, R)``.  After locating the
    crossing on ``grid`` the bracket is bisected while it is wider than
    ``tol`` and the midpoint estimate is clearly (2 sigma) on one side.
    """
    pts = sorted(float(a) for a in grid)
    if len(pts) < 2 or len(set(pts)) != len(pts) or pts[0] <= 0:
        raise ValueError("grid needs at least two distinct positive intensities")
    ref = gw_oracle(ALPHA_CRITICAL, radius)
    sd_ref = math.sqrt(ref * (1 - ref) / reps)
    evals: list[tuple[float, float, float]] = []

    def survival(a: float) -> float:
        stage = 100 + len(evals)
        z = simulate_Z(a, radius, reps, seed, engine=engine, stage=stage, workers=workers)[:, radius]
        est = proportion_estimate(int((z > 0).sum()), reps)
        evals.append((a, est.value, est.stderr))
        return est.value

    values = [survival(a) for a in pts]
    above = [v >= ref for v in values]
    crossings = [i for i in range(len(pts) - 1) if above[i] and not above[i + 1]]
    if not crossings:
        raise NoCrossingError(f"survival proxy never crosses {ref:.4g} on grid [{pts[0]}, {pts[-1]}]")
    lo_i, hi_i = crossings[0], crossings[-1] + 1
    lo, hi = pts[lo_i], pts[hi_i]
    low_conf = len(crossings) > 1 or reps < 1000
    low_conf |= any(abs(values[i] - ref) < 2 * sd_ref for i in (lo_i, hi_i))
    if len(crossings) == 1:
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            v = survival(mid)
            if abs(v - ref) < 2 * sd_ref:
                break
            if v >= ref:
                lo = mid
            else:
                hi = mid
    return CriticalBracket(lo, hi, ref, tuple(evals), bool(low_conf))
