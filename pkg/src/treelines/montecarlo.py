"""Seeded replication, summary statistics and result records.

Random streams
--------------
Every stream is ``Generator(PCG64(SeedSequence(master_seed, spawn_key=key)))``
where ``key`` is a tuple of small integers: ``(stage, replica)`` for
experiments whose replicas draw a variable amount of randomness, and
``(stage, block)`` for vectorised estimators that draw fixed-width rows
block by block.  ``SeedSequence`` hashes the key together with the master
seed, so replica ``i`` sees the same stream whatever the replica count,
block layout of other replicas or worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy import stats

WORKERS_ENV = "TREELINES_WORKERS"
BLOCK = 1 << 16


def replica_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Stream keyed by ``(master_seed, *key)``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def blocks(total: int, size: int = BLOCK) -> list[tuple[int, int]]:
    """``(block index, rows in block)`` covering ``total`` rows."""
    return [(b, min(size, total - b * size)) for b in range((total + size - 1) // size)]


def parallel_map(fn: Callable[[Any], Any], items: Sequence[Any], workers: int | None = None) -> list:
    """Ordered map, in a process pool when ``workers > 1``."""
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    n: int

    def z(self, reference: float) -> float:
        return z_score(self.value, self.stderr, reference)


def mean_estimate(x: np.ndarray) -> Estimate:
    x = np.asarray(x, dtype=float)
    n = x.size
    if n == 0:
        raise ValueError("no samples")
    sd = float(x.std(ddof=1)) if n > 1 else 0.0
    return Estimate(float(x.mean()), sd / math.sqrt(n), n)


def proportion_estimate(hits: int, n: int) -> Estimate:
    if n <= 0:
        raise ValueError("no samples")
    p = hits / n
    return Estimate(p, math.sqrt(p * (1 - p) / n), n)


def z_score(value: float, stderr: float, reference: float) -> float:
    diff = value - reference
    if stderr > 0:
        return diff / stderr
    return 0.0 if diff == 0 else math.copysign(math.inf, diff)


def dkw_epsilon(n: int, alpha: float = 0.01) -> float:
    """Half-width of the DKW confidence band for an ``n``-sample ECDF."""
    return math.sqrt(math.log(2 / alpha) / (2 * n))


def two_sample_threshold(n: int, m: int, alpha: float = 0.01) -> float:
    """Asymptotic level-``alpha`` critical value of the two-sample KS distance."""
    return math.sqrt(math.log(2 / alpha) / 2 * (n + m) / (n * m))


def ks_distance(samples: np.ndarray, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    return float(stats.ks_1samp(np.asarray(samples, dtype=float), cdf).statistic)


def ks_two_sample(a: np.ndarray, b: np.ndarray) -> float:
    return float(stats.ks_2samp(np.asarray(a, dtype=float), np.asarray(b, dtype=float)).statistic)


@dataclass
class ExperimentResult:
    """One summary line of a Monte Carlo experiment.

    ``z_score`` is filled in exactly when an ``oracle`` value is present.
    """

    name: str
    estimate: float
    stderr: float
    oracle: float | None = None
    censored_count: int = 0
    runtime: float = 0.0
    params: dict[str, Any] = field(default_factory=dict)
    extra: dict[str, Any] = field(default_factory=dict)
    sigmas: float = 3.0
    one_sided: str | None = None  # "upper": only estimate > oracle fails
    interval: tuple[float, float] | None = None  # verdict by bracketing when no oracle

    def __post_init__(self) -> None:
        if self.stderr < 0:
            raise ValueError("negative standard error")

    @property
    def z_score(self) -> float | None:
        if self.oracle is None:
            return None
        return z_score(self.estimate, self.stderr, self.oracle)

    @property
    def passed(self) -> bool | None:
        z = self.z_score
        if z is None:
            if self.interval is None:
                return None
            lo, hi = self.interval
            slack = self.sigmas * self.stderr
            return lo - slack <= self.estimate <= hi + slack
        if self.one_sided == "upper":
            return z <= self.sigmas
        return abs(z) <= self.sigmas

    def row(self) -> dict[str, Any]:
        """Flat record for CSV/JSON sinks (runtime omitted: rows are bit-exact)."""
        out: dict[str, Any] = {"statistic": self.name}
        out.update(self.params)
        out.update(
            estimate=self.estimate,
            stderr=self.stderr,
            oracle=self.oracle,
            z_score=self.z_score,
            verdict=None if self.passed is None else ("pass" if self.passed else "fail"),
            censored=self.censored_count,
        )
        if self.interval is not None:
            out.update(interval_low=self.interval[0], interval_high=self.interval[1])
        out.update(self.extra)
        return out
