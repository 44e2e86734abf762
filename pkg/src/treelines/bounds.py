"""Closed-form bounds for bounded driving distances and the non-explosion threshold.

All functions concern ``P(T(root, 1_n) <= t)`` for roads with exponent
``beta``; the exponent that appears is always ``gamma = beta - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

MEAN_BALL_BOUND = 2
THRESHOLD_CAP = 1.0 / 9.0


def _check(n: int, t: float, beta: float) -> float:
    if n < 1:
        raise ValueError("n must be at least 1")
    if t <= 0:
        raise ValueError("t must be positive")
    if beta <= 1:
        raise ValueError("beta must exceed 1")
    return beta - 1.0


def _leading(n: int, t: float, g: float) -> float:
    return 2.0**-n * (t / n) ** g


def bddp_lower(n: int, t: float, beta: float) -> float:
    """Probability that one road covers the whole path at speed at least ``n / t``."""
    g = _check(n, t, beta)
    return -math.expm1(-_leading(n, t, g))


def chain_weight(k: int, t: float, beta: float) -> float:
    """Weight ``(k + 1) k**-gamma t**gamma`` of a step through a k-edge subset."""
    g = beta - 1.0
    return (k + 1) * k**-g * t**g


def bddp_kahn_upper(n: int, t: float, beta: float) -> float:
    """Exponential upper bound; may exceed 1 (``inf`` when it overflows)."""
    g = _check(n, t, beta)
    s = sum(chain_weight(k, t, beta) for k in range(1, n))
    lead = _leading(n, t, g)
    try:
        return lead * math.exp(s)
    except OverflowError:
        log_value = math.log(lead) + s
        return math.inf if log_value > 709 else math.exp(log_value)


def chain_factor(n: int, t: float, beta: float) -> float:
    """``f(n)`` with ``f(k) = 1 + sum_{1 <= k' < k} w(k') f(k')``."""
    f = [1.0]
    for k in range(1, n + 1):
        f.append(1.0 + sum(chain_weight(j, t, beta) * f[j] for j in range(1, k)))
    return f[n]


def bddp_chain_exact(n: int, t: float, beta: float) -> float:
    """The cardinality-indexed chain sum that the exponential bound relaxes."""
    g = _check(n, t, beta)
    return _leading(n, t, g) * chain_factor(n, t, beta)


@dataclass(frozen=True)
class BddpBounds:
    n: int
    t: float
    beta: float
    lower: float
    chain_exact: float
    kahn_upper: float

    @property
    def chain_exact_clamped(self) -> float:
        return min(self.chain_exact, 1.0)

    @property
    def kahn_upper_clamped(self) -> float:
        return min(self.kahn_upper, 1.0)

    def row(self) -> dict:
        return {
            "n": self.n,
            "t": self.t,
            "beta": self.beta,
            "lower": self.lower,
            "chain_exact": self.chain_exact,
            "kahn_upper": self.kahn_upper,
            "chain_exact_clamped": self.chain_exact_clamped,
            "kahn_upper_clamped": self.kahn_upper_clamped,
        }


def bddp_bounds(n: int, t: float, beta: float) -> BddpBounds:
    return BddpBounds(n, t, beta, bddp_lower(n, t, beta), bddp_chain_exact(n, t, beta), bddp_kahn_upper(n, t, beta))


def fast_road_mass(t: float, beta: float) -> float:
    """``int v dnu`` over the lines through the root with speed above ``1/t``.

    Equals ``(3/4) (gamma / (beta - 2)) t**(beta - 2)``; finite only for ``beta > 2``.
    """
    if beta <= 2:
        raise ValueError("the integral diverges for beta <= 2")
    return 0.75 * (beta - 1.0) / (beta - 2.0) * t ** (beta - 2.0)


def nonexplosion_threshold(beta: float) -> float:
    """Largest ``t <= 1/9`` with ``fast_road_mass(t, beta) <= 1``."""
    if beta <= 2:
        raise ValueError("no threshold for beta <= 2")
    t_mass = (4.0 / 3.0 * (beta - 2.0) / (beta - 1.0)) ** (1.0 / (beta - 2.0))
    return min(THRESHOLD_CAP, t_mass)


def mean_ball_bound() -> int:
    """Bound on the expected size of the driving-distance ball at the threshold."""
    return MEAN_BALL_BOUND
