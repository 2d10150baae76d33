"""Closed-form and search-based guarantees for the sampling algorithms.

Constants defined as "smallest y satisfying a predicate" are computed by
search (integer scan or bisection); closed forms are kept only to cross-check
the searches.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Sequence

from .model import ModelError

BETA_SCALE = 0.4215


@dataclass(frozen=True)
class BoundConstants:
    beta: float
    h0: float
    h1: float
    ell0: int
    ell1: float
    m1: float
    V: float
    W: float
    alpha: float
    sqrt_m_threshold: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TheoremTwoBound:
    cr1: float
    cr2: float
    cr3_over: float
    cr3_under: float
    overall: float
    regime: str
    degenerate: bool = False

    def as_dict(self) -> dict:
        return asdict(self)


def _check(m: float, p: float, r1: float, r2: float) -> None:
    if not 0 < p < 1:
        raise ModelError(f"p must lie in (0,1), got {p}")
    if m < 2:
        raise ModelError(f"m must be at least 2, got {m}")
    if not r1 > r2:
        raise ModelError(f"need r1 > r2, got r1={r1}, r2={r2}")
    if not (0 < r2 and r1 < 1):
        raise ModelError("rewards must lie in (0,1)")


def beta(p: float) -> float:
    return BETA_SCALE * (p * p + (1 - p) ** 2) / (p * (1 - p))


def _bisect_min(pred, lo: float, hi: float, rel: float) -> float:
    """Smallest y in (lo, hi] with pred(y), assuming pred(lo) is false and
    pred is monotone on the bracket.  Returns a point where pred holds."""
    while not pred(hi):
        lo, hi = hi, hi * 2
    while hi - lo > rel * hi:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def type1_market_threshold_predicate(m: float, p: float):
    """Predicate y*p - sqrt(y) >= p(m - sqrt m)/(1 - p)."""
    target = p * (m - math.sqrt(m)) / (1 - p)
    return lambda y: y * p - math.sqrt(y) >= target


def type1_market_threshold(m: float, p: float) -> float:
    """Smallest type-1 market size whose sample size concentrates above
    the protection needed to cover m - sqrt(m) units."""
    pred = type1_market_threshold_predicate(m, p)
    # y*p - sqrt(y) decreases up to 1/(4p^2) and is negative there
    start = 1.0 / (4 * p * p)
    return _bisect_min(pred, start, max(2 * start, 1.0), 1e-13)


def type1_market_threshold_closed(m: float, p: float) -> float:
    a = (m - math.sqrt(m)) / (1 - p)
    return a + 1 / (2 * p * p) + math.sqrt(1 / (4 * p ** 4) + (m - math.sqrt(m)) / (p * p * (1 - p)))


def type2_market_threshold_predicate(m: float, p: float):
    """Predicate (1-p)y - sqrt(y) >= m."""
    return lambda y: (1 - p) * y - math.sqrt(y) >= m


def type2_market_threshold(m: float, p: float) -> int:
    """Smallest integer type-2 market whose online residual surely fills m."""
    pred = type2_market_threshold_predicate(m, p)
    # the predicate needs (1-p)y >= m, and it is increasing past that point
    y = max(0, math.floor(m / (1 - p)))
    while not pred(y):
        y += 1
    return y


def type2_market_threshold_closed(m: float, p: float, *, as_printed: bool = False) -> float:
    """Root of (1-p)y - sqrt(y) = m.

    ``as_printed`` swaps the (1-p)^2 denominator for 1-p^2, the variant that
    does not solve the equation.
    """
    den = (1 - p * p) if as_printed else (1 - p) ** 2
    return m / (1 - p) + (1 + math.sqrt(4 * m * (1 - p) + 1)) / (2 * den)


def large_market_predicate(p: float, r1: float, r2: float):
    """Predicate r1 - r2 > 2 / (y^(1/8) sqrt(y^(1/4) p - 1)) for y > 1/p^4."""
    gap = r1 - r2

    def pred(y: float) -> bool:
        inner = y ** 0.25 * p - 1
        if inner <= 0:
            return False
        return gap * y ** 0.125 * math.sqrt(inner) > 2
    return pred


def large_market_threshold(p: float, r1: float, r2: float) -> float:
    """Smallest m beyond which the estimates rank the types correctly with
    high probability; bisection to 1e-7 relative."""
    pred = large_market_predicate(p, r1, r2)
    lo = 1.0 / p ** 4
    return _bisect_min(pred, lo, 2 * lo, 1e-7)


def large_market_threshold_exact(p: float, r1: float, r2: float) -> float:
    """Solve (r1-r2)^2 t (p t - 1) = 4 for t = y^(1/4)."""
    g = r1 - r2
    t = (1 + math.sqrt(1 + 16 * p / (g * g))) / (2 * p)
    return t ** 4


def large_market_threshold_printed(p: float, r1: float, r2: float) -> float:
    a = (4 - 3 * p) * p
    b = (1 - p) * math.sqrt(4 - 3 * p)
    c = 4 * (1 - p) ** 2 / (r1 - r2) ** 2
    return ((b + math.sqrt(b * b + 4 * a * c)) / (2 * a)) ** 4


def constants(m: float, p: float, r1: float, r2: float) -> BoundConstants:
    _check(m, p, r1, r2)
    b = beta(p)
    sm = math.sqrt(m)
    h0 = type1_market_threshold(m, p)
    closed = type1_market_threshold_closed(m, p)
    if abs(h0 - closed) > 1e-6 * closed:
        warnings.warn(f"type-1 threshold search {h0} differs from closed form {closed}")
    h1 = h0 * (1 - p) - math.sqrt(p * (1 - p) * h0) - b / math.sqrt(h0)
    ell0 = type2_market_threshold(m, p)
    ell1 = math.sqrt(p * (1 - p) * ell0) + b / sm + ell0 * p
    m1 = large_market_threshold(p, r1, r2)
    printed = large_market_threshold_printed(p, r1, r2)
    if abs(printed - m1) > 1e-3 * m1:
        warnings.warn(f"closed-form large-market threshold {printed:.6g} disagrees with "
                      f"search {m1:.6g}; using the search", RuntimeWarning)
    v = 1 - 2 * (1 - p) ** sm
    w = min(1 - 1 / sm, h1 / m)
    return BoundConstants(b, h0, h1, ell0, ell1, m1, v, w, r2 / r1, sm)


def theorem2_bound(m: float, p: float, r1: float, r2: float) -> TheoremTwoBound:
    """Lower bound on Algorithm 1's competitive ratio."""
    c = constants(m, p, r1, r2)
    sm = math.sqrt(m)
    cr1 = min(max(0.0, 1 - (1 - p) / (p * sm)),
              1 - sm * (r1 - r2) / (sm * r1 + (m - sm) * r2))
    cr2 = min((1 - 1 / sm) * (1 - 1 / m), c.h1 / m)
    gap = sm * p - m ** 0.25
    degenerate = gap <= 0
    cr3_over = 0.0 if degenerate else (1 - 1 / m) ** 2 * (1 - 1 / gap ** 2) ** 2 * c.W
    tail = min((1 - 1 / c.ell0 ** 2) * c.alpha, 1 - (1 - p) * c.ell1 / (p * m))
    shrink = 1 - 1 / m ** 2
    cr3_under = c.V * min(shrink * c.W, 0.5 * shrink * c.W + 0.5 * tail)
    large = m >= c.m1
    third = cr3_over if large else cr3_under
    overall = max(0.0, min(cr1, cr2, third))
    return TheoremTwoBound(cr1, cr2, cr3_over, cr3_under, overall,
                           "m>=m1" if large else "m<m1", degenerate)


def benchmark_bound(rewards: Sequence[float]) -> float:
    """Best ratio reachable without samples when the ranking is unknown."""
    r = list(rewards)
    if len(r) < 2 or any(b >= a for a, b in zip(r, r[1:])):
        raise ModelError("rewards must be strictly decreasing")
    return 1.0 / (len(r) - sum(b / a for a, b in zip(r, r[1:])))


def smallp_h_tilde(p: float, reading: str = "literal") -> int:
    if reading == "literal":
        h = 1
        while h * p + math.sqrt(h * math.log(h)) < 1:
            h += 1
        return h
    if reading == "theta":
        return max(1, math.floor(1 / p + 1e-12))
    raise ModelError(f"unknown reading {reading!r}")


def smallp_upper_bound(m: float, p: float, alpha: float, reading: str = "literal") -> float:
    """Ceiling on any algorithm's ratio when few type-1 agents get sampled.

    ``reading="theta"`` uses the largest h with h*p <= 1 in place of the
    literal smallest-integer rule.
    """
    if not 0 < p < 1:
        raise ModelError(f"p must lie in (0,1), got {p}")
    h = smallp_h_tilde(p, reading)
    return m / (m + min(h, m) * (1 - alpha)) + 1 / h ** 2


@dataclass(frozen=True)
class AsymptoticForms:
    """Leading-order shapes with unit constants; for plotting only."""

    sampling_rate: float
    heterogeneous: float
    realized_ceiling: float
    large_market: float


def asymptotic_forms(m: float, p: float, r_vec: Sequence[float],
                     p_vec: Sequence[float] | None = None) -> AsymptoticForms:
    p1, p2 = (p, p) if p_vec is None else (p_vec[0], p_vec[1])
    sm = math.sqrt(m)
    return AsymptoticForms(
        1 - 1 / (p * sm),
        1 - max(1 / (p1 * sm), 1 / (min(p1, p2) ** 2 * m)),
        float(r_vec[1]),
        1 - max(1 / sm, 1 / (p * p * m)),
    )
