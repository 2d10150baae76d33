"""Adversarial family with unlimited low-reward supply.

On this family every arrival order is the worst one and type-2 agents
always outnumber the capacity, so a deterministic algorithm reduces to a
mapping ``z``: sampled type-1 count -> capacity held back for type 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import binom

from .bounds import beta
from .model import ModelError


def loss(n1: float, z_val: float, r1: float, r2: float) -> float:
    """Reward lost against the optimum when ``z_val`` units wait for ``n1`` arrivals."""
    return (n1 - z_val) * r1 * (n1 >= z_val) + (z_val - n1) * r2


def zstar(s1: float, p: float) -> float:
    """Expected number of unsampled type-1 agents given ``s1`` sampled ones."""
    return (1 - p) / p * s1


@dataclass(frozen=True)
class MappingPolicy:
    """Tabulated z(s1) for s1 = 0..len(values)-1."""

    values: tuple[float, ...]
    m: float

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        for v in vals:
            if v < -1e-12 or v > self.m + 1e-12:
                raise ModelError(f"mapping value {v} outside [0, {self.m}]")

    @classmethod
    def tabulate(cls, fn: Callable[[int], float], s_max: int, m: float) -> "MappingPolicy":
        return cls(tuple(min(m, max(0.0, fn(s))) for s in range(s_max + 1)), m)

    def __call__(self, s1: int) -> float:
        return self.values[s1]

    @property
    def s_max(self) -> int:
        return len(self.values) - 1


def zstar_policy(m: float, p: float, s_max: int) -> MappingPolicy:
    return MappingPolicy.tabulate(lambda s: zstar(s, p), s_max, m)


@dataclass(frozen=True)
class FamilyF:
    """Type-1 market sizes h in [h_lo, h_hi]; type-2 supply always covers m.

    ``ell`` records the nominal type-2 market; it is modelled analytically.
    ``wide`` admits h_hi up to m/p for the small-p family.
    """

    m: float
    p: float
    h_lo: float = 0.0
    h_hi: float | None = None
    wide: bool = False

    def __post_init__(self):
        if self.h_hi is None:
            object.__setattr__(self, "h_hi", self.p * self.m)
        limit = self.m / self.p if self.wide else self.p * self.m
        if not 0 <= self.h_lo <= self.h_hi <= limit + 1e-9:
            raise ModelError(f"need 0 <= h_lo <= h_hi <= {limit:g}")

    @classmethod
    def randomized(cls, m: float, p: float) -> "FamilyF":
        return cls(m, p, p * m / 2, p * m)

    @classmethod
    def small_p(cls, m: float, p: float) -> "FamilyF":
        return cls(m, p, 0.0, math.floor(m / p + 1e-9), wide=True)

    @property
    def ell(self) -> float:
        return 10000 * self.m / self.p

    def h_values(self) -> np.ndarray:
        return np.arange(math.ceil(self.h_lo - 1e-9), math.floor(self.h_hi + 1e-9) + 1)


def _loss_tables(m: float, p: float, r1: float, r2: float, hs: np.ndarray):
    """Weights, losses per unit z, and optima on the (h, s1) lattice."""
    hmax = int(hs.max())
    s = np.arange(hmax + 1)
    w = binom.pmf(s[None, :], hs[:, None], p)
    n1 = (hs[:, None] - s[None, :]).astype(float)
    valid = n1 >= 0
    a1 = np.minimum(np.maximum(n1, 0.0), m)
    opt = a1 * r1 + (m - a1) * r2
    return w * valid, np.maximum(n1, 0.0), opt, valid


def _loss_matrix(z: np.ndarray, n1: np.ndarray, opt: np.ndarray, m: float, r1: float, r2: float):
    reward = (m - z) * r2 + np.minimum(n1, z) * r1
    return opt - reward


def expected_losses(zmap: MappingPolicy, m: float, p: float, r1: float, r2: float,
                    fam: FamilyF) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per h: E[L / opt] and E[L] under the family's arrivals."""
    hs = fam.h_values()
    if zmap.s_max < hs.max():
        raise ModelError("mapping does not cover the family's sample range")
    w, n1, opt, valid = _loss_tables(m, p, r1, r2, hs)
    z = np.asarray(zmap.values[: hs.max() + 1])[None, :]
    lm = _loss_matrix(z, n1, opt, m, r1, r2) * valid
    return hs, (w * lm / opt).sum(axis=1), (w * lm).sum(axis=1)


def family_f_cr(zmap: MappingPolicy, m: float, p: float, r1: float, r2: float,
                fam: FamilyF) -> tuple[float, int]:
    """1 - max_h E[L/opt] and the maximizing h (smallest on ties)."""
    hs, ratio, _ = expected_losses(zmap, m, p, r1, r2, fam)
    i = int(np.argmax(ratio))
    return 1.0 - float(ratio[i]), int(hs[i])


def specific_z_bounds(m: float, p: float, r1: float, r2: float, *,
                      deviation_scale: str = "stated") -> tuple[float, float]:
    """Closed-form (lower, upper) on the worst expected loss of z = (1-p)/p * s1,
    scaled by m*r1 (lower) and m*r2 (upper).

    The stated lower bound takes E|hp - s1| >= sqrt((1-p)h/(2p)), which
    exceeds the true binomial deviation by a factor 1/p.
    ``deviation_scale="binomial"`` uses E|hp - s1| >= sqrt(hp(1-p)/2) instead.
    """
    b = beta(p)
    sm = math.sqrt(m)
    upper = (r1 * math.sqrt(1 - p) / (r2 * p * sm)
             + math.sqrt(2) * b * r1 / (p * math.sqrt(p) * r2 * m * sm))
    if deviation_scale == "stated":
        lead = math.sqrt(1 - p) / (2 * math.sqrt(2) * p * sm)
    elif deviation_scale == "binomial":
        lead = math.sqrt(1 - p) / (2 * math.sqrt(2) * sm)
    else:
        raise ModelError(f"unknown deviation_scale {deviation_scale!r}")
    lower = lead - b / (p * math.sqrt(p) * m * sm)
    return lower, upper


def surrogate_losses(m: float, p: float, r1: float, r2: float,
                     fam: FamilyF | None = None) -> tuple[float, float]:
    """Exact max_h E[L]/(m r1) and max_h E[L]/(m r2) for z = (1-p)/p * s1."""
    fam = fam or FamilyF(m, p)
    zmap = zstar_policy(m, p, int(fam.h_values().max()))
    _, _, el = expected_losses(zmap, m, p, r1, r2, fam)
    worst = float(el.max())
    return worst / (m * r1), worst / (m * r2)


def best_tabulated_mapping(m: float, p: float, r1: float, r2: float, fam: FamilyF, *,
                           resolution: int = 50, sweeps: int = 3,
                           start: MappingPolicy | None = None) -> tuple[MappingPolicy, float]:
    """Coordinate search over z(s1) on a grid of ``resolution``+1 levels in [0, m].

    Starts from ``start`` (default z = (1-p)/p * s1) and only accepts strict
    improvements of the worst-case E[L/opt], so the result is never worse
    than the start.
    """
    hs = fam.h_values()
    s_max = int(hs.max())
    zmap = start or zstar_policy(m, p, s_max)
    w, n1, opt, valid = _loss_tables(m, p, r1, r2, hs)
    z = np.array(zmap.values[: s_max + 1], dtype=float)
    contrib = w * _loss_matrix(z[None, :], n1, opt, m, r1, r2) * valid / opt
    per_h = contrib.sum(axis=1)
    best = per_h.max()
    levels = np.linspace(0.0, m, resolution + 1)
    for _ in range(sweeps):
        improved = False
        for s in range(s_max + 1):
            col = (w[:, s, None] * _loss_matrix(levels[None, :], n1[:, s, None], opt[:, s, None],
                                                m, r1, r2) * valid[:, s, None] / opt[:, s, None])
            trial = (per_h - contrib[:, s])[:, None] + col
            worst = trial.max(axis=0)
            j = int(np.argmin(worst))
            if worst[j] < best - 1e-15:
                z[s] = levels[j]
                per_h = trial[:, j]
                contrib[:, s] = col[:, j]
                best = worst[j]
                improved = True
        if not improved:
            break
    return MappingPolicy(tuple(z), m), 1.0 - float(best)
