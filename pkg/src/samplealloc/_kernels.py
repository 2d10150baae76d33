"""Compiled loops behind the exact competitive-ratio engine.

Binomial weights below ``TINY`` are skipped; the neglected mass per cell is
below 1e-13.
"""

import numpy as np
from numba import njit
from scipy.stats import binom

TINY = 1e-17


def pmf_table(nmax: int, p: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row n holds Binomial(n, p) probabilities, plus the index range above TINY."""
    n = np.arange(nmax + 1)
    table = binom.pmf(n[None, :], n[:, None], p)
    table[n[None, :] > n[:, None]] = 0.0
    lo = np.zeros(nmax + 1, dtype=np.int64)
    hi = np.zeros(nmax + 1, dtype=np.int64)
    for i in range(nmax + 1):
        keep = np.nonzero(table[i, : i + 1] > TINY)[0]
        lo[i] = keep[0]
        hi[i] = keep[-1]
    return table, lo, hi


def sf_table(nmax: int, r: float) -> np.ndarray:
    """Row n, column k: P(Binomial(n, r) > k)."""
    n = np.arange(nmax + 1)
    table = binom.sf(n[None, :], n[:, None], r)
    table[n[None, :] >= n[:, None]] = 0.0
    return table


@njit(cache=True)
def good_event_table(s1max, s2max, r1, r2, sf1, pmf2, lo2, hi2):
    """P(mean of s1 draws at r1 beats mean of s2 draws at r2), all pairs."""
    q = np.empty((s1max + 1, s2max + 1))
    q[0, 0] = 0.5
    for s2 in range(1, s2max + 1):
        q[0, s2] = 1.0 - r2
    for s1 in range(1, s1max + 1):
        q[s1, 0] = r1
        for s2 in range(1, s2max + 1):
            acc = 0.0
            for b2 in range(lo2[s2], hi2[s2] + 1):
                acc += pmf2[s2, b2] * sf1[s1, (b2 * s1) // s2]
            q[s1, s2] = acc
    return q


@njit(cache=True)
def _opt(n1, n2, m, r1, r2):
    a1 = min(n1, m)
    return a1 * r1 + min(n2, max(m - n1, 0.0)) * r2


@njit(cache=True)
def _reward_protect1(n1, n2, x1, m, r1, r2):
    a2 = min(n2, m - x1)
    a1 = min(n1, m - a2)
    return a1 * r1 + a2 * r2


@njit(cache=True)
def _reward_protect2(n1, n2, x2, m, r1, r2):
    a2 = min(n2, m)
    a1 = max(min(n1, min(m - a2, m - x2)), 0.0)
    return a1 * r1 + a2 * r2


@njit(cache=True)
def ratio_grid(hmax, lmax, m, r1, r2, f1, f2, pmf, lo, hi, q):
    """Expected ratio on the worst order for every (h, ell) in the grid.

    Cells where the type-2 residual surely covers m, or where the type-1
    residual surely covers m with full protection, reduce to one-dimensional
    sums over pre-aggregated good-event probabilities.
    """
    out = np.empty((hmax + 1, lmax + 1))
    s1cap = q.shape[0] - 1
    s2cap = q.shape[1] - 1
    x1 = np.empty(s1cap + 1)
    for s in range(s1cap + 1):
        x1[s] = min(m, f1 * s)
    x2 = np.empty(s2cap + 1)
    for s in range(s2cap + 1):
        x2[s] = min(m, f2 * s)

    # type-1 saturated rows: qt[h, s2] = sum over s1 of w1 * q[s1, s2]
    hsat = np.zeros(hmax + 1, dtype=np.bool_)
    wsum1 = np.zeros(hmax + 1)
    qt = np.zeros((hmax + 1, s2cap + 1))
    for h in range(hmax + 1):
        if h - hi[h] >= m and x1[lo[h]] >= m:
            hsat[h] = True
            for s1 in range(lo[h], hi[h] + 1):
                w = pmf[h, s1]
                wsum1[h] += w
                for s2 in range(s2cap + 1):
                    qt[h, s2] += w * q[s1, s2]

    qbar = np.zeros(s1cap + 1)
    for ell in range(lmax + 1):
        lo2 = lo[ell]
        hi2 = hi[ell]
        lsat = ell - hi2 >= m
        wsum2 = 0.0
        if lsat:
            for s1 in range(s1cap + 1):
                qbar[s1] = 0.0
            for s2 in range(lo2, hi2 + 1):
                w = pmf[ell, s2]
                wsum2 += w
                for s1 in range(s1cap + 1):
                    qbar[s1] += w * q[s1, s2]
        for h in range(hmax + 1):
            if h == 0 and ell == 0:
                out[h, ell] = 1.0
                continue
            lo1 = lo[h]
            hi1 = hi[h]
            total = 0.0
            if lsat:
                for s1 in range(lo1, hi1 + 1):
                    n1 = float(h - s1)
                    a1 = min(n1, m)
                    opt = a1 * r1 + (m - a1) * r2
                    good = (m - x1[s1]) * r2 + min(n1, x1[s1]) * r1
                    bad = m * r2
                    total += pmf[h, s1] * (qbar[s1] * good + (wsum2 - qbar[s1]) * bad) / opt
            elif hsat[h]:
                full = m * r1
                for s2 in range(lo2, hi2 + 1):
                    n2 = float(ell - s2)
                    a2 = min(n2, m)
                    b = (min(m - a2, m - x2[s2]) * r1 + a2 * r2) / full
                    total += pmf[ell, s2] * (qt[h, s2] + (wsum1[h] - qt[h, s2]) * b)
            else:
                for s1 in range(lo1, hi1 + 1):
                    w1 = pmf[h, s1]
                    n1 = float(h - s1)
                    xa = x1[s1]
                    inner = 0.0
                    for s2 in range(lo2, hi2 + 1):
                        n2 = float(ell - s2)
                        opt = _opt(n1, n2, m, r1, r2)
                        if opt <= 0.0:
                            inner += pmf[ell, s2]
                            continue
                        g = _reward_protect1(n1, n2, xa, m, r1, r2)
                        bd = _reward_protect2(n1, n2, x2[s2], m, r1, r2)
                        qq = q[s1, s2]
                        inner += pmf[ell, s2] * (qq * g + (1.0 - qq) * bd) / opt
                    total += w1 * inner
            out[h, ell] = total
    return out


@njit(cache=True)
def adaptive_run(types, obs, m, f, s, wins, seen, r_hat):
    """Adaptive two-type protection; ``obs[i]`` is the reward revealed if
    arrival i is accepted.  Returns (accepted type 1, accepted type 2, switches)."""
    wins = wins.copy()
    seen = seen.copy()
    r_hat = r_hat.copy()
    accepted = np.zeros(2)
    arrived = np.zeros(2)
    used = 0.0
    switches = 0
    current = 0
    for i in range(types.shape[0]):
        t = types[i] - 1
        prot = 0 if r_hat[0] > r_hat[1] else 1
        if current != 0 and prot + 1 != current:
            switches += 1
        current = prot + 1
        other = 1 - prot
        level = max(0.0, min(m - accepted[other], f * s[prot] - arrived[prot]))
        room = m - used
        if room > 0:
            if t == prot:
                take = min(1.0, room)
            else:
                take = min(1.0, room - level)
            if take > 0:
                accepted[t] += take
                used += take
                wins[t] += obs[i]
                seen[t] += 1
                r_hat[t] = wins[t] / seen[t]
        arrived[t] += 1
    return accepted[0], accepted[1], switches
