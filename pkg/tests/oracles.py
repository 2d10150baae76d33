"""Slow reference implementations that share no code with the package."""

import itertools
from fractions import Fraction
from math import comb


def trace_two_type(types, protected, x, m):
    """Agent-by-agent replay of a protection policy; returns accepted (type1, type2)."""
    got = {1: 0.0, 2: 0.0}
    for t in types:
        left = m - got[1] - got[2]
        if left <= 0:
            continue
        if t == protected:
            amount = min(1.0, left)
        else:
            cap = (m - x) - got[t]
            amount = min(1.0, left, cap)
        if amount > 0:
            got[t] += amount
    return got[1], got[2]


def greedy_opt(n1, n2, m, r1, r2):
    best = 0.0
    # brute force over type-1 acceptances (integers plus the fractional cap), remainder to type 2
    for a1 in list(range(0, int(min(n1, m)) + 1)) + [min(n1, m)]:
        a2 = min(n2, m - a1)
        best = max(best, a1 * r1 + a2 * r2)
    return best


def _bern(k, n, r):
    return comb(n, k) * r ** k * (1 - r) ** (n - k)


def _reward_vectors(s, r):
    """Walk every 0/1 reward vector of length s; probability mass per success count."""
    mass = {}
    for rho in itertools.product((0, 1), repeat=s):
        k = sum(rho)
        mass[k] = mass.get(k, 0.0) + r ** k * (1 - r) ** (s - k)
    return mass


def joint_enumeration_ratio(h, ell, m, p, r1, r2):
    """Expected ratio by enumerating every sample count and every 0/1 reward vector."""
    if h == 0 and ell == 0:
        return 1.0
    f = (1 - p) / p
    total = 0.0
    for s1 in range(h + 1):
        w1 = _bern(s1, h, p)
        for s2 in range(ell + 1):
            w2 = _bern(s2, ell, p)
            n1, n2 = h - s1, ell - s2
            types = [2] * n2 + [1] * n1
            opt = greedy_opt(n1, n2, m, r1, r2)
            if opt == 0:
                total += w1 * w2
                continue
            a = trace_two_type(types, 1, min(m, f * s1), m)
            good = a[0] * r1 + a[1] * r2
            b = trace_two_type(types, 2, min(m, f * s2), m)
            bad = b[0] * r1 + b[1] * r2
            for k1, wr1 in _reward_vectors(s1, r1).items():
                for k2, wr2 in _reward_vectors(s2, r2).items():
                    if s1 and s2:
                        q = 1.0 if Fraction(k1, s1) > Fraction(k2, s2) else 0.0
                    elif s2:
                        q = 1 - k2 / s2   # uniform draw beats the type-2 mean
                    elif s1:
                        q = k1 / s1
                    else:
                        q = 0.5
                    total += w1 * w2 * wr1 * wr2 * (q * good + (1 - q) * bad) / opt
    return total


def trace_nested(types, order, thresholds, m):
    """Replay a nested policy; thresholds[i] applies to rank i (0-based)."""
    rank = {t: i for i, t in enumerate(order)}
    got_rank = [0.0] * len(order)
    got = {t: 0.0 for t in order}
    for t in types:
        left = m - sum(got_rank)
        i = rank[t]
        amount = min(1.0, left, m - thresholds[i] - sum(got_rank[i:]))
        if amount > 0:
            got_rank[i] += amount
            got[t] += amount
    return tuple(got[t] for t in sorted(got))


def realized_ratio_enumeration(h, ell, m, p, r1, r2):
    """Exact realized ratio on the worst order: enumerate samples, estimates and
    the 0/1 outcome of every online agent."""
    if h == 0 and ell == 0:
        return 1.0
    f = (1 - p) / p
    total = 0.0
    for s1 in range(h + 1):
        for s2 in range(ell + 1):
            w = _bern(s1, h, p) * _bern(s2, ell, p)
            n1, n2 = h - s1, ell - s2
            types = [2] * n2 + [1] * n1
            for k1, wr1 in _reward_vectors(s1, r1).items():
                for k2, wr2 in _reward_vectors(s2, r2).items():
                    if s1 and s2:
                        q = 1.0 if Fraction(k1, s1) > Fraction(k2, s2) else 0.0
                    elif s2:
                        q = 1 - k2 / s2
                    elif s1:
                        q = k1 / s1
                    else:
                        q = 0.5
                    for prot, pq in ((1, q), (2, 1 - q)):
                        if pq == 0:
                            continue
                        x = min(m, f * (s1 if prot == 1 else s2))
                        a1, a2 = trace_two_type(types, prot, x, m)
                        total += w * wr1 * wr2 * pq * _online_realized(types, a1, a2, m, r1, r2)
    return total


def _online_realized(types, a1, a2, m, r1, r2):
    out = 0.0
    for rho in itertools.product((0, 1), repeat=len(types)):
        pr = 1.0
        for t, v in zip(types, rho):
            r = r1 if t == 1 else r2
            pr *= r if v else 1 - r
        left = {1: a1, 2: a2}
        got = 0.0
        for t, v in zip(types, rho):
            take = min(1.0, left[t])
            left[t] -= take
            got += take * v
        best = min(m, sum(rho))
        out += pr * (got / best if best > 0 else 1.0)
    return out


def trace_adaptive(types, s, wins, r_hat, obs, m, f):
    """Agent-by-agent adaptive protection; obs[i] is revealed when arrival i is accepted."""
    wins, seen, r_hat = list(wins), list(s), list(r_hat)
    acc, arrived = [0.0, 0.0], [0, 0]
    switches, current = 0, None
    for i, t in enumerate(types):
        prot = 1 if r_hat[0] > r_hat[1] else 2
        if current is not None and prot != current:
            switches += 1
        current = prot
        reserve = max(0.0, min(m - acc[2 - prot], f * s[prot - 1] - arrived[prot - 1]))
        room = m - sum(acc)
        if t == prot:
            amount = min(1.0, room)
        else:
            amount = min(1.0, room - reserve)
        if room > 0 and amount > 0:
            acc[t - 1] += amount
            wins[t - 1] += obs[i]
            seen[t - 1] += 1
            r_hat[t - 1] = wins[t - 1] / seen[t - 1]
        arrived[t - 1] += 1
    return acc, switches
