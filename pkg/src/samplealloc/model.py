"""Core domain types for online allocation with test-period samples.

Types are labelled 1..k in declared order, and type 1 carries the highest
expected reward.  Accepted amounts are real-valued: the final acceptance
before a threshold binds may be a fraction of an agent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class ModelError(ValueError):
    """Invalid argument to a model operation."""


@dataclass(frozen=True)
class ProblemInstance:
    m: float
    p: float
    rewards: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "rewards", tuple(float(r) for r in self.rewards))
        object.__setattr__(self, "m", float(self.m))
        object.__setattr__(self, "p", float(self.p))
        if not 0.0 < self.p < 1.0:
            raise ModelError(f"p must lie in (0,1), got {self.p}")
        if not self.m >= 2:
            raise ModelError(f"m must be at least 2, got {self.m}")
        if len(self.rewards) < 2:
            raise ModelError("need at least two agent types")
        for r in self.rewards:
            if not 0.0 < r < 1.0:
                raise ModelError(f"rewards must lie in (0,1), got {r}")
        for a, b in zip(self.rewards, self.rewards[1:]):
            if not a > b:
                raise ModelError("rewards must be strictly decreasing by type index")

    @classmethod
    def two_type(cls, m: float, p: float, r1: float, r2: float) -> "ProblemInstance":
        return cls(m=m, p=p, rewards=(r1, r2))

    @property
    def k(self) -> int:
        return len(self.rewards)

    @property
    def r1(self) -> float:
        return self.rewards[0]

    @property
    def r2(self) -> float:
        return self.rewards[1]

    @property
    def alpha(self) -> float:
        return self.rewards[1] / self.rewards[0]

    def reward(self, t: int) -> float:
        return self.rewards[t - 1]


@dataclass(frozen=True)
class MarketSize:
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if any(c < 0 for c in self.counts):
            raise ModelError(f"market counts must be nonnegative, got {self.counts}")

    @classmethod
    def of(cls, h: int, ell: int) -> "MarketSize":
        return cls((h, ell))

    @property
    def h(self) -> int:
        return self.counts[0]

    @property
    def ell(self) -> int:
        return self.counts[1]


@dataclass(frozen=True)
class SampleInfo:
    s: tuple[int, ...]
    rho: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "s", tuple(int(v) for v in self.s))
        object.__setattr__(self, "rho", tuple(tuple(int(v) for v in r) for r in self.rho))
        if len(self.s) != len(self.rho):
            raise ModelError("s and rho must cover the same types")
        for si, ri in zip(self.s, self.rho):
            if si < 0 or len(ri) != si:
                raise ModelError("each rho list must have length s_i")
            if any(v not in (0, 1) for v in ri):
                raise ModelError("realized rewards must be 0 or 1")

    @classmethod
    def from_rewards(cls, *rho: Sequence[int]) -> "SampleInfo":
        return cls(tuple(len(r) for r in rho), tuple(tuple(r) for r in rho))

    def successes(self, t: int) -> int:
        return sum(self.rho[t - 1])


@dataclass(frozen=True)
class ArrivalSequence:
    types: tuple[int, ...]
    k: int = 2

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(int(t) for t in self.types))
        if self.types:
            k = max(self.k, max(self.types))
            object.__setattr__(self, "k", k)
            if min(self.types) < 1:
                raise ModelError("type labels start at 1")

    @property
    def n(self) -> tuple[int, ...]:
        counts = [0] * self.k
        for t in self.types:
            counts[t - 1] += 1
        return tuple(counts)

    def __len__(self):
        return len(self.types)


@dataclass(frozen=True)
class AllocationOutcome:
    accepted: tuple[float, ...]
    expected_reward: float

    @classmethod
    def from_accepted(cls, accepted: Sequence[float], inst: ProblemInstance) -> "AllocationOutcome":
        acc = tuple(float(a) for a in accepted)
        return cls(acc, sum(a * r for a, r in zip(acc, inst.rewards)))

    @property
    def total(self) -> float:
        return sum(self.accepted)


def _check_counts(n: Sequence[int]) -> None:
    if any(c < 0 for c in n):
        raise ModelError(f"counts must be nonnegative, got {tuple(n)}")


def opt_expected(n: Sequence[float], inst: ProblemInstance) -> float:
    """Clairvoyant reward: fill capacity greedily from the best type down."""
    _check_counts(n)
    left = inst.m
    total = 0.0
    for count, r in zip(n, inst.rewards):
        take = min(count, max(left, 0.0))
        total += take * r
        left -= take
    return total


def _check_level(x: float, m: float) -> None:
    if x < 0 or x > m:
        raise ModelError(f"protection level must lie in [0, m={m}], got {x}")


def run_protection_policy(seq: ArrivalSequence, protected: int, x: float,
                          inst: ProblemInstance) -> AllocationOutcome:
    """Stream ``seq`` reserving ``x`` units for the protected type.

    Computed in closed form over the whole sequence: the j-th unprotected
    arrival can take what is left of the m - x cap, and every arrival is then
    clipped by the capacity still free when it shows up.
    """
    _check_level(x, inst.m)
    k = max(inst.k, seq.k)
    types = np.asarray(seq.types, dtype=np.int64)
    if types.size == 0:
        return AllocationOutcome.from_accepted([0.0] * inst.k, inst)
    others = types != protected
    before = np.cumsum(others) - others
    want = np.where(others, np.clip(inst.m - x - before, 0.0, 1.0), 1.0)
    free = inst.m - (np.cumsum(want) - want)
    take = np.clip(free, 0.0, want)
    acc = np.bincount(types, weights=take, minlength=k + 1)[1:]
    return AllocationOutcome.from_accepted([float(a) for a in acc[:inst.k]], inst)


def run_nested_policy(seq: ArrivalSequence, order: Sequence[int], levels: Sequence[float],
                      inst: ProblemInstance) -> AllocationOutcome:
    """Nested protection.

    ``order[i]`` is the type ranked i+1 (best first).  An agent ranked i+1 is
    taken only while the amount accepted from ranks i+1..k stays below
    ``m - levels[i]``; ``levels[0]`` is normally 0.
    """
    k = len(order)
    if sorted(order) != list(range(1, k + 1)):
        raise ModelError(f"order must be a permutation of 1..{k}")
    if len(levels) != k:
        raise ModelError("need one level per rank")
    for x in levels:
        _check_level(x, inst.m)
    if any(b < a for a, b in zip(levels, levels[1:])):
        raise ModelError("levels must be nondecreasing")
    rank = {t: i for i, t in enumerate(order)}
    by_rank = [0.0] * k
    acc = [0.0] * inst.k
    used = 0.0
    for t in seq.types:
        room = inst.m - used
        if room <= 0:
            break
        i = rank[t]
        take = min(1.0, room, inst.m - levels[i] - sum(by_rank[i:]))
        if take > 0:
            by_rank[i] += take
            acc[t - 1] += take
            used += take
    return AllocationOutcome.from_accepted(acc, inst)


def ordered_sequence(n: Sequence[int]) -> ArrivalSequence:
    """Worst order: lowest-reward type first, best type last."""
    _check_counts(n)
    types: list[int] = []
    for t in range(len(n), 0, -1):
        types.extend([t] * int(n[t - 1]))
    return ArrivalSequence(tuple(types), k=len(n))


def random_sequence(n: Sequence[int], rng: np.random.Generator) -> ArrivalSequence:
    seq = ordered_sequence(n)
    perm = rng.permutation(len(seq.types))
    return ArrivalSequence(tuple(seq.types[i] for i in perm), k=len(n))


def ordered_protection_accepted(n1: float, n2: float, protected: int, x: float,
                                m: float) -> tuple[float, float]:
    """Accepted (type 1, type 2) on the ordered two-type sequence, from counts alone."""
    if protected == 1:
        a2 = min(n2, max(m - x, 0.0))
        a1 = min(n1, m - a2)
    else:
        a2 = min(n2, m)
        a1 = max(min(n1, m - a2, m - x), 0.0)
    return a1, a2


def sample_market(size: MarketSize, inst: ProblemInstance,
                  rng: np.random.Generator) -> tuple[SampleInfo, tuple[int, ...]]:
    """Draw the test-period sample and its realized rewards."""
    s = []
    rho = []
    for count, r in zip(size.counts, inst.rewards):
        si = int(rng.binomial(count, inst.p)) if count else 0
        s.append(si)
        rho.append(tuple(int(v) for v in rng.random(si) < r))
    residual = tuple(c - si for c, si in zip(size.counts, s))
    return SampleInfo(tuple(s), tuple(rho)), residual
