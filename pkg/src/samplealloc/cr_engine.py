"""Exact and Monte Carlo competitive-ratio evaluation for the sampling algorithms.

The exact engine evaluates the worst arrival order (all type-2 agents before
type-1 agents) and enumerates every sample outcome with its binomial weight.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.stats import binom

from . import _kernels
from .algorithms import (
    alg1_decide,
    alg3_branches,
    execute_two_type,
    no_sample_benchmark_run,
    optimal_benchmark_level,
    run_adaptive_policy,
)
from .model import (
    ArrivalSequence,
    MarketSize,
    ModelError,
    ProblemInstance,
    opt_expected,
    ordered_protection_accepted,
    random_sequence,
    sample_market,
)


class McEstimate(NamedTuple):
    mean: float
    stderr: float
    trials: int


@dataclass(frozen=True)
class CrReport:
    ratios: np.ndarray
    infimum: float
    argmin: tuple[int, int]
    grid_bounds: tuple[int, int]

    @property
    def grid(self) -> list[tuple[int, int, float]]:
        return [(h, ell, float(self.ratios[h, ell]))
                for h in range(self.ratios.shape[0]) for ell in range(self.ratios.shape[1])]


def good_event_prob(s1: int, s2: int, r1: float, r2: float) -> float:
    """Probability that the type-1 estimate strictly exceeds the type-2 estimate."""
    if s1 < 0 or s2 < 0:
        raise ModelError("sample counts must be nonnegative")
    if s1 == 0 and s2 == 0:
        return 0.5
    if s1 == 0:
        return 1.0 - r2
    if s2 == 0:
        return r1
    total = 0.0
    for b2 in range(s2 + 1):
        w2 = math.comb(s2, b2) * r2 ** b2 * (1 - r2) ** (s2 - b2)
        above = (b2 * s1) // s2
        tail = sum(math.comb(s1, b1) * r1 ** b1 * (1 - r1) ** (s1 - b1)
                   for b1 in range(above + 1, s1 + 1))
        total += w2 * tail
    return total


def outcome_split(s1: int, s2: int, r1: float, r2: float) -> tuple[float, float, float]:
    """(P(type 1 ahead), P(type 2 ahead), P(tie)) for two positive sample counts."""
    ahead = behind = tie = 0.0
    for b1 in range(s1 + 1):
        w1 = math.comb(s1, b1) * r1 ** b1 * (1 - r1) ** (s1 - b1)
        for b2 in range(s2 + 1):
            w = w1 * math.comb(s2, b2) * r2 ** b2 * (1 - r2) ** (s2 - b2)
            lhs, rhs = b1 * s2, b2 * s1
            if lhs > rhs:
                ahead += w
            elif lhs < rhs:
                behind += w
            else:
                tie += w
    return ahead, behind, tie


def good_event_matrix(s1max: int, s2max: int, r1: float, r2: float) -> np.ndarray:
    """All good-event probabilities for s1 <= s1max, s2 <= s2max (vectorised)."""
    q = np.empty((s1max + 1, s2max + 1))
    q[0, 0] = 0.5
    q[0, 1:] = 1.0 - r2
    q[1:, 0] = r1
    s1 = np.arange(1, s1max + 1)[:, None]
    for s2 in range(1, s2max + 1):
        b2 = np.arange(s2 + 1)
        tails = binom.sf((b2[None, :] * s1) // s2, s1, r1)
        q[1:, s2] = tails @ binom.pmf(b2, s2, r2)
    return q


def _factors(inst: ProblemInstance, p_hat: float | None) -> float:
    ph = inst.p if p_hat is None else p_hat
    return (1.0 - ph) / ph


def expected_ratio(h: int, ell: int, inst: ProblemInstance, *, p_hat: float | None = None,
                   known_rewards: bool = False) -> float:
    """E over the sample of E[reward]/OPT on the worst order, for one market.

    ``p_hat`` sets protection levels while sampling still uses ``inst.p``.
    ``known_rewards`` forces the correct ranking (good event with probability one).
    """
    if h < 0 or ell < 0:
        raise ModelError("market counts must be nonnegative")
    if h == 0 and ell == 0:
        return 1.0
    m, p, r1, r2 = inst.m, inst.p, inst.r1, inst.r2
    f = _factors(inst, p_hat)
    s1 = np.arange(h + 1)
    s2 = np.arange(ell + 1)
    w = np.outer(binom.pmf(s1, h, p), binom.pmf(s2, ell, p))
    q = np.ones((h + 1, ell + 1)) if known_rewards else good_event_matrix(h, ell, r1, r2)
    n1 = (h - s1)[:, None].astype(float)
    n2 = (ell - s2)[None, :].astype(float)
    x1 = np.minimum(m, f * s1)[:, None]
    x2 = np.minimum(m, f * s2)[None, :]
    a2 = np.minimum(n2, m - x1)
    good = np.minimum(n1, m - a2) * r1 + a2 * r2
    b2 = np.minimum(n2, m)
    bad = np.maximum(np.minimum(np.minimum(n1, m - b2), m - x2), 0.0) * r1 + b2 * r2
    opt = np.minimum(n1, m) * r1 + np.minimum(n2, np.maximum(m - n1, 0.0)) * r2
    safe = np.where(opt > 0, opt, 1.0)
    ratio = np.where(opt > 0, (q * good + (1 - q) * bad) / safe, 1.0)
    return float(np.sum(w * ratio))


def default_grid_bound(inst: ProblemInstance) -> int:
    return math.ceil(3 * inst.m / (1 - inst.p) - 1e-9)


def ratio_grid(inst: ProblemInstance, h_max: int, ell_max: int, *, p_hat: float | None = None,
               known_rewards: bool = False) -> np.ndarray:
    nmax = max(h_max, ell_max)
    pmf, lo, hi = _kernels.pmf_table(nmax, inst.p)
    s1cap = int(hi[: h_max + 1].max())
    s2cap = int(hi[: ell_max + 1].max())
    if known_rewards:
        q = np.ones((s1cap + 1, s2cap + 1))
    else:
        sf1 = _kernels.sf_table(s1cap, inst.r1)
        pmf2, lo2, hi2 = _kernels.pmf_table(s2cap, inst.r2)
        q = _kernels.good_event_table(s1cap, s2cap, inst.r1, inst.r2, sf1, pmf2, lo2, hi2)
    f = _factors(inst, p_hat)
    return _kernels.ratio_grid(h_max, ell_max, inst.m, inst.r1, inst.r2, f, f, pmf, lo, hi, q)


def report_from_ratios(ratios: np.ndarray) -> CrReport:
    """Infimum with ties resolved to the lexicographically smallest (h, ell)."""
    flat = int(np.argmin(ratios))
    h, ell = divmod(flat, ratios.shape[1])
    return CrReport(ratios, float(ratios[h, ell]), (h, ell),
                    (ratios.shape[0] - 1, ratios.shape[1] - 1))


def exact_cr(inst: ProblemInstance, h_max: int | None = None, ell_max: int | None = None, *,
             p_hat: float | None = None, known_rewards: bool = False) -> CrReport:
    """Infimum of ``expected_ratio`` over {0..h_max} x {0..ell_max}.

    Bounds default to ceil(3m/(1-p)).
    """
    if h_max is None:
        h_max = default_grid_bound(inst)
    if ell_max is None:
        ell_max = default_grid_bound(inst)
    if h_max < 0 or ell_max < 0:
        raise ModelError("grid bounds must be nonnegative")
    ratios = ratio_grid(inst, h_max, ell_max, p_hat=p_hat, known_rewards=known_rewards)
    return report_from_ratios(ratios)


def alg3_expected_ratio(h: int, ell: int, inst: ProblemInstance) -> float:
    if h == 0 and ell == 0:
        return 1.0
    m, p, r1, r2 = inst.m, inst.p, inst.r1, inst.r2
    s1 = np.arange(h + 1)
    s2 = np.arange(ell + 1)
    w = np.outer(binom.pmf(s1, h, p), binom.pmf(s2, ell, p))
    n1 = (h - s1)[:, None].astype(float)
    n2 = (ell - s2)[None, :].astype(float)
    rew = 0.5 * np.minimum(n1, m) * r1 + 0.5 * np.minimum(n2, m) * r2
    opt = np.minimum(n1, m) * r1 + np.minimum(n2, np.maximum(m - n1, 0.0)) * r2
    ratio = np.where(opt > 0, rew / np.where(opt > 0, opt, 1.0), 1.0)
    return float(np.sum(w * ratio))


def alg3_exact_cr(inst: ProblemInstance, h_max: int, ell_max: int) -> CrReport:
    ratios = np.array([[alg3_expected_ratio(h, ell, inst) for ell in range(ell_max + 1)]
                       for h in range(h_max + 1)])
    return report_from_ratios(ratios)


def _mc(values: np.ndarray) -> McEstimate:
    n = len(values)
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return McEstimate(float(np.mean(values)), se, n)


def _first_ones(count: np.ndarray, amount: np.ndarray, r: float,
                rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Realized reward of the first ``amount`` agents (last one possibly partial)
    and the number of reward-one agents among all ``count`` of them."""
    whole = np.floor(amount + 1e-12).astype(np.int64)
    part = amount - whole
    has_part = part > 1e-12
    got_whole = rng.binomial(whole, r)
    partial_one = (rng.random(len(amount)) < r) & has_part
    rest = count - whole - has_part
    ones = got_whole + partial_one + rng.binomial(np.maximum(rest, 0), r)
    return got_whole + part * partial_one, ones


def realized_cr_estimate(inst: ProblemInstance, h: int, ell: int, trials: int,
                         rng: np.random.Generator) -> McEstimate:
    """Algorithm 1's realized reward over the best hindsight allocation of
    reward-one agents, on the worst order, averaged over trials.

    Only successes are drawn for the test sample; the decision depends on
    the sample through its size and success count alone.
    """
    if trials < 1:
        raise ModelError("trials must be at least 1")
    m, p, r1, r2 = inst.m, inst.p, inst.r1, inst.r2
    f = (1 - p) / p
    s1 = rng.binomial(h, p, trials)
    s2 = rng.binomial(ell, p, trials)
    k1 = rng.binomial(s1, r1)
    k2 = rng.binomial(s2, r2)
    u = rng.random((trials, 2))
    est1 = np.where(s1 > 0, k1 / np.maximum(s1, 1), u[:, 0])
    est2 = np.where(s2 > 0, k2 / np.maximum(s2, 1), u[:, 1])
    good = est1 > est2
    n1 = (h - s1).astype(float)
    n2 = (ell - s2).astype(float)
    x1 = np.minimum(m, f * s1)
    x2 = np.minimum(m, f * s2)
    a2 = np.where(good, np.minimum(n2, m - x1), np.minimum(n2, m))
    a1 = np.where(good, np.minimum(n1, m - a2),
                  np.maximum(np.minimum(np.minimum(n1, m - a2), m - x2), 0.0))
    got2, ones2 = _first_ones(n2.astype(np.int64), a2, r2, rng)
    got1, ones1 = _first_ones(n1.astype(np.int64), a1, r1, rng)
    denom = np.minimum(m, ones1 + ones2)
    ratio = np.where(denom > 0, (got1 + got2) / np.where(denom > 0, denom, 1.0), 1.0)
    return _mc(ratio)


ALGORITHMS = ("alg1", "adaptive", "alg3", "benchmark")


def _trial_ratio(algorithm: str, inst: ProblemInstance, seq: ArrivalSequence, sample,
                 rng: np.random.Generator) -> float:
    opt = opt_expected(seq.n, inst)
    if opt <= 0:
        return 1.0
    if algorithm == "alg1":
        rew = execute_two_type(alg1_decide(sample, inst, rng), seq, inst).expected_reward
    elif algorithm == "adaptive":
        decision = alg1_decide(sample, inst, rng)
        rew = run_adaptive_policy(seq, sample, decision.estimates, inst, rng)[0].expected_reward
    elif algorithm == "alg3":
        rew = sum(b.expected_reward for b in alg3_branches(seq, inst)) / 2
    else:
        rew = no_sample_benchmark_run(seq, inst, optimal_benchmark_level(inst), rng).expected_reward
    return rew / opt


def distinct_orders(n: tuple[int, ...]) -> list[ArrivalSequence]:
    """Every distinct arrangement of a two-type multiset."""
    total = n[0] + n[1]
    out = []
    for ones in itertools.combinations(range(total), n[0]):
        types = [2] * total
        for i in ones:
            types[i] = 1
        out.append(ArrivalSequence(tuple(types)))
    return out


def mc_cr_random_order(inst: ProblemInstance, h: int, ell: int, trials: int,
                       rng: np.random.Generator, algorithm: str = "alg1", *,
                       exhaustive: bool = False) -> McEstimate:
    """Average ratio under uniformly random arrival orders.

    With ``exhaustive`` each trial averages over every distinct order of its
    residual market instead of drawing one.
    """
    if trials < 1:
        raise ModelError("trials must be at least 1")
    if algorithm not in ALGORITHMS:
        raise ModelError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")
    size = MarketSize.of(h, ell)
    vals = np.empty(trials)
    for i in range(trials):
        sample, residual = sample_market(size, inst, rng)
        if exhaustive:
            state = rng.bit_generator.state
            ratios = []
            for seq in distinct_orders(residual):
                rng.bit_generator.state = state
                ratios.append(_trial_ratio(algorithm, inst, seq, sample, rng))
            vals[i] = float(np.mean(ratios))
        else:
            seq = random_sequence(residual, rng)
            vals[i] = _trial_ratio(algorithm, inst, seq, sample, rng)
    return _mc(vals)


def ordered_alg1_reward(n1: float, n2: float, protected: int, level: float,
                        inst: ProblemInstance) -> float:
    a1, a2 = ordered_protection_accepted(n1, n2, protected, level, inst.m)
    return a1 * inst.r1 + a2 * inst.r2
