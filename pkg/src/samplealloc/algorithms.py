"""Decision rules that turn test-period samples into protection policies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence, Union

import numpy as np

from . import _kernels
from .model import (
    AllocationOutcome,
    ArrivalSequence,
    MarketSize,
    ModelError,
    ProblemInstance,
    SampleInfo,
    ordered_sequence,
    random_sequence,
    run_nested_policy,
    run_protection_policy,
    sample_market,
)

# How the residual market is turned into an arrival sequence: "ordered",
# "random", or a callable (counts, rng) -> ArrivalSequence.
Arrival = Union[str, Callable[[Sequence[int], np.random.Generator], ArrivalSequence]]


@dataclass(frozen=True)
class EstimatedRewards:
    r_hat: tuple[float, ...]
    source: tuple[str, ...]


@dataclass(frozen=True)
class PolicyDecision:
    """Ranking of types (best first) and cumulative protection levels.

    ``levels[i]`` reserves capacity for the top i+1 ranked types.  For two
    types only ``levels[0]`` drives the policy.
    """

    order: tuple[int, ...]
    levels: tuple[float, ...]
    estimates: EstimatedRewards | None = field(default=None, compare=False)

    @property
    def protected(self) -> int:
        return self.order[0]

    @property
    def level(self) -> float:
        return self.levels[0]

    def nested_thresholds(self) -> tuple[float, ...]:
        """Per-rank reservations as consumed by ``run_nested_policy``."""
        return (0.0,) + self.levels[:-1]


@dataclass(frozen=True)
class CappedTestConfig:
    m_t: float

    def __post_init__(self):
        if not self.m_t > 0:
            raise ModelError(f"test-period cap must be positive, got {self.m_t}")


class RunResult(NamedTuple):
    outcome: AllocationOutcome
    decision: PolicyDecision
    sample: SampleInfo


class AdaptiveResult(NamedTuple):
    outcome: AllocationOutcome
    decision: PolicyDecision
    sample: SampleInfo
    switches: int


@dataclass(frozen=True)
class RandomizedOutcome:
    """A policy that picks one of several branches uniformly at random."""

    branches: tuple[AllocationOutcome, ...]
    chosen: int

    @property
    def expected_reward(self) -> float:
        return sum(b.expected_reward for b in self.branches) / len(self.branches)

    @property
    def accepted(self) -> tuple[float, ...]:
        k = len(self.branches[0].accepted)
        return tuple(sum(b.accepted[i] for b in self.branches) / len(self.branches)
                     for i in range(k))

    @property
    def realized(self) -> AllocationOutcome:
        return self.branches[self.chosen]


def protection_factor(p: float) -> float:
    """Expected online arrivals per sampled agent."""
    return (1.0 - p) / p


def make_sequence(n: Sequence[int], arrival: Arrival, rng: np.random.Generator) -> ArrivalSequence:
    if arrival == "ordered":
        return ordered_sequence(n)
    if arrival == "random":
        return random_sequence(n, rng)
    if callable(arrival):
        return arrival(n, rng)
    raise ModelError(f"unknown arrival mode {arrival!r}")


def estimate_rewards(sample: SampleInfo, rng: np.random.Generator) -> EstimatedRewards:
    """Sample means, with a uniform draw standing in for unsampled types."""
    r_hat = []
    source = []
    for si, rho in zip(sample.s, sample.rho):
        if si > 0:
            r_hat.append(sum(rho) / si)
            source.append("sample-mean")
        else:
            r_hat.append(float(rng.random()))
            source.append("uniform-draw")
    return EstimatedRewards(tuple(r_hat), tuple(source))


def _cumulative_levels(order: Sequence[int], sample: SampleInfo, m: float,
                       factors: Sequence[float]) -> tuple[float, ...]:
    levels = []
    reserve = 0.0
    for t in order:
        reserve += factors[t - 1] * sample.s[t - 1]
        levels.append(min(m, reserve))
    return tuple(levels)


def alg1_decide(sample: SampleInfo, inst: ProblemInstance, rng: np.random.Generator,
                *, p_hat: float | None = None,
                estimates: EstimatedRewards | None = None) -> PolicyDecision:
    """Protect the type whose estimate is strictly higher; ties protect type 2.

    ``p_hat`` replaces the true sampling probability when setting levels.
    """
    est = estimates if estimates is not None else estimate_rewards(sample, rng)
    order = (1, 2) if est.r_hat[0] > est.r_hat[1] else (2, 1)
    f = protection_factor(inst.p if p_hat is None else p_hat)
    return PolicyDecision(order, _cumulative_levels(order, sample, inst.m, (f, f)), est)


def hetero_decide(sample: SampleInfo, inst: ProblemInstance, p_vec: Sequence[float],
                  rng: np.random.Generator, *,
                  estimates: EstimatedRewards | None = None) -> PolicyDecision:
    """Algorithm 1 when each type answers the outreach with its own probability."""
    for pi in p_vec:
        if not 0.0 < pi < 1.0:
            raise ModelError(f"per-type sampling probabilities must lie in (0,1), got {pi}")
    est = estimates if estimates is not None else estimate_rewards(sample, rng)
    order = (1, 2) if est.r_hat[0] > est.r_hat[1] else (2, 1)
    factors = [protection_factor(pi) for pi in p_vec]
    return PolicyDecision(order, _cumulative_levels(order, sample, inst.m, factors), est)


def execute_two_type(decision: PolicyDecision, seq: ArrivalSequence,
                     inst: ProblemInstance) -> AllocationOutcome:
    return run_protection_policy(seq, decision.protected, decision.level, inst)


def alg1_run(size: MarketSize, inst: ProblemInstance, rng: np.random.Generator, *,
             arrival: Arrival = "ordered", p_hat: float | None = None) -> RunResult:
    """Sample, estimate, decide, then run on the residual arrivals.

    Sampled agents are served during the test period outside the budget m; the
    returned outcome covers the allocation period only.
    """
    sample, residual = sample_market(size, inst, rng)
    decision = alg1_decide(sample, inst, rng, p_hat=p_hat)
    seq = make_sequence(residual, arrival, rng)
    return RunResult(execute_two_type(decision, seq, inst), decision, sample)


def algk_decide(sample: SampleInfo, inst: ProblemInstance, rng: np.random.Generator, *,
                estimates: EstimatedRewards | None = None,
                tie_break: str = "lower_index") -> PolicyDecision:
    """Rank types by estimate and reserve capacity for every prefix of the ranking.

    Equal estimates rank the lower type index first by default;
    ``tie_break="higher_index"`` reproduces the two-type rule of ``alg1_decide``.
    """
    est = estimates if estimates is not None else estimate_rewards(sample, rng)
    if tie_break == "lower_index":
        key = lambda t: (-est.r_hat[t - 1], t)
    elif tie_break == "higher_index":
        key = lambda t: (-est.r_hat[t - 1], -t)
    else:
        raise ModelError(f"unknown tie_break {tie_break!r}")
    order = tuple(sorted(range(1, inst.k + 1), key=key))
    f = protection_factor(inst.p)
    return PolicyDecision(order, _cumulative_levels(order, sample, inst.m, [f] * inst.k), est)


def algk_run(size: MarketSize, inst: ProblemInstance, rng: np.random.Generator, *,
             arrival: Arrival = "ordered", estimates: EstimatedRewards | None = None,
             tie_break: str = "lower_index") -> RunResult:
    if inst.k < 2:
        raise ModelError("need at least two types")
    sample, residual = sample_market(size, inst, rng)
    decision = algk_decide(sample, inst, rng, estimates=estimates, tie_break=tie_break)
    seq = make_sequence(residual, arrival, rng)
    outcome = run_nested_policy(seq, decision.order, decision.nested_thresholds(), inst)
    return RunResult(outcome, decision, sample)


def alg3_branches(seq: ArrivalSequence, inst: ProblemInstance) -> tuple[AllocationOutcome, AllocationOutcome]:
    """The two deterministic halves: serve only type 1, or only type 2."""
    return (run_protection_policy(seq, 1, inst.m, inst),
            run_protection_policy(seq, 2, inst.m, inst))


def alg3_run(seq: ArrivalSequence, inst: ProblemInstance, rng: np.random.Generator) -> RandomizedOutcome:
    return RandomizedOutcome(alg3_branches(seq, inst), int(rng.random() >= 0.5))


def alg3_expected_reward(n: Sequence[float], inst: ProblemInstance) -> float:
    return 0.5 * min(n[0], inst.m) * inst.r1 + 0.5 * min(n[1], inst.m) * inst.r2


def optimal_benchmark_level(inst: ProblemInstance) -> float:
    """Best single protection level when the ranking is a coin flip."""
    a = inst.alpha
    return (2.0 - 2.0 * a) / (2.0 - a) * inst.m


def no_sample_benchmark_run(seq: ArrivalSequence, inst: ProblemInstance, x: float,
                            rng: np.random.Generator) -> RandomizedOutcome:
    """Ignore the sample: protect a uniformly chosen type at level ``x``."""
    branches = (run_protection_policy(seq, 1, x, inst), run_protection_policy(seq, 2, x, inst))
    return RandomizedOutcome(branches, int(rng.random() >= 0.5))


def run_adaptive_policy(seq: ArrivalSequence, sample: SampleInfo, estimates: EstimatedRewards,
                        inst: ProblemInstance, rng: np.random.Generator, *,
                        p_hat: float | None = None,
                        realized: Callable[[int], int] | None = None) -> tuple[AllocationOutcome, int]:
    """Re-rank the two types after every acceptance.

    Each accepted agent reveals a 0/1 reward that joins the test-period
    observations of its type.  Rewards are drawn up front, one per arrival
    (``realized(t)`` is called once per arrival in order when given).
    Returns the outcome and the number of times the protected type changed.
    """
    f = protection_factor(inst.p if p_hat is None else p_hat)
    types = np.asarray(seq.types, dtype=np.int64)
    if realized is not None:
        obs = np.array([realized(int(t)) for t in types], dtype=float)
    else:
        u = rng.random(types.size)
        obs = (u < np.asarray([inst.r1, inst.r2])[types - 1]).astype(float) if types.size else u
    wins = np.array([sample.successes(1), sample.successes(2)], dtype=float)
    seen = np.array(sample.s[:2], dtype=float)
    a1, a2, switches = _kernels.adaptive_run(types, obs, float(inst.m), f,
                                             np.array(sample.s[:2], dtype=float), wins, seen,
                                             np.array(estimates.r_hat[:2], dtype=float))
    return AllocationOutcome.from_accepted([a1, a2], inst), int(switches)


def adaptive_alg1_run(size: MarketSize, inst: ProblemInstance, rng: np.random.Generator, *,
                      arrival: Arrival = "ordered", p_hat: float | None = None,
                      realized: Callable[[int], int] | None = None) -> AdaptiveResult:
    sample, residual = sample_market(size, inst, rng)
    decision = alg1_decide(sample, inst, rng, p_hat=p_hat)
    seq = make_sequence(residual, arrival, rng)
    outcome, switches = run_adaptive_policy(seq, sample, decision.estimates, inst, rng,
                                            p_hat=p_hat, realized=realized)
    return AdaptiveResult(outcome, decision, sample, switches)


def capped_accept_counts(s: Sequence[int], m_t: float) -> tuple[int, int]:
    """How many sampled agents of each type the capped test period can serve."""
    s1, s2 = int(s[0]), int(s[1])
    if s1 + s2 <= m_t:
        return s1, s2
    half = math.floor(m_t / 2)
    if s1 > m_t / 2 and s2 > m_t / 2:
        return half, half
    cap = math.floor(m_t)
    if s1 <= s2:
        return s1, cap - s1
    return cap - s2, s2


def capped_test_sample(size: MarketSize, inst: ProblemInstance, cfg: CappedTestConfig,
                       rng: np.random.Generator, *, rejoin: bool = True) -> tuple[SampleInfo, tuple[int, ...]]:
    """Test period with at most ``m_t`` units.

    Only served agents reveal a reward.  With ``rejoin`` the sampled agents
    that were turned away arrive again online.
    """
    drawn, outcomes = [], []
    for c, r in zip(size.counts[:2], inst.rewards):
        d = int(rng.binomial(c, inst.p)) if c else 0
        drawn.append(d)
        outcomes.append(rng.random(d) < r)
    served = capped_accept_counts(drawn, cfg.m_t)
    # same draw order as an uncapped sample; only served agents keep a reward
    rho = tuple(tuple(int(v) for v in o[:a]) for o, a in zip(outcomes, served))
    taken = served if rejoin else drawn
    residual = tuple(c - a for c, a in zip(size.counts, taken))
    return SampleInfo(served, rho), residual


def capped_alg1_run(size: MarketSize, inst: ProblemInstance, cfg: CappedTestConfig,
                    rng: np.random.Generator, *, arrival: Arrival = "ordered",
                    rejoin: bool = True) -> RunResult:
    sample, residual = capped_test_sample(size, inst, cfg, rng, rejoin=rejoin)
    decision = alg1_decide(sample, inst, rng)
    seq = make_sequence(residual, arrival, rng)
    return RunResult(execute_two_type(decision, seq, inst), decision, sample)
