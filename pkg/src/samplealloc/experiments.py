"""Experiment pipelines: parameter sweeps, the hospital-admission case study,
misestimated sampling probability, and the three-type study.

Randomness comes from one master seed.  Each unit of work (sweep point,
period, trial) draws from ``stream(seed, *key)``, a SeedSequence child keyed
by its integer coordinates, so results do not depend on evaluation order.
"""

from __future__ import annotations

import csv
import itertools
import math
import warnings
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from . import cr_engine
from .algorithms import (
    alg1_decide,
    algk_decide,
    estimate_rewards,
    execute_two_type,
    optimal_benchmark_level,
    run_adaptive_policy,
)
from .bounds import benchmark_bound, theorem2_bound
from .model import (
    ArrivalSequence,
    MarketSize,
    ModelError,
    ProblemInstance,
    opt_expected,
    ordered_sequence,
    random_sequence,
    run_nested_policy,
    run_protection_policy,
    sample_market,
)

CASE_STUDY_HEADER = ("period", "type1_count", "type2_count")
CASE_STUDY_ALGORITHMS = ("alg1", "benchmark", "adaptive", "alg1_noisy")


class IngestError(ValueError):
    """Malformed case-study input."""


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


# ---------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class SweepConfig:
    m_values: tuple[float, ...]
    p_values: tuple[float, ...]
    r1: float = 0.9
    r2_range: tuple[float, float] = (0.5, 0.9)
    instances: int = 5
    grid_bound: int | None = None
    seed: int = 2024
    r2_fixed: float | None = None

    def __post_init__(self):
        if not self.m_values or not self.p_values:
            raise ModelError("sweep needs at least one m and one p")
        if self.instances < 1:
            raise ModelError("instances must be at least 1")


@dataclass(frozen=True)
class SweepRow:
    m: float
    p: float
    mean_cr: float
    mean_bound: float
    mean_benchmark: float
    instances: int


SWEEP_COLUMNS = ("m", "p", "mean_cr", "mean_bound", "mean_benchmark", "instances")


def sweep_example1(cfg: SweepConfig) -> list[SweepRow]:
    """Exact ratio, proven lower bound and no-sample benchmark, averaged over
    random type-2 rewards at each (m, p)."""
    rows = []
    points = list(itertools.product(cfg.m_values, cfg.p_values))
    for idx, (m, p) in enumerate(points):
        rng = stream(cfg.seed, idx)
        crs, lbs, bms = [], [], []
        for _ in range(cfg.instances):
            r2 = cfg.r2_fixed if cfg.r2_fixed is not None else float(rng.uniform(*cfg.r2_range))
            inst = ProblemInstance.two_type(m, p, cfg.r1, r2)
            crs.append(cr_engine.exact_cr(inst, cfg.grid_bound, cfg.grid_bound).infimum)
            lbs.append(theorem2_bound(m, p, cfg.r1, r2).overall)
            bms.append(benchmark_bound((cfg.r1, r2)))
        rows.append(SweepRow(m, p, float(np.mean(crs)), float(np.mean(lbs)),
                             float(np.mean(bms)), cfg.instances))
    return rows


# ------------------------------------------------------------ case study

@dataclass(frozen=True)
class PeriodRecord:
    period_id: int
    counts: tuple[int, ...]


@dataclass(frozen=True)
class CaseStudyConfig:
    p: float
    gamma: float
    trials: int = 200
    rewards: tuple[float, float] = (0.6, 0.2)
    noise: float = 0.3
    seed: int = 2024

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ModelError(f"gamma must lie in (0,1), got {self.gamma}")
        if self.trials < 1:
            raise ModelError("trials must be at least 1")
        if not 0 < self.p < 1:
            raise ModelError(f"p must lie in (0,1), got {self.p}")


@dataclass(frozen=True)
class AlgorithmSummary:
    name: str
    period_cr: tuple[float, ...]

    @property
    def avg_cr(self) -> float:
        return float(np.mean(self.period_cr))

    @property
    def worst_cr(self) -> float:
        return float(np.min(self.period_cr))


@dataclass(frozen=True)
class CaseStudyReport:
    config: CaseStudyConfig
    periods: tuple[int, ...]
    capacities: tuple[float, ...]
    summaries: tuple[AlgorithmSummary, ...]

    def summary(self, name: str) -> AlgorithmSummary:
        for s in self.summaries:
            if s.name == name:
                return s
        raise KeyError(name)


def parse_periods(lines: Sequence[str], source: str = "<input>") -> list[PeriodRecord]:
    reader = csv.reader(lines)
    records: list[PeriodRecord] = []
    header = None
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        cells = [c.strip() for c in row]
        if header is None:
            if tuple(cells) != CASE_STUDY_HEADER:
                raise IngestError(f"{source}:{lineno}: expected header "
                                  f"{','.join(CASE_STUDY_HEADER)}, got {','.join(cells)}")
            header = cells
            continue
        if len(cells) != len(CASE_STUDY_HEADER):
            raise IngestError(f"{source}:{lineno}: expected 3 fields, got {len(cells)}")
        try:
            pid, c1, c2 = (int(c) for c in cells)
        except ValueError:
            raise IngestError(f"{source}:{lineno}: fields must be integers") from None
        if c1 < 0 or c2 < 0:
            raise IngestError(f"{source}:{lineno}: counts must be nonnegative")
        if records and pid <= records[-1].period_id:
            raise IngestError(f"{source}:{lineno}: period ids must increase strictly")
        records.append(PeriodRecord(pid, (c1, c2)))
    if header is None:
        raise IngestError(f"{source}: empty file")
    return records


def load_periods(path: str | Path) -> list[PeriodRecord]:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_periods(fh.read().splitlines(), str(path))


FIXTURES = ("constant_demand", "ramp_demand")


def load_fixture(name: str) -> list[PeriodRecord]:
    if name not in FIXTURES:
        raise ModelError(f"unknown fixture {name!r}; choose from {FIXTURES}")
    text = resources.files("samplealloc").joinpath("data", f"{name}.csv").read_text("utf-8")
    return parse_periods(text.splitlines(), name)


def noisy_p_draw(p: float, rng: np.random.Generator, noise: float = 0.3) -> float:
    """Uniform p-hat with mean p and standard deviation noise*p."""
    if not 0 < p < 1:
        raise ModelError(f"p must lie in (0,1), got {p}")
    half = noise * p * math.sqrt(3)
    val = float(rng.uniform(p - half, p + half))
    eps = 1e-9
    if not eps <= val <= 1 - eps:
        warnings.warn(f"p-hat {val} clamped into (0,1)", RuntimeWarning, stacklevel=2)
        val = min(max(val, eps), 1 - eps)
    return val


def _case_trial(inst: ProblemInstance, size: MarketSize, cfg: CaseStudyConfig,
                rng: np.random.Generator) -> tuple[float, ...]:
    sample, residual = sample_market(size, inst, rng)
    seq = random_sequence(residual, rng)
    opt = opt_expected(seq.n, inst)
    est = estimate_rewards(sample, rng)
    p_hat = noisy_p_draw(inst.p, rng, cfg.noise)
    if opt <= 0:
        return (1.0,) * len(CASE_STUDY_ALGORITHMS)
    decision = alg1_decide(sample, inst, rng, estimates=est)
    alg1 = execute_two_type(decision, seq, inst).expected_reward
    x = optimal_benchmark_level(inst)
    # each instance realizes the benchmark's coin
    bench = run_protection_policy(seq, 1 if rng.random() < 0.5 else 2, x, inst).expected_reward
    noisy = execute_two_type(alg1_decide(sample, inst, rng, p_hat=p_hat, estimates=est),
                             seq, inst).expected_reward
    adaptive = run_adaptive_policy(seq, sample, est, inst, rng)[0].expected_reward
    return tuple(v / opt for v in (alg1, bench, adaptive, noisy))


def case_study_run(records: Sequence[PeriodRecord], cfg: CaseStudyConfig) -> CaseStudyReport:
    """Per period after the first, capacity is gamma times the previous
    period's demand; each period's ratio is the worst over its trials."""
    if len(records) < 2:
        raise ModelError("need at least two periods")
    per_alg: list[list[float]] = [[] for _ in CASE_STUDY_ALGORITHMS]
    periods, caps = [], []
    for idx in range(1, len(records)):
        prev, cur = records[idx - 1], records[idx]
        m = cfg.gamma * sum(prev.counts)
        inst = ProblemInstance.two_type(m, cfg.p, *cfg.rewards)
        size = MarketSize(cur.counts)
        worst = [1.0] * len(CASE_STUDY_ALGORITHMS)
        for trial in range(cfg.trials):
            ratios = _case_trial(inst, size, cfg, stream(cfg.seed, idx, trial))
            worst = [min(a, b) for a, b in zip(worst, ratios)]
        for lst, v in zip(per_alg, worst):
            lst.append(v)
        periods.append(cur.period_id)
        caps.append(m)
    summaries = tuple(AlgorithmSummary(name, tuple(v))
                      for name, v in zip(CASE_STUDY_ALGORITHMS, per_alg))
    return CaseStudyReport(cfg, tuple(periods), tuple(caps), summaries)


# ------------------------------------------------------------ robustness

@dataclass(frozen=True)
class RobustnessReport:
    p: float
    delta: float
    truthful_cr: float
    p_hats: tuple[float, ...]
    crs: tuple[float, ...]
    ratios: tuple[float, ...]

    @property
    def sup(self) -> float:
        return max(self.ratios)


def robustness_ratio(p: float, delta: float, m: float, r1: float, r2: float,
                     grid: int = 21, grid_bound: int | None = None) -> RobustnessReport:
    """Relative loss of the worst-case ratio when levels use a misestimated p."""
    if not 0 <= delta < 1:
        raise ModelError(f"delta must lie in [0,1), got {delta}")
    if grid < 2:
        raise ModelError("grid needs at least two points")
    inst = ProblemInstance.two_type(m, p, r1, r2)
    base = cr_engine.exact_cr(inst, grid_bound, grid_bound).infimum
    p_hats = np.linspace(p * (1 - delta), p * (1 + delta), grid)
    crs, ratios = [], []
    for ph in p_hats:
        if not 0 < ph < 1:
            raise ModelError(f"p-hat {ph} outside (0,1)")
        cr = base if ph == p else cr_engine.exact_cr(inst, grid_bound, grid_bound,
                                                     p_hat=float(ph)).infimum
        crs.append(cr)
        ratios.append((base - cr) / base)
    return RobustnessReport(p, delta, base, tuple(float(v) for v in p_hats),
                            tuple(crs), tuple(ratios))


# -------------------------------------------------------- k-type study

@dataclass(frozen=True)
class KTypeRow:
    m: float
    p: float
    cr: float
    worst_market: tuple[int, ...]
    worst_mode: str
    benchmark: float


KTYPE_COLUMNS = ("m", "p", "cr", "worst_market", "worst_mode", "benchmark")


def _ordered_nested(n: Sequence[int], order, thresholds, inst: ProblemInstance) -> float:
    """Nested policy on the worst order, processing each type's block at once."""
    rank = {t: i for i, t in enumerate(order)}
    by_rank = [0.0] * len(order)
    used = 0.0
    reward = 0.0
    for t in range(len(n), 0, -1):
        i = rank[t]
        take = max(0.0, min(n[t - 1], inst.m - used,
                            inst.m - thresholds[i] - sum(by_rank[i:])))
        by_rank[i] += take
        used += take
        reward += take * inst.reward(t)
    return reward


def ktype_market_ratio(inst: ProblemInstance, counts: tuple[int, ...], trials: int,
                       rng: np.random.Generator, mode: str) -> float:
    """Mean of reward/opt for Algorithm 2 over sampling draws."""
    size = MarketSize(counts)
    vals = []
    for _ in range(trials):
        sample, residual = sample_market(size, inst, rng)
        opt = opt_expected(residual, inst)
        decision = algk_decide(sample, inst, rng)
        if opt <= 0:
            vals.append(1.0)
            continue
        if mode == "ordered":
            rew = _ordered_nested(residual, decision.order, decision.nested_thresholds(), inst)
        else:
            seq = random_sequence(residual, rng)
            rew = run_nested_policy(seq, decision.order, decision.nested_thresholds(),
                                    inst).expected_reward
        vals.append(rew / opt)
    return float(np.mean(vals))


def example3_ktype(m_values: Sequence[float], p: float, rewards: Sequence[float],
                   trials: int, seed: int,
                   multipliers: Sequence[float] = (0.0, 0.5, 1.0, 2.0)) -> list[KTypeRow]:
    """Worst Monte Carlo ratio of Algorithm 2 over a grid of markets.

    Each type's market ranges over ``multipliers`` times m/(1-p).  Every market
    is evaluated under the worst order and under uniformly random orders.
    """
    rows = []
    k = len(rewards)
    for mi, m in enumerate(m_values):
        inst = ProblemInstance(m, p, tuple(rewards))
        sizes = sorted({int(round(c * m / (1 - p))) for c in multipliers})
        worst = (2.0, (), "")
        for ci, counts in enumerate(itertools.product(sizes, repeat=k)):
            if sum(counts) == 0:
                continue
            for di, mode in enumerate(("ordered", "random")):
                val = ktype_market_ratio(inst, counts, trials, stream(seed, mi, ci, di), mode)
                if val < worst[0]:
                    worst = (val, counts, mode)
        rows.append(KTypeRow(m, p, worst[0], worst[1], worst[2], benchmark_bound(rewards)))
    return rows


def as_records(rows) -> list[dict]:
    return [asdict(r) for r in rows]
