"""One test per acceptance criterion; each records a PASS/FAIL line."""

import itertools
import math
import time
import warnings

import numpy as np
import pytest

from samplealloc import algorithms as al
from samplealloc import bounds as bd
from samplealloc import cr_engine as ce
from samplealloc import experiments as ex
from samplealloc import upper_lab as ul
from samplealloc.model import ArrivalSequence, ProblemInstance, SampleInfo, run_protection_policy
from oracles import joint_enumeration_ratio

pytestmark = pytest.mark.acceptance

SANDWICH_M = (10, 20, 35, 50, 100)
SANDWICH_P = (0.2, 0.3, 0.5)
SANDWICH_R = ((0.9, 0.5), (0.9, 0.7))


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


def test_c01_lower_bound_below_exact(report):
    start = time.time()
    worst = None
    for (r1, r2), m, p in itertools.product(SANDWICH_R, SANDWICH_M, SANDWICH_P):
        cr = ce.exact_cr(ProblemInstance.two_type(m, p, r1, r2)).infimum
        lb = bd.theorem2_bound(m, p, r1, r2).overall
        slack = cr - lb
        if worst is None or slack < worst[0]:
            worst = (slack, m, p, r2, lb, cr)
    secs = time.time() - start
    slack, m, p, r2, lb, cr = worst
    report(1, slack >= -1e-9 and secs < 600,
           f"30 configs, tightest m={m} p={p} r2={r2}: bound {lb:.4f} <= exact {cr:.4f}; {secs:.0f}s")


def test_c02_oracle_equivalence(report):
    start = time.time()
    err = 0.0
    for m, p in itertools.product((2, 3, 4), (0.3, 0.5)):
        inst = ProblemInstance.two_type(m, p, 0.9, 0.5)
        grid = ce.ratio_grid(inst, 6, 6)
        for h, ell in itertools.product(range(7), range(7)):
            want = joint_enumeration_ratio(h, ell, m, p, 0.9, 0.5)
            err = max(err, abs(ce.expected_ratio(h, ell, inst) - want), abs(grid[h, ell] - want))
    secs = time.time() - start
    report(2, err <= 1e-10 and secs < 60, f"max |engine - enumeration| = {err:.2e}; {secs:.1f}s")


def test_c03_example_one_crossing(report):
    start = time.time()
    bench = 1 / (2 - 7 / 9)
    cr = {m: ce.exact_cr(ProblemInstance.two_type(m, 0.3, 0.9, 0.7)).infimum for m in (10, 35, 60)}
    secs = time.time() - start
    ok = cr[35] > bench and cr[60] > bench and cr[10] < cr[60] and secs < 300
    report(3, ok, f"benchmark {bench:.4f}; CR(10)={cr[10]:.4f} CR(35)={cr[35]:.4f} "
                  f"CR(60)={cr[60]:.4f}; {secs:.1f}s")


def _decisions():
    """Every decision reachable from small samples, for a few capacities and p."""
    for m, p in itertools.product((2, 3, 5), (0.3, 0.5)):
        inst = ProblemInstance.two_type(m, p, 0.9, 0.5)
        for s1, s2 in itertools.product(range(4), range(1, 4)):
            for k1, k2 in itertools.product(range(s1 + 1), range(s2 + 1)):
                rho = ((1,) * k1 + (0,) * (s1 - k1), (1,) * k2 + (0,) * (s2 - k2))
                sample = SampleInfo((s1, s2), rho)
                est = al.EstimatedRewards((k1 / s1 if s1 else 0.5, k2 / s2), ("", ""))
                yield inst, al.alg1_decide(sample, inst, None, estimates=est)


def test_c04_worst_order_dominance(report):
    start = time.time()
    decisions = {(inst, d.protected, d.level) for inst, d in _decisions()}
    checked = 0
    violations = 0
    for n1 in range(9):
        for n2 in range(9 - n1):
            orders = ce.distinct_orders((n1, n2))
            worst = ArrivalSequence((2,) * n2 + (1,) * n1)
            for inst, prot, x in decisions:
                base = run_protection_policy(worst, prot, x, inst).expected_reward
                for seq in orders:
                    checked += 1
                    if run_protection_policy(seq, prot, x, inst).expected_reward < base - 1e-12:
                        violations += 1
    secs = time.time() - start
    report(4, violations == 0 and secs < 60,
           f"{checked} (order, decision) pairs, {violations} below the ordered sequence; {secs:.1f}s")


def test_c05_alg3_half(report):
    worst = 1.0
    for m in (5, 20):
        for r2 in (0.5, 0.01):
            rep = ce.alg3_exact_cr(ProblemInstance.two_type(m, 0.3, 0.9, r2), 3 * m, 3 * m)
            worst = min(worst, rep.infimum)
    tight = ce.alg3_expected_ratio(40, 40, ProblemInstance.two_type(20, 0.3, 0.9, 0.01))
    report(5, worst >= 0.5 - 1e-12 and tight <= 0.51,
           f"min exact CR {worst:.6f} >= 0.5; r2=0.01, h=l=2m ratio {tight:.4f} <= 0.51")


def test_c06_specific_mapping_sandwich(report):
    start = time.time()
    lows, ups, binom = [], [], []
    for m, p in itertools.product((64, 256, 1024), (0.3, 0.5)):
        lower, upper = ul.specific_z_bounds(m, p, 0.9, 0.5)
        by_r1, by_r2 = ul.surrogate_losses(m, p, 0.9, 0.5)
        ups.append(by_r2 <= upper + 1e-9)
        lows.append((by_r1 >= lower - 1e-9, m, p, by_r1, lower))
        binom.append(by_r1 >= ul.specific_z_bounds(m, p, 0.9, 0.5, deviation_scale="binomial")[0] - 1e-9)
    secs = time.time() - start
    bad = [f"m={m},p={p}: {v:.4f}<{lo:.4f}" for ok, m, p, v, lo in lows if not ok]
    report(6, all(ups) and not bad and secs < 120,
           f"upper half holds at {sum(ups)}/6 points; lower half fails at {len(bad)}/6 "
           f"({'; '.join(bad[:2])}{'; ...' if len(bad) > 2 else ''}); "
           f"binomial-scale lower bound holds at {sum(binom)}/6; {secs:.1f}s")


def test_c07_realized_ceiling(report):
    m, p = 20, 0.3
    inst = ProblemInstance.two_type(m, p, 0.9, 0.5)
    est = ce.realized_cr_estimate(inst, 0, math.ceil(100 * m / p), 100_000, np.random.default_rng(2024))
    report(7, abs(est.mean - 0.5) <= 0.02, f"estimate {est.mean:.4f} (se {est.stderr:.4f}) vs 0.5")


def test_c08_robustness(report):
    rep = ex.robustness_ratio(0.3, 0.1, 30, 0.9, 0.5)
    report(8, rep.sup <= 0.08, f"sup robustness ratio {rep.sup:.4f} <= 0.08 (truthful CR {rep.truthful_cr:.4f})")


def test_c09_case_study_ordering(report):
    start = time.time()
    fails, gaps, margins = [], [], []
    for name, p, gamma in itertools.product(ex.FIXTURES, (0.1, 0.2), (0.3, 0.7)):
        rep = ex.case_study_run(ex.load_fixture(name), ex.CaseStudyConfig(p, gamma, trials=200))
        a1 = rep.summary("alg1").avg_cr
        bm = rep.summary("benchmark").avg_cr
        ad = rep.summary("adaptive").avg_cr
        gaps.append(abs(ad - a1))
        margins.append(a1 - bm)
        if not (a1 > bm and abs(ad - a1) <= 0.02):
            fails.append(f"{name} p={p} gamma={gamma}")
    secs = time.time() - start
    report(9, not fails and secs < 300,
           f"8 classes; min(alg1 - benchmark) {min(margins):.4f}, max |adaptive - alg1| "
           f"{max(gaps):.4f}; failing: {fails or 'none'}; {secs:.0f}s")


def test_c10_constant_searches(report):
    rel = 0.0
    defining = True
    for m, p in itertools.product(SANDWICH_M, SANDWICH_P):
        h0 = bd.type1_market_threshold(m, p)
        rel = max(rel, abs(h0 - bd.type1_market_threshold_closed(m, p)) / h0)
        ell0 = bd.type2_market_threshold(m, p)
        pred = bd.type2_market_threshold_predicate(m, p)
        defining &= pred(ell0) and not pred(ell0 - 1)
        for r1, r2 in SANDWICH_R:
            m1 = bd.large_market_threshold(p, r1, r2)
            q = bd.large_market_predicate(p, r1, r2)
            defining &= q(m1) and not q(m1 * (1 - 1e-6))
    report(10, rel <= 1e-6 and defining,
           f"h0 max relative gap {rel:.1e}; l0 and m1 searches minimal: {defining}")


def test_c11_rate(report):
    start = time.time()
    ms = np.array([25, 100, 400])
    gaps = np.array([1 - ce.exact_cr(ProblemInstance.two_type(m, 0.5, 0.9, 0.5)).infimum for m in ms])
    slope = float(np.polyfit(np.log(ms), np.log(gaps), 1)[0])
    secs = time.time() - start
    report(11, -0.75 <= slope <= -0.25,
           f"1-CR = {', '.join(f'{g:.4f}' for g in gaps)}; fitted slope {slope:.3f}; {secs:.0f}s")
