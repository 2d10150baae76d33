import math
import warnings

import pytest
from hypothesis import given, strategies as st

from samplealloc import bounds as bd
from samplealloc.model import ModelError


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


def test_beta():
    assert bd.beta(0.5) == pytest.approx(0.843)


@pytest.mark.parametrize("m,p", [(100, 0.3), (400, 0.5), (10, 0.2), (35, 0.5)])
def test_type1_threshold_matches_closed_form(m, p):
    h0 = bd.type1_market_threshold(m, p)
    closed = bd.type1_market_threshold_closed(m, p)
    assert h0 == pytest.approx(closed, rel=1e-6)
    pred = bd.type1_market_threshold_predicate(m, p)
    assert pred(h0) and not pred(h0 * (1 - 1e-6))


@given(st.floats(2, 5000), st.floats(0.05, 0.95))
def test_type2_threshold_is_smallest_integer(m, p):
    ell0 = bd.type2_market_threshold(m, p)
    pred = bd.type2_market_threshold_predicate(m, p)
    assert isinstance(ell0, int)
    assert pred(ell0) and not pred(ell0 - 1)
    assert ell0 == math.ceil(bd.type2_market_threshold_closed(m, p) - 1e-9)


def test_type2_printed_form_is_off():
    m, p = 100, 0.3
    pred = bd.type2_market_threshold_predicate(m, p)
    root = bd.type2_market_threshold_closed(m, p)
    assert (1 - p) * root - math.sqrt(root) == pytest.approx(m)
    printed = bd.type2_market_threshold_closed(m, p, as_printed=True)
    assert not math.isclose((1 - p) * printed - math.sqrt(printed), m, rel_tol=1e-6)
    assert pred(math.ceil(root))


@pytest.mark.parametrize("p,r1,r2", [(0.3, 0.9, 0.5), (0.5, 0.9, 0.7), (0.2, 0.8, 0.1)])
def test_large_market_threshold(p, r1, r2):
    m1 = bd.large_market_threshold(p, r1, r2)
    pred = bd.large_market_predicate(p, r1, r2)
    assert pred(m1) and not pred(m1 * (1 - 1e-6))
    assert m1 == pytest.approx(bd.large_market_threshold_exact(p, r1, r2), rel=1e-6)


def test_printed_large_market_form_warns():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        bd.constants(100, 0.3, 0.9, 0.5)
    assert any("large-market" in str(w.message) for w in caught)


def test_constants_monotone_in_m():
    prev = None
    m = 16
    while m <= 1024:
        c = bd.constants(m, 0.3, 0.9, 0.5)
        if prev:
            assert c.h0 >= prev.h0 and c.ell0 >= prev.ell0
        prev = c
        m *= 2


def test_w_band():
    w = bd.constants(10_000, 0.3, 0.9, 0.5).W
    assert 0.95 <= w < 1


def test_constants_fields():
    c = bd.constants(100, 0.3, 0.9, 0.5)
    assert set(c.as_dict()) == {"beta", "h0", "h1", "ell0", "ell1", "m1", "V", "W", "alpha",
                                "sqrt_m_threshold"}
    assert c.alpha == pytest.approx(5 / 9)


@pytest.mark.parametrize("args", [(100, 0.3, 0.5, 0.9), (100, 0.3, 0.5, 0.5), (1, 0.3, 0.9, 0.5),
                                  (100, 1.0, 0.9, 0.5)])
def test_bad_arguments(args):
    with pytest.raises(ModelError):
        bd.constants(*args)


class TestAlgOneLowerBound:
    def test_components_at_most_one(self):
        for m in (10, 100, 1000, 10_000):
            b = bd.theorem2_bound(m, 0.3, 0.9, 0.5)
            for v in (b.cr1, b.cr2, b.cr3_over, b.cr3_under):
                assert v <= 1
            third = b.cr3_over if b.regime == "m>=m1" else b.cr3_under
            assert b.overall == pytest.approx(max(0.0, min(b.cr1, b.cr2, third)))

    def test_regime_switch(self):
        m1 = bd.large_market_threshold(0.5, 0.9, 0.5)
        assert bd.theorem2_bound(m1 * 0.99, 0.5, 0.9, 0.5).regime == "m<m1"
        assert bd.theorem2_bound(m1 * 1.01, 0.5, 0.9, 0.5).regime == "m>=m1"

    def test_first_term_clamps(self):
        # p * sqrt(m) just under 1 - p
        b = bd.theorem2_bound(4, 0.3, 0.9, 0.5)
        assert b.cr1 == 0 and b.overall == 0

    def test_reward_gap_term_vanishes(self):
        b = bd.theorem2_bound(10_000, 0.5, 0.9, 0.9 - 1e-9)
        assert b.cr1 == pytest.approx(1 - 0.5 / (0.5 * 100))

    def test_degenerate_flag(self):
        b = bd.theorem2_bound(16, 0.3, 0.9, 0.5)
        assert b.degenerate and b.cr3_over == 0


class TestBenchmark:
    def test_two_types(self):
        assert bd.benchmark_bound((0.9, 0.5)) == pytest.approx(9 / 13)

    def test_three_types(self):
        assert bd.benchmark_bound((0.9, 0.7, 0.35)) == pytest.approx(1 / (3 - 7 / 9 - 0.5))

    def test_equal_limit(self):
        assert bd.benchmark_bound((0.9, 0.9 - 1e-12)) == pytest.approx(1)

    def test_needs_decreasing(self):
        with pytest.raises(ModelError):
            bd.benchmark_bound((0.5, 0.9))


class TestSmallP:
    def test_literal_h_tilde(self):
        assert bd.smallp_h_tilde(0.1) == 2
        assert all(bd.smallp_h_tilde(p) <= 2 for p in (0.001, 0.01, 0.3, 0.9))

    def test_theta_reading(self):
        assert bd.smallp_h_tilde(0.1, "theta") == 10
        assert bd.smallp_h_tilde(0.3, "theta") == 3

    def test_no_gap_limit(self):
        assert bd.smallp_upper_bound(50, 0.1, 1 - 1e-12) == pytest.approx(1 + 1 / 4)

    def test_theta_reading_approaches_benchmark(self):
        m = 1e6
        alpha = 5 / 9
        val = bd.smallp_upper_bound(m, 1 / m, alpha, "theta")
        assert val == pytest.approx(1 / (2 - alpha), abs=1e-3)

    def test_unknown_reading(self):
        with pytest.raises(ModelError):
            bd.smallp_h_tilde(0.1, "other")


class TestAsymptotic:
    def test_gap_halves(self):
        a = bd.asymptotic_forms(400, 0.5, (0.9, 0.5))
        b = bd.asymptotic_forms(1600, 0.5, (0.9, 0.5))
        assert 1 - b.sampling_rate == pytest.approx((1 - a.sampling_rate) / 2)

    def test_hetero_collapses(self):
        m, p = 100, 0.3
        f = bd.asymptotic_forms(m, p, (0.9, 0.5), (p, p))
        assert 1 - f.heterogeneous == pytest.approx(max(1 / (p * 10), 1 / (p * p * m)))

    def test_realized_ceiling(self):
        assert bd.asymptotic_forms(100, 0.3, (0.9, 0.5)).realized_ceiling == 0.5
