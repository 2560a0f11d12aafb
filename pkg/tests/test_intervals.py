import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ndtr

from helpers import (
    convexity_samples,
    dense_min,
    improvement_cases,
    oracle_coverage,
    random_mixtures,
    second_derivative_factor,
    second_difference,
)
from minimax_ci.intervals import (
    AT_INFINITY,
    EMPTY,
    LAMBDA_EPS,
    IntervalRule,
    InvalidRuleError,
    MixtureRule,
    coverage,
    coverage_dlambda,
    coverage_limit,
    coverage_mixture,
    expected_length,
    inflection_points,
    min_coverage,
)

endpoint = st.floats(-50, 50).filter(lambda c: abs(c) > 1e-3 or c == 0.0)
lam_st = st.floats(-100, 100)


@st.composite
def rules(draw):
    c1 = draw(endpoint)
    c2 = draw(endpoint.filter(lambda c: c > c1))
    return IntervalRule(c1, c2)


# --- data model -----------------------------------------------------------------

def test_rule_invariants():
    assert IntervalRule(0.0, 0.0).is_empty
    assert IntervalRule(0.0, 0.0) == EMPTY
    with pytest.raises(InvalidRuleError):
        IntervalRule(1.0, 1.0)
    with pytest.raises(InvalidRuleError):
        IntervalRule(2.0, 1.0)
    with pytest.raises(InvalidRuleError):
        IntervalRule(-math.inf, 1.0)


def test_mixture_invariants():
    with pytest.raises(InvalidRuleError):
        MixtureRule.of(((0, 1), 0.5), (None, 0.4))
    with pytest.raises(InvalidRuleError):
        MixtureRule.of(((0, 1), 1.0), (None, 0.0))
    with pytest.raises(InvalidRuleError):
        MixtureRule.of(*[((0, 1), 1 / 9)] * 9)
    assert len(MixtureRule.of(*[((0, 1), 1 / 8)] * 8)) == 8


# --- coverage -----------------------------------------------------------------

def test_coverage_examples():
    assert coverage(0.7, (0, 1)) == pytest.approx(0.5, abs=1e-15)
    assert coverage(0.0, (-1, 2)) == 1.0
    assert coverage(1e-12, (-1, 2)) == pytest.approx(1.0, abs=1e-11)
    # Phi(0.5) + 1 - Phi(1.5) from a printed normal table: .6915 + 1 - .9332
    assert coverage(1.0, (-2, 2)) == pytest.approx(0.7583, abs=1e-4)
    assert coverage(1.0, (-2, 2)) == pytest.approx(0.758264, abs=1e-5)
    assert coverage(3.0, EMPTY) == 0.0


def test_coverage_monte_carlo_oracle():
    rng = np.random.default_rng(11)
    n = 10_000_000
    x = 1.0 + rng.standard_normal(n)
    lo, hi = np.minimum(-2 * x, 2 * x), np.maximum(-2 * x, 2 * x)
    est = np.mean((lo <= 1.0) & (1.0 <= hi))
    se = math.sqrt(est * (1 - est) / n)
    assert abs(coverage(1.0, (-2, 2)) - est) <= 4 * se


@given(lam_st, rules())
def test_coverage_matches_event_oracle(lam, rule):
    assert coverage(lam, rule) == pytest.approx(float(oracle_coverage(lam, rule.c1, rule.c2)), abs=1e-12)


@given(lam_st, rules())
def test_sign_symmetry_and_range(lam, rule):
    v = coverage(lam, rule)
    assert v == coverage(-lam, rule)
    assert 0.0 <= v <= 1.0


@given(st.floats(0.05, 20), st.floats(-20, -0.05))
def test_monotone_in_upper_endpoint(lam, c1):
    c2s = np.linspace(1.01, 40, 60)
    vals = [coverage(lam, (c1, c2)) for c2 in c2s]
    assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))


def test_coverage_tends_to_one_for_wide_rules():
    for lam in (0.1, 1, 10):
        assert coverage(lam, (-1e6, 1e6)) > 1 - 1e-5


def test_mixture_examples():
    for h in (0.2, 0.6, 0.9):
        mix = MixtureRule.of(((0, 1), h), (None, 1 - h))
        for lam in (0.01, 0.7, 3, 40):
            assert coverage_mixture(lam, mix) == pytest.approx(h / 2, abs=1e-15)
    r = IntervalRule(-2, 2)
    for lam in (0.3, 1, 5):
        assert coverage_mixture(lam, MixtureRule.single(r)) == coverage(lam, r)
        assert coverage_mixture(lam, MixtureRule.of((r, 0.5), (r, 0.5))) == pytest.approx(coverage(lam, r), abs=1e-15)


# --- derivative ---------------------------------------------------------------

def test_derivative_examples():
    for c in (0.5, 2.0, 7.0):
        phi0 = 1 / math.sqrt(2 * math.pi)
        assert coverage_dlambda(1e-9, (-c, c)) == pytest.approx(-2 * phi0 / c, rel=1e-6)
    for lam in (0.1, 1, 10):
        assert coverage_dlambda(lam, (0, 1)) == 0.0
    with pytest.raises(ValueError):
        coverage_dlambda(0.0, (-1, 1))


def test_derivative_matches_finite_difference():
    rng = np.random.default_rng(3)
    mixes = random_mixtures(40, seed=4, min_slope=0.0)
    for mix in mixes:
        for lam in rng.uniform(0.01, 10, 5):
            step = 1e-5
            fd = (coverage_mixture(lam + step, mix) - coverage_mixture(lam - step, mix)) / (2 * step)
            assert coverage_dlambda(lam, mix) == pytest.approx(fd, abs=1e-6)


# --- same-length improvements and convexity ------------------------------------------

def test_improvement_inequalities_b_c_d():
    for label, lam, better, worse, strict in improvement_cases():
        if label == "a":
            continue
        gap = coverage(lam, better) - coverage(lam, worse)
        if strict:
            assert gap > 0, (label, lam, better, worse, gap)
        else:
            assert gap >= 0, (label, lam, better, worse, gap)


def test_negative_rule_improvement_holds_for_minimal_coverage():
    for label, lam, better, worse, _ in improvement_cases():
        if label == "a" and lam == 1.0:
            mb = min_coverage(MixtureRule.single(better)).min_coverage
            mw = min_coverage(MixtureRule.single(worse)).min_coverage
            assert mb >= mw


def test_negative_rule_improvement_fails_pointwise():
    # [-0.7333, -0.2] covers lam = 0.5 iff X in [-2.5, -0.682], X ~ N(0.5, 1); [-0.5333, 0] iff X <= -0.9375
    lam, worse, better = 0.5, (-0.7333333333333334, -0.2), (-0.5333333333333334, 0.0)
    x_lo, x_hi = lam / worse[1], lam / worse[0]  # X ~ N(lam, 1)
    assert coverage(lam, worse) == pytest.approx(ndtr(x_hi - lam) - ndtr(x_lo - lam), abs=1e-14)
    assert coverage(lam, better) == pytest.approx(ndtr(lam / better[0] - lam), abs=1e-14)
    assert coverage(lam, worse) == pytest.approx(0.117289, abs=1e-6)
    assert coverage(lam, better) == pytest.approx(0.075288, abs=1e-6)
    assert coverage(lam, better) < coverage(lam, worse)


def test_zero_endpoint_tails_keep_precision():
    assert coverage(4.0, (0.0, 0.2)) == pytest.approx(6.388754400538e-58, rel=1e-9)
    assert coverage(4.0, (0.0, 0.2)) > coverage(4.0, (-0.2, 0.0)) > 0


def test_inflection_points():
    a1, a2 = inflection_points(2.0)
    assert a1 == pytest.approx(-1 - math.sqrt(3), abs=1e-12)
    assert a2 == pytest.approx(math.sqrt(3) - 1, abs=1e-12)
    assert 0 < a2 < 1
    assert inflection_points(10.0)[0] < inflection_points(2.0)[0] < 0
    with pytest.raises(ValueError):
        inflection_points(0.0)


@given(st.floats(1e-3, 1e3))
def test_inflection_roots_zero_the_factor(lam):
    a1, a2 = inflection_points(lam)
    assert a1 < 0
    for c in (a1, a2):
        assert abs(second_derivative_factor(lam, c)) <= 1e-10 * max(1.0, lam * lam / (c * c))


def test_convexity_sign_matches_factor():
    for lam, c, upper in convexity_samples(300, seed=9):
        d2 = second_difference(coverage, lam, c, upper)
        assert np.sign(d2) == np.sign(second_derivative_factor(lam, c)), (lam, c, upper, d2)


def test_lower_endpoint_convexity_changes_at_inflection():
    lam = 1.5
    a1, _ = inflection_points(lam)
    cs = np.linspace(-8, -0.3, 400)
    signs = np.array([np.sign(second_difference(coverage, lam, c, False)) for c in cs])
    flips = cs[1:][np.diff(signs) != 0]
    assert len(flips) == 1
    assert abs(flips[0] - a1) <= cs[1] - cs[0]


# --- limits, minimisation, length -------------------------------------------------

def test_limits():
    for c1 in (-0.5, -3):
        assert coverage_limit(MixtureRule.single((c1, 1)), "infinity") == 0.5
    assert coverage_limit(MixtureRule.single((-1, 2)), "zero_plus") == 1.0
    assert coverage_limit(MixtureRule.single((-1, 2)), "infinity") == 1.0
    with pytest.raises(ValueError):
        coverage_limit(MixtureRule.single((-1, 2)), "middle")


def test_limits_agree_with_extreme_lambda():
    for mix in random_mixtures(30, seed=21):
        assert coverage_limit(mix, "zero_plus") == pytest.approx(coverage_mixture(1e-12, mix), abs=1e-9)
        assert coverage_limit(mix, "infinity") == pytest.approx(coverage_mixture(1e9, mix), abs=1e-9)


def test_min_coverage_examples():
    flat = min_coverage(MixtureRule.of(((0, 1), 0.6), (None, 0.4)), 1e-9)
    assert flat.min_coverage == pytest.approx(0.3, abs=1e-12)
    assert flat.lambda_star == LAMBDA_EPS
    half = min_coverage(MixtureRule.single((-0.5, 1)), 1e-9)
    assert half.min_coverage == pytest.approx(0.5, abs=1e-12)
    assert half.lambda_star == AT_INFINITY
    sym = min_coverage(MixtureRule.single((-2, 2)), 1e-9)
    assert sym.min_coverage == pytest.approx(dense_min(MixtureRule.single((-2, 2))), abs=1e-6)
    assert sym.min_coverage == pytest.approx(coverage(sym.lambda_star, (-2, 2)), abs=1e-9)
    with pytest.raises(ValueError):
        min_coverage(MixtureRule.single((-2, 2)), 1e-2)


def test_min_coverage_against_dense_grid():
    for mix in random_mixtures(50, seed=5):
        lm = min_coverage(mix, 1e-9)
        assert lm.min_coverage == pytest.approx(dense_min(mix), abs=1e-6), mix
        at = 1e9 if lm.lambda_star == AT_INFINITY else lm.lambda_star
        assert coverage_mixture(at, mix) == pytest.approx(lm.min_coverage, abs=1e-6)


@given(st.lists(st.tuples(st.floats(-10, -0.01), st.floats(1.01, 10)), min_size=1, max_size=3))
@settings(max_examples=40, deadline=None)
def test_min_coverage_is_a_lower_bound(pairs):
    mix = MixtureRule.of(*[(p, w) for p, w in zip(pairs, [1 / len(pairs)] * len(pairs))]) \
        if len(pairs) != 3 else MixtureRule.of((pairs[0], 0.25), (pairs[1], 0.25), (pairs[2], 0.5))
    lm = min_coverage(mix, 1e-9)
    for lam in (0.01, 0.3, 1, 3, 10, 100):
        assert coverage_mixture(lam, mix) >= lm.min_coverage - 1e-9


def test_expected_length():
    assert expected_length(MixtureRule.single(None)) == 0.0
    assert expected_length(MixtureRule.of(((0, 1), 0.5), (None, 0.5))) == 0.5
    assert expected_length(MixtureRule.of(((-1, 2), 0.25), ((-0.5, 2), 0.75))) == pytest.approx(2.625, abs=1e-15)
