import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as scipy_stats

from dlfault.errors import TooFewSamples
from dlfault.stats import (
    DEFAULT_ALPHA,
    DEFAULT_BETA,
    EFFECT_SIZE_SENTINEL,
    cohens_d,
    glm_p_value,
    is_kill,
)


def oracle_cohens_d(a, b):
    a, b = np.asarray(a), np.asarray(b)
    na, nb = len(a), len(b)
    sp = math.sqrt(
        ((na - 1) * a.var(ddof=1) + (nb - 1) * b.var(ddof=1)) / (na + nb - 2)
    )
    return (a.mean() - b.mean()) / sp


def test_identical_samples_zero_d():
    assert cohens_d([0.5, 0.6, 0.7], [0.5, 0.6, 0.7]) == 0.0


def test_zero_variance_different_means_sentinel():
    d = cohens_d([0.9] * 4, [0.5] * 4)
    assert d == EFFECT_SIZE_SENTINEL
    assert cohens_d([0.5] * 4, [0.9] * 4) == -EFFECT_SIZE_SENTINEL


def test_cohens_d_matches_textbook_oracle(rng):
    for _ in range(100):
        a = rng.normal(0.7, 0.1, 20)
        b = rng.normal(0.5, 0.15, 20)
        assert cohens_d(a, b) == pytest.approx(oracle_cohens_d(a, b), abs=1e-9)


def test_p_identical_samples_is_one():
    assert glm_p_value([0.4, 0.5, 0.6], [0.4, 0.5, 0.6]) == 1.0


def test_p_three_point_example():
    a, b = [0.1, 0.2, 0.3], [0.6, 0.7, 0.8]
    expected = scipy_stats.ttest_ind(a, b, equal_var=True).pvalue
    assert glm_p_value(a, b) == pytest.approx(expected, abs=1e-6)


def test_p_matches_t_test_oracle(rng):
    for _ in range(100):
        na, nb = int(rng.integers(2, 40)), int(rng.integers(2, 40))
        a = rng.normal(0.6, 0.1, na)
        b = rng.normal(0.55, 0.1, nb)
        expected = scipy_stats.ttest_ind(a, b, equal_var=True).pvalue
        assert glm_p_value(a, b) == pytest.approx(expected, abs=1e-6)


def test_degenerate_variance_p_values():
    assert glm_p_value([0.9, 0.9], [0.5, 0.5]) == 0.0
    assert glm_p_value([0.9, 0.9], [0.9, 0.9]) == 1.0


def test_too_few_samples():
    with pytest.raises(TooFewSamples):
        cohens_d([0.5], [0.5, 0.6])
    with pytest.raises(TooFewSamples):
        glm_p_value([0.5, 0.6], [math.nan, 0.6])


def test_kill_identical_samples_not_killed():
    v = is_kill([0.8, 0.82, 0.81], [0.8, 0.82, 0.81])
    assert not v.killed
    assert v.p_value == 1.0
    assert v.effect_size == 0.0


def test_kill_clear_gap(rng):
    orig = rng.normal(0.9, 0.02, 20)
    mut = rng.normal(0.3, 0.02, 20)
    v = is_kill(orig, mut, alpha=DEFAULT_ALPHA, beta=DEFAULT_BETA)
    assert v.killed and v.mutant_worse
    # oracle agreement
    assert scipy_stats.ttest_ind(orig, mut).pvalue < DEFAULT_ALPHA
    assert oracle_cohens_d(orig, mut) >= DEFAULT_BETA


def test_better_mutant_never_killed(rng):
    orig = rng.normal(0.3, 0.05, 20)
    mut = rng.normal(0.9, 0.05, 20)
    v = is_kill(orig, mut)
    assert not v.killed and not v.mutant_worse


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(0, 1, width=32), min_size=2, max_size=25),
    st.lists(st.floats(0, 1, width=32), min_size=2, max_size=25),
)
def test_symmetry_properties(a, b):
    assert glm_p_value(a, b) == pytest.approx(glm_p_value(b, a), abs=1e-12)
    assert cohens_d(a, b) == pytest.approx(-cohens_d(b, a), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(0.01, 1), min_size=2, max_size=20),
    st.lists(st.floats(0.01, 1), min_size=2, max_size=20),
    st.floats(0.01, 100),
)
def test_scale_invariance_of_d(a, b, c):
    d1 = cohens_d(a, b)
    d2 = cohens_d([c * v for v in a], [c * v for v in b])
    if abs(d1) < EFFECT_SIZE_SENTINEL:
        assert d2 == pytest.approx(d1, rel=1e-6, abs=1e-9)


@settings(max_examples=1000, deadline=None)
@given(
    st.lists(st.floats(0, 1, width=16), min_size=2, max_size=15),
    st.lists(st.floats(0, 1, width=16), min_size=2, max_size=15),
    st.floats(0.01, 0.99),
    st.floats(0.01, 2.0),
)
def test_verdict_consistency_invariant(a, b, alpha, beta):
    v = is_kill(a, b, alpha=alpha, beta=beta)
    if v.killed:
        assert v.effect_size >= beta
        assert v.p_value < alpha
        assert v.mutant_worse
