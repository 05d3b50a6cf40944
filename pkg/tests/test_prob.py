import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aifcai.prob import (Categorical, DimensionError, LogWeights, NormalizationError, ProbabilityError,
                         SupportError, as_probs, entropy, kl_divergence, log_sum_exp, row_entropy, softmax)

from conftest import simplex

mpmath.mp.dps = 40


def mp_kl(p, q):
    return float(mpmath.fsum(mpmath.mpf(a) * mpmath.log(mpmath.mpf(a) / mpmath.mpf(b)) for a, b in zip(p, q) if a > 0))


def mp_lse(w):
    return float(mpmath.log(mpmath.fsum(mpmath.exp(mpmath.mpf(x)) for x in w)))


class TestCategorical:
    def test_valid(self):
        c = Categorical([0.2, 0.8])
        assert c.dim == 2 and len(c) == 2
        assert not c.probs.flags.writeable

    def test_renormalizes_small_drift(self):
        c = Categorical([0.5, 0.5 + 5e-10])
        assert abs(c.probs.sum() - 1) < 1e-15

    def test_rejects_large_drift(self):
        with pytest.raises(NormalizationError):
            Categorical([0.5, 0.6])

    @pytest.mark.parametrize("bad", [[-0.1, 1.1], [np.nan, 1.0], [np.inf, 0.0]])
    def test_rejects_invalid_entries(self, bad):
        with pytest.raises(NormalizationError):
            Categorical(bad)

    def test_rejects_empty_and_matrix(self):
        with pytest.raises(DimensionError):
            Categorical([])
        with pytest.raises(DimensionError):
            Categorical([[0.5, 0.5], [0.5, 0.5]])

    def test_constructors(self):
        np.testing.assert_allclose(Categorical.uniform(4).probs, 0.25)
        np.testing.assert_array_equal(Categorical.point(3, 1).probs, [0, 1, 0])

    def test_rows(self):
        rows = as_probs([[0.1, 0.9], [1.0, 0.0]])
        assert rows.shape == (2, 2)
        with pytest.raises(NormalizationError):
            as_probs([[0.1, 0.9], [0.5, 0.4]])


class TestLogWeights:
    def test_neg_inf_allowed(self):
        assert len(LogWeights([0.0, -np.inf])) == 2

    @pytest.mark.parametrize("bad", [[np.nan], [np.inf, 0.0]])
    def test_rejects(self, bad):
        with pytest.raises(ProbabilityError):
            LogWeights(bad)

    def test_all_neg_inf_rejected(self):
        with pytest.raises(ProbabilityError):
            softmax([-np.inf, -np.inf])


def test_kl_examples():
    assert kl_divergence([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert kl_divergence([1, 0], [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-15)


def test_kl_random_against_mpmath():
    rng = np.random.default_rng(1)
    for _ in range(20):
        p, q = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(4))
        assert abs(kl_divergence(p, q) - mp_kl(p, q)) < 1e-12


def test_kl_errors():
    with pytest.raises(SupportError):
        kl_divergence([0.5, 0.5], [1.0, 0.0])
    with pytest.raises(DimensionError):
        kl_divergence([0.5, 0.5], [0.2, 0.3, 0.5])


def test_entropy_examples():
    assert entropy([1, 0, 0]) == 0.0
    assert entropy([0.25] * 4) == pytest.approx(math.log(4), abs=1e-15)


def test_entropy_uniform_kl_identity():
    rng = np.random.default_rng(2)
    p = rng.dirichlet(np.ones(5))
    assert abs(entropy(p) - (math.log(5) - kl_divergence(p, np.full(5, 0.2)))) < 1e-12


def test_softmax_examples():
    np.testing.assert_allclose(softmax([0, 0]).probs, [0.5, 0.5], atol=1e-15)
    np.testing.assert_allclose(softmax([7.0, 7.0, 7.0]).probs, 1 / 3, atol=1e-15)
    np.testing.assert_allclose(softmax([0.0, math.log(3)]).probs, [0.25, 0.75], atol=1e-15)
    np.testing.assert_allclose(softmax([0.0, -np.inf]).probs, [1, 0])


def test_log_sum_exp_examples():
    assert log_sum_exp([0.0]) == 0.0
    assert log_sum_exp([math.log(2), math.log(3)]) == pytest.approx(math.log(5), abs=1e-15)
    w = np.random.default_rng(3).normal(size=10) * 5
    assert abs(log_sum_exp(w) - mp_lse(w)) < 1e-12


def test_log_sum_exp_large_values():
    assert log_sum_exp([1000.0, 1000.0]) == pytest.approx(1000 + math.log(2))


def test_row_entropy():
    np.testing.assert_allclose(row_entropy([[1, 0], [0.5, 0.5]]), [0, math.log(2)])


@given(simplex(n=4), simplex(n=4))
def test_kl_nonnegative(p, q):
    assert kl_divergence(p, q) >= -1e-15


@given(simplex())
def test_kl_self_zero(p):
    assert abs(kl_divergence(p, p)) < 1e-12


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=8), st.floats(-100, 100))
def test_softmax_shift_invariance(w, c):
    a = softmax(w).probs
    b = softmax(np.array(w) + c).probs
    np.testing.assert_allclose(a, b, atol=1e-12)


@settings(max_examples=50)
@given(st.lists(st.floats(-30, 30), min_size=1, max_size=8))
def test_log_sum_exp_matches_direct_sum(w):
    direct = math.fsum(math.exp(x) for x in w)
    assert math.exp(log_sum_exp(w)) == pytest.approx(direct, rel=1e-10)


@given(simplex(allow_zeros=True))
def test_entropy_bounds(p):
    h = entropy(p)
    assert -1e-15 <= h <= math.log(len(p)) + 1e-12
