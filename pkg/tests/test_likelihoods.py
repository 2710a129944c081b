import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from biascorr.errors import ConfigurationError, DomainError, NumericError, ShapeError
from biascorr.likelihoods import (LikelihoodModel, log_prob, log_prob_grad, log_prob_jacobian,
                                  prob)

from _oracles import central_diff, onion_probs_bruteforce, softmax_rows

SOFTMAX3 = LikelihoodModel("softmax", 3)
BERN = LikelihoodModel("bernoulli", 2)
ONION = LikelihoodModel("onion_peeling", 5)

finite = st.floats(-30, 30, allow_nan=False)


def test_softmax_uniform_logits():
    lp = log_prob(LikelihoodModel("softmax", 2), [0.0, 0.0])
    assert np.allclose(lp, [-np.log(2), -np.log(2)], atol=1e-15)


def test_onion_zero_gates():
    p = prob(ONION, np.zeros(4))
    assert np.allclose(p, [0.5, 0.125, 0.0625, 0.0625, 0.25], atol=1e-15)
    assert p.sum() == 1.0


def test_bernoulli_zero_logit():
    assert prob(BERN, [0.0])[1] == 0.5


def test_softmax_grad_example():
    g = log_prob_grad(LikelihoodModel("softmax", 2), [0.0, 0.0], 0)
    assert np.allclose(g, [0.5, -0.5])


def test_model_validation():
    with pytest.raises(ConfigurationError):
        LikelihoodModel("onion_peeling", 4)
    with pytest.raises(ConfigurationError):
        LikelihoodModel("bernoulli", 3)
    with pytest.raises(ConfigurationError):
        LikelihoodModel("probit", 2)
    assert ONION.num_logits == 4 and BERN.num_logits == 1 and SOFTMAX3.num_logits == 3


def test_errors():
    with pytest.raises(NumericError):
        log_prob(SOFTMAX3, [0.0, np.inf, 1.0])
    with pytest.raises(DomainError):
        log_prob_grad(SOFTMAX3, [0.0, 0.0, 0.0], 3)
    with pytest.raises(ShapeError):
        log_prob(ONION, np.zeros(5))


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, 4, elements=finite))
def test_onion_matches_bruteforce_and_normalizes(z):
    p = prob(ONION, z)
    assert np.all(p >= 0)
    assert abs(p.sum() - 1.0) <= 1e-12
    assert np.allclose(p, onion_probs_bruteforce(z), rtol=1e-10, atol=1e-300)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, 3, elements=finite), st.floats(-50, 50))
def test_softmax_shift_invariance(z, c):
    assert np.max(np.abs(log_prob(SOFTMAX3, z) - log_prob(SOFTMAX3, z + c))) <= 1e-12


def test_normalization_every_kind(rng):
    for model, L in ((SOFTMAX3, 3), (BERN, 1), (ONION, 4)):
        z = rng.normal(scale=5, size=(1000, L))
        assert np.max(np.abs(prob(model, z).sum(axis=1) - 1)) <= 1e-12
        assert np.all(log_prob(model, z) <= 0)


def test_softmax_against_reference(rng):
    z = rng.normal(size=(10, 3))
    assert np.allclose(prob(SOFTMAX3, z), softmax_rows(z), atol=1e-15)


def test_extreme_logits_stay_finite():
    for model, z in ((BERN, [800.0]), (ONION, [-800.0, 800, -800, 800]),
                     (SOFTMAX3, [1000.0, -1000.0, 0.0])):
        assert np.all(np.isfinite(log_prob(model, z)))


@pytest.mark.parametrize("model", [SOFTMAX3, BERN, ONION])
def test_gradients_match_finite_differences(model, rng):
    for _ in range(20):
        z = rng.normal(scale=2, size=model.num_logits)
        J = log_prob_jacobian(model, z)
        for k in range(model.num_classes):
            fd = central_diff(lambda v: log_prob(model, v)[k], z, 1e-5)
            assert np.allclose(J[k], fd, atol=1e-6)
            assert np.array_equal(log_prob_grad(model, z, k), J[k])


def test_batched_grad(rng):
    z = rng.normal(size=(6, 4))
    y = np.array([0, 1, 2, 3, 4, 2])
    g = log_prob_grad(ONION, z, y)
    for n in range(6):
        assert np.array_equal(g[n], log_prob_grad(ONION, z[n], y[n]))
