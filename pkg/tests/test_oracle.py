import itertools

import numpy as np
import pytest

from biascorr.errors import DegeneracyError
from biascorr.oracle import (DiscreteToyProblem, ToyData, bayes_prediction_risk,
                             class_conditionals, exact_marginal, map_plugin_rule,
                             marginal_expectation_form, posterior_firstprinciples,
                             posterior_predictive, posterior_predictive_rule,
                             posterior_surrogate, prior_predictive_rule, random_problem,
                             random_rule, run_equivalence_suite, sample_toy_data)


def test_empty_dataset_gives_prior(rng):
    prob = random_problem(rng, 4, 3, 6)
    empty = ToyData([], [])
    assert np.allclose(posterior_firstprinciples(prob, empty), prob.prior, atol=1e-15)
    assert np.allclose(posterior_surrogate(prob, empty), prob.prior, atol=1e-15)


def test_single_grid_point(rng):
    prob = random_problem(rng, 4, 2, 1)
    data = sample_toy_data(prob, 0, [0.5, 0.5], 5, rng)
    assert posterior_firstprinciples(prob, data).tolist() == [1.0]


def test_hand_enumerated_two_samples():
    # 3-point grid, |X| = 2, |Y| = 2
    prior = np.array([0.2, 0.5, 0.3])
    p_x = np.array([0.4, 0.6])
    lik = np.array([
        [[0.9, 0.1], [0.2, 0.8]],
        [[0.5, 0.5], [0.5, 0.5]],
        [[0.3, 0.7], [0.6, 0.4]],
    ])
    prob = DiscreteToyProblem(prior, p_x, lik)
    data = ToyData([0, 1], [1, 1])
    expect = []
    for w in range(3):
        # p(x|y=1,w) = p(y=1|x,w) p(x) / sum_x' p(y=1|x',w) p(x')
        denom = lik[w, 0, 1] * 0.4 + lik[w, 1, 1] * 0.6
        expect.append(prior[w] * (lik[w, 0, 1] * 0.4 / denom) * (lik[w, 1, 1] * 0.6 / denom))
    expect = np.array(expect) / sum(expect)
    assert np.allclose(posterior_firstprinciples(prob, data), expect, atol=1e-15)
    assert np.allclose(posterior_surrogate(prob, data), expect, atol=1e-15)


def test_x_independent_likelihood_keeps_prior(rng):
    rows = rng.dirichlet([1, 1, 1], 5)
    prob = DiscreteToyProblem(rng.dirichlet(np.ones(5)), rng.dirichlet(np.ones(4)),
                              np.repeat(rows[:, None, :], 4, axis=1))
    data = sample_toy_data(prob, 2, [0.2, 0.3, 0.5], 8, rng)
    assert np.allclose(posterior_surrogate(prob, data), prob.prior, atol=1e-14)


def test_surrogate_equals_first_principles(rng):
    for _ in range(30):
        prob = random_problem(rng, int(rng.integers(2, 9)), int(rng.integers(2, 5)),
                              int(rng.integers(1, 50)))
        ptilde = rng.dirichlet(np.ones(prob.shape[2]))
        data = sample_toy_data(prob, 0, ptilde, int(rng.integers(0, 10)), rng)
        assert np.max(np.abs(posterior_surrogate(prob, data)
                             - posterior_firstprinciples(prob, data))) <= 1e-10


def test_predictive_examples(rng):
    prob = random_problem(rng, 3, 3, 4)
    point = np.eye(4)[2]
    assert np.allclose(posterior_predictive(prob, point, 1), prob.lik[2, 1])
    two = np.array([0.5, 0.5, 0.0, 0.0])
    assert np.allclose(posterior_predictive(prob, two, 0), (prob.lik[0, 0] + prob.lik[1, 0]) / 2)


def test_marginal_identity(rng):
    for _ in range(20):
        prob = random_problem(rng, 5, 3, 7)
        for w_true in range(7):
            assert np.max(np.abs(marginal_expectation_form(prob, w_true)
                                 - exact_marginal(prob))) <= 1e-12


def test_class_conditionals_normalized(rng):
    cond = class_conditionals(random_problem(rng, 6, 3, 4))
    assert np.allclose(cond.sum(axis=1), 1.0, atol=1e-14)


def test_degenerate_data():
    prob = DiscreteToyProblem([1.0], [0.5, 0.5], [[[1.0, 0.0], [1.0, 0.0]]])
    with pytest.raises(DegeneracyError):
        posterior_firstprinciples(prob, ToyData([0], [1]))
    with pytest.warns(RuntimeWarning), pytest.raises(DegeneracyError):
        posterior_surrogate(prob, ToyData([0], [1]))


def test_dead_grid_point_gets_zero(rng):
    lik = np.array([[[1.0, 0.0], [1.0, 0.0]], [[0.4, 0.6], [0.7, 0.3]]])
    prob = DiscreteToyProblem([0.5, 0.5], [0.5, 0.5], lik)
    with pytest.warns(RuntimeWarning):
        post = posterior_surrogate(prob, ToyData([0], [1]))
    assert post.tolist() == [0.0, 1.0]


def test_posterior_predictive_minimizes_risk():
    rng = np.random.default_rng(3)
    for _ in range(3):
        prob = random_problem(rng, 2, 2, 3)
        ptilde = [0.5, 0.5]
        best = bayes_prediction_risk(prob, posterior_predictive_rule, ptilde, 2)
        for rule in (prior_predictive_rule, map_plugin_rule, random_rule(0), random_rule(1)):
            assert best < bayes_prediction_risk(prob, rule, ptilde, 2)


def test_risk_by_brute_force():
    # independent enumeration of the risk for a tiny problem and n = 1
    rng = np.random.default_rng(8)
    prob = random_problem(rng, 2, 2, 2)
    ptilde = np.array([0.3, 0.7])
    cond = class_conditionals(prob)
    total = 0.0
    for w, x, y, xs in itertools.product(range(2), range(2), range(2), range(2)):
        p_train = prob.prior[w] * ptilde[y] * cond[w, x, y]
        q = posterior_predictive_rule(prob, xs, ToyData([x], [y]))
        total -= p_train * prob.p_x[xs] * np.dot(prob.lik[w, xs], np.log(q))
    assert bayes_prediction_risk(prob, posterior_predictive_rule, ptilde, 1) == pytest.approx(
        total, rel=1e-12)


def test_equivalence_suite_deterministic():
    a, _ = run_equivalence_suite(5, 1e-10, 11)
    b, _ = run_equivalence_suite(5, 1e-10, 11)
    assert [r.max_abs_diff for r in a] == [r.max_abs_diff for r in b]
    assert [r.seed for r in a] == [11, 12, 13, 14, 15]
    assert all(r.passed for r in a)


def test_zero_tolerance_fails():
    res, _ = run_equivalence_suite(10, 0.0, 0)
    assert not all(r.passed for r in res)


def test_problem_json_round_trip(rng):
    prob = random_problem(rng, 3, 2, 4)
    back = DiscreteToyProblem.from_json(prob.to_json())
    assert np.array_equal(back.lik, prob.lik)
