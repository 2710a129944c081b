"""Exact Bayesian inference on tiny discrete problems.

A :class:`DiscreteToyProblem` has a finite feature alphabet, a finite label
alphabet and a finite grid of parameter values ``w``, each with a prior
weight and a conditional table ``p(y | x, w)``. Features follow a known
``p_X`` that does not depend on ``w``.

Given a training set drawn with label-based sampling bias, the posterior over
the grid can be computed two ways:

* :func:`posterior_firstprinciples` multiplies the prior by the class
  conditionals ``p(x_n | y_n, w)``, obtained from the joint table
  ``p_X(x) p(y | x, w)`` by normalizing over ``x``.
* :func:`posterior_surrogate` multiplies the prior by the information-gain
  ratios ``p(y_n | x_n, w) / p(y_n | w)``.

They must agree. :func:`bayes_prediction_risk` enumerates the expected
log-loss of any prediction rule over prior, biased training sets and test
draws, which is how the posterior predictive is shown to be optimal.
"""
from __future__ import annotations

import itertools
import json
import time
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .errors import DegeneracyError, DomainError, ShapeError

__all__ = [
    "DiscreteToyProblem",
    "ToyData",
    "random_problem",
    "sample_toy_data",
    "exact_marginal",
    "marginal_expectation_form",
    "posterior_firstprinciples",
    "posterior_surrogate",
    "posterior_predictive",
    "bayes_prediction_risk",
    "random_rule",
    "prior_predictive_rule",
    "posterior_predictive_rule",
    "map_plugin_rule",
    "EquivalenceResult",
    "run_equivalence_suite",
]

_NORM_TOL = 1e-12


@dataclass
class DiscreteToyProblem:
    """``prior``: (W,), ``p_x``: (X,), ``lik[w, x, y] = p(y | x, w)``."""

    prior: np.ndarray
    p_x: np.ndarray
    lik: np.ndarray

    def __post_init__(self):
        self.prior = np.asarray(self.prior, dtype=np.float64)
        self.p_x = np.asarray(self.p_x, dtype=np.float64)
        self.lik = np.asarray(self.lik, dtype=np.float64)
        W, X, Y = self.lik.shape
        if self.prior.shape != (W,) or self.p_x.shape != (X,):
            raise ShapeError("prior / p_x do not match the likelihood table")
        if X > 16 or Y > 4 or W > 10_000:
            raise ShapeError("toy problems are capped at |X|<=16, |Y|<=4, |W|<=1e4")
        for name, arr, axis in (("prior", self.prior, 0), ("p_x", self.p_x, 0),
                                ("lik", self.lik, 2)):
            if np.any(arr < 0) or np.max(np.abs(arr.sum(axis=axis) - 1.0)) > _NORM_TOL:
                raise DomainError(f"{name} is not normalized")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.lik.shape

    def to_json(self) -> str:
        return json.dumps({"prior": self.prior.tolist(), "p_x": self.p_x.tolist(),
                           "lik": self.lik.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "DiscreteToyProblem":
        d = json.loads(text)
        return cls(d["prior"], d["p_x"], d["lik"])


@dataclass
class ToyData:
    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=np.intp)
        self.ys = np.asarray(self.ys, dtype=np.intp)
        if self.xs.shape != self.ys.shape or self.xs.ndim != 1:
            raise ShapeError("xs and ys must be 1-D and of equal length")

    def __len__(self) -> int:
        return self.xs.size


def random_problem(rng: np.random.Generator, n_x: int = 4, n_y: int = 2,
                   n_w: int = 5, concentration: float = 1.0) -> DiscreteToyProblem:
    """Dirichlet-random prior, feature distribution and likelihood table."""
    prior = rng.dirichlet(np.full(n_w, concentration))
    p_x = rng.dirichlet(np.full(n_x, concentration))
    lik = rng.dirichlet(np.full(n_y, concentration), size=(n_w, n_x))
    return DiscreteToyProblem(prior, p_x, lik)


def exact_marginal(problem: DiscreteToyProblem) -> np.ndarray:
    """``p(y | w) = sum_x p(y | x, w) p_X(x)``, shape (W, Y)."""
    return np.einsum("wxy,x->wy", problem.lik, problem.p_x)


def class_conditionals(problem: DiscreteToyProblem) -> np.ndarray:
    """``p(x | y, w)`` by Bayes rule on the joint table, shape (W, X, Y).

    Columns with zero marginal mass are left at zero.
    """
    joint = problem.lik * problem.p_x[None, :, None]
    mass = joint.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        cond = np.where(mass > 0, joint / mass, 0.0)
    return cond


def sample_toy_data(problem: DiscreteToyProblem, w_index: int, ptilde, n: int,
                    rng: np.random.Generator) -> ToyData:
    """Label-biased sample: ``y ~ ptilde``, then ``x ~ p(x | y, w)``."""
    ptilde = np.asarray(ptilde, dtype=np.float64)
    cond = class_conditionals(problem)[w_index]
    ys = rng.choice(ptilde.size, size=n, p=ptilde)
    xs = np.array([rng.choice(cond.shape[0], p=cond[:, y]) for y in ys], dtype=np.intp)
    return ToyData(xs, ys)


def marginal_expectation_form(problem: DiscreteToyProblem, w_true: int) -> np.ndarray:
    """``p(y'|w)`` rebuilt from the biased-sampling side, for every ``w``.

    ``sum_y p(y | w_true) sum_x p(y' | x, w) p(x | y, w_true)``. It equals
    :func:`exact_marginal` because ``p_X`` does not depend on ``w``.
    """
    p_y_true = exact_marginal(problem)[w_true]                # (Y,)
    cond_true = class_conditionals(problem)[w_true]           # (X, Y)
    # (W, X, Y') x (X, Y) -> (W, Y, Y')
    inner = np.einsum("wxz,xy->wyz", problem.lik, cond_true)
    return np.einsum("y,wyz->wz", p_y_true, inner)


def _check_data(problem, data: ToyData):
    W, X, Y = problem.shape
    if len(data) and (data.xs.min() < 0 or data.xs.max() >= X
                      or data.ys.min() < 0 or data.ys.max() >= Y):
        raise DomainError("toy data outside the problem's alphabets")


def posterior_firstprinciples(problem: DiscreteToyProblem, data: ToyData) -> np.ndarray:
    """``p(w | X, Y) ~ p(w) prod_n p(x_n | y_n, w)``, normalized."""
    _check_data(problem, data)
    cond = class_conditionals(problem)
    unnorm = problem.prior * np.prod(cond[:, data.xs, data.ys], axis=1)
    total = unnorm.sum()
    if not total > 0:
        raise DegeneracyError("posterior has zero total mass")
    return unnorm / total


def posterior_surrogate(problem: DiscreteToyProblem, data: ToyData) -> np.ndarray:
    """``p(w | X, Y) ~ p(w) prod_n p(y_n | x_n, w) / p(y_n | w)``, normalized.

    Grid points where some observed label has zero marginal probability get
    zero posterior mass (with a warning).
    """
    _check_data(problem, data)
    marg = exact_marginal(problem)
    with np.errstate(divide="ignore"):
        log_prior = np.log(problem.prior)
        log_lik = np.log(problem.lik[:, data.xs, data.ys]).sum(axis=1)
        log_marg = np.log(marg[:, data.ys])
    dead = np.any(marg[:, data.ys] == 0.0, axis=1) if len(data) else np.zeros(problem.shape[0], bool)
    if np.any(dead & (problem.prior > 0)):
        warnings.warn("some grid points give zero marginal probability to an observed "
                      "label; they receive zero posterior mass", RuntimeWarning, stacklevel=2)
    log_unnorm = log_prior + log_lik - np.where(dead[:, None], 0.0, log_marg).sum(axis=1)
    log_unnorm[dead] = -np.inf
    norm = logsumexp(log_unnorm)
    if not np.isfinite(norm):
        raise DegeneracyError("posterior has zero total mass")
    return np.exp(log_unnorm - norm)


def posterior_predictive(problem: DiscreteToyProblem, posterior, x_new: int) -> np.ndarray:
    """``sum_w p(y | x_new, w) posterior(w)``."""
    if not 0 <= x_new < problem.shape[1]:
        raise DomainError("x_new outside the feature alphabet")
    return np.asarray(posterior) @ problem.lik[:, x_new, :]


# prediction rules: (problem, x_star, data) -> distribution over Y
Rule = Callable[[DiscreteToyProblem, int, ToyData], np.ndarray]


def posterior_predictive_rule(problem, x_star, data):
    return posterior_predictive(problem, posterior_surrogate(problem, data), x_star)


def prior_predictive_rule(problem, x_star, data):
    return posterior_predictive(problem, problem.prior, x_star)


def map_plugin_rule(problem, x_star, data):
    return problem.lik[int(np.argmax(posterior_surrogate(problem, data))), x_star]


def random_rule(seed: int) -> Rule:
    """A fixed random table of predictions indexed by ``(x_star, dataset)``."""
    table: dict = {}
    rng = np.random.default_rng(seed)

    def rule(problem, x_star, data):
        key = (int(x_star), tuple(data.xs.tolist()), tuple(data.ys.tolist()))
        if key not in table:
            table[key] = rng.dirichlet(np.ones(problem.shape[2]))
        return table[key]

    return rule


def bayes_prediction_risk(problem: DiscreteToyProblem, rule: Rule, ptilde, n: int) -> float:
    """Expected negative log-score of ``rule``, enumerated exactly.

    The expectation runs over ``w ~ prior``, every training set of size ``n``
    under label-biased sampling with ``ptilde``, and every test pair
    ``x* ~ p_X``, ``y* ~ p(y | x*, w)``.
    """
    W, X, Y = problem.shape
    ptilde = np.asarray(ptilde, dtype=np.float64)
    cond = class_conditionals(problem)
    risk = 0.0
    for pairs in itertools.product(range(X), range(Y), repeat=n):
        xs = np.array(pairs[0::2], dtype=np.intp)
        ys = np.array(pairs[1::2], dtype=np.intp)
        # p~(D | w) for every w
        p_data = np.prod(ptilde[ys]) * np.prod(cond[:, xs, ys], axis=1)
        weight_w = problem.prior * p_data                     # (W,)
        if not weight_w.sum() > 0:
            continue
        data = ToyData(xs, ys)
        for x_star in range(X):
            q = np.asarray(rule(problem, x_star, data), dtype=np.float64)
            if np.any((q == 0) & (weight_w @ problem.lik[:, x_star, :] > 0)):
                return float("inf")
            with np.errstate(divide="ignore"):
                logq = np.where(q > 0, np.log(q), 0.0)
            # sum_w weight_w p_X(x*) sum_y p(y|x*,w) log q(y)
            risk -= problem.p_x[x_star] * (weight_w @ (problem.lik[:, x_star, :] @ logq))
    return float(risk)


@dataclass
class EquivalenceResult:
    seed: int
    max_abs_diff: float
    passed: bool
    problem_json: str


def run_equivalence_suite(instances: int = 100, tol: float = 1e-10, seed: int = 0,
                          max_n: int = 12) -> tuple[list[EquivalenceResult], float]:
    """Compare the two posteriors on random toy problems and biased datasets.

    Instance ``i`` is generated from seed ``seed + i``, so a failing instance
    can be rebuilt on its own. Returns the per-instance results and the
    elapsed wall time.
    """
    start = time.perf_counter()
    results = []
    for i in range(instances):
        inst_seed = seed + i
        rng = np.random.default_rng(inst_seed)
        n_x = int(rng.integers(2, 17))
        n_y = int(rng.integers(2, 5))
        n_w = int(rng.integers(1, 201))
        problem = random_problem(rng, n_x, n_y, n_w)
        ptilde = rng.dirichlet(np.ones(n_y))
        n = int(rng.integers(0, max_n + 1))
        w_true = int(rng.choice(n_w, p=problem.prior))
        data = sample_toy_data(problem, w_true, ptilde, n, rng)
        diff = float(np.max(np.abs(posterior_surrogate(problem, data)
                                   - posterior_firstprinciples(problem, data))))
        results.append(EquivalenceResult(inst_seed, diff, diff <= tol, problem.to_json()))
    return results, time.perf_counter() - start
