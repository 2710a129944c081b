"""Training objectives.

All three return the value to *minimize* together with its gradient with
respect to the scorer parameters.

``nll``
    ``-mean_n log p(y_n | x_n, w)``.
``weighted``
    Importance-weighted NLL, ``-sum_n beta_n log p(y_n|x_n,w) / sum_n beta_n``.
``bayes_ig``
    Bias-corrected information-gain loss
    ``-mean_n [log p(y_n|x_n,w) - log p(y_n|w)]``. The marginal value comes
    from a :class:`~biascorr.marginal.MarginalTracker` snapshot; its gradient
    is the minibatch estimate

        grad log p(y|w) ~ mean_m beta_m * p(y|x_m,w) / phat(y) * grad log p(y|x_m,w)

    so the correction flows back through the likelihood of every sample in
    the batch. The tracker itself is treated as a constant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .diffcore import ParamVector, Scorer
from .errors import ConfigurationError, ShapeError, UsageError
from .likelihoods import LikelihoodModel, log_prob, log_prob_jacobian
from .marginal import MarginalTracker, PrevalenceSpec

__all__ = ["LOSS_KINDS", "LossOutput", "nll_loss", "weighted_loss", "bayes_ig_loss", "compute_loss"]

LOSS_KINDS = ("nll", "weighted", "bayes_ig")


@dataclass
class LossOutput:
    loss_value: float
    param_grad: ParamVector
    diagnostics: dict = field(default_factory=dict)


def _prepare(features, labels, scorer: Scorer, likelihood: LikelihoodModel):
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if X.ndim != 2 or X.shape[0] == 0:
        raise UsageError("loss needs a nonempty (N, d) batch of features")
    if y.shape != (X.shape[0],):
        raise ShapeError("labels and features disagree on batch size")
    if scorer.spec.output_dim != likelihood.num_logits:
        raise ConfigurationError(
            f"scorer outputs {scorer.spec.output_dim} logits but the "
            f"{likelihood.kind} likelihood consumes {likelihood.num_logits}")
    y = y.astype(np.intp)
    if np.any(y < 0) or np.any(y >= likelihood.num_classes):
        raise ShapeError("labels outside the likelihood's class range")
    logits, tape = scorer.forward(X)
    logp = log_prob(likelihood, logits)
    J = log_prob_jacobian(likelihood, logits)          # (N, K, L)
    return y, tape, logp, J


def _weighted_terms(weights, y, tape, logp, J):
    """Loss ``-sum_n w_n logp[n, y_n]`` and its parameter gradient."""
    N = y.size
    ll = logp[np.arange(N), y]
    value = -math.fsum(weights * ll)
    dlogits = -weights[:, None] * J[np.arange(N), y]
    return value, dlogits, ll


def nll_loss(features, labels, scorer: Scorer, likelihood: LikelihoodModel) -> LossOutput:
    """Mean negative log-likelihood of the batch."""
    y, tape, logp, J = _prepare(features, labels, scorer, likelihood)
    N = y.size
    weights = np.ones(N) / float(N)
    value, dlogits, ll = _weighted_terms(weights, y, tape, logp, J)
    grad = scorer.backward(tape, dlogits)
    return LossOutput(value, grad, {
        "mean_log_lik": math.fsum(ll) / N,
        "mean_log_marginal": float("nan"),
        "mean_beta": 1.0,
    })


def weighted_loss(features, labels, scorer: Scorer, likelihood: LikelihoodModel,
                  spec: PrevalenceSpec) -> LossOutput:
    """Importance-weighted NLL, normalized by the batch sum of weights.

    With ``p_Y == ptilde`` every weight is exactly 1 and the result is
    bit-identical to :func:`nll_loss`.
    """
    y, tape, logp, J = _prepare(features, labels, scorer, likelihood)
    N = y.size
    beta = spec.beta[y]
    total = math.fsum(beta)
    weights = beta / total
    value, dlogits, ll = _weighted_terms(weights, y, tape, logp, J)
    grad = scorer.backward(tape, dlogits)
    return LossOutput(value, grad, {
        "mean_log_lik": math.fsum(ll) / N,
        "mean_log_marginal": float("nan"),
        "mean_beta": total / N,
    })


def bayes_ig_loss(features, labels, scorer: Scorer, likelihood: LikelihoodModel,
                  spec: PrevalenceSpec, tracker: MarginalTracker) -> LossOutput:
    """Bias-corrected information-gain loss for one minibatch.

    Parameters
    ----------
    features, labels : array
        The minibatch, ``(N, d)`` and ``(N,)``.
    scorer : Scorer
        Model whose parameters are differentiated.
    likelihood : LikelihoodModel
        Maps logits to class log-probabilities.
    spec : PrevalenceSpec
        Source of the importance ratios ``beta``.
    tracker : MarginalTracker
        Snapshot of the marginal estimate ``phat``. Entries below the
        tracker floor are clamped; ``diagnostics["clamped"]`` reports it.

    Returns
    -------
    LossOutput
    """
    y, tape, logp, J = _prepare(features, labels, scorer, likelihood)
    N = y.size
    K = likelihood.num_classes
    if tracker.psi.shape != (K,):
        raise ShapeError("tracker class count does not match the likelihood")
    phat, clamped = tracker.floored()
    log_phat = np.log(phat)
    beta = spec.beta[y]

    ll = logp[np.arange(N), y]
    value = -math.fsum(ll - log_phat[y]) / N

    # likelihood term
    dlogits = -J[np.arange(N), y] / N
    # marginal term: (1/N) sum_n grad log p(y_n|w), grouped by class
    class_frac = np.bincount(y, minlength=K) / N                    # (K,)
    ratio = np.exp(logp) / phat                                     # p(k|x_m) / phat(k)
    coef = (beta / N)[:, None] * ratio * class_frac[None, :]        # (N, K)
    dlogits += np.einsum("nk,nkl->nl", coef, J)

    grad = scorer.backward(tape, dlogits)
    return LossOutput(value, grad, {
        "mean_log_lik": math.fsum(ll) / N,
        "mean_log_marginal": math.fsum(log_phat[y]) / N,
        "mean_beta": math.fsum(beta) / N,
        "clamped": clamped,
    })


def compute_loss(kind: str, features, labels, scorer: Scorer, likelihood: LikelihoodModel,
                 spec: PrevalenceSpec | None = None,
                 tracker: MarginalTracker | None = None) -> LossOutput:
    """Dispatch on the loss kind."""
    if kind == "nll":
        return nll_loss(features, labels, scorer, likelihood)
    if kind == "weighted":
        if spec is None:
            raise ConfigurationError("weighted loss needs a PrevalenceSpec")
        return weighted_loss(features, labels, scorer, likelihood, spec)
    if kind == "bayes_ig":
        if spec is None or tracker is None:
            raise ConfigurationError("bayes_ig loss needs a PrevalenceSpec and a MarginalTracker")
        return bayes_ig_loss(features, labels, scorer, likelihood, spec, tracker)
    raise ConfigurationError(f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")
