"""Likelihood models ``p(y | x, w)`` expressed on top of scorer logits.

Three models:

``softmax``
    K logits, categorical with a softmax link.
``bernoulli``
    One logit, two classes; ``p(y=1) = sigmoid(logit)``.
``onion_peeling``
    Four gate logits over five ordinal ratings. The gates peel the ratings
    from the outside in: first rating 1, then 5, then 2, then 4; whatever
    mass is left over goes to the ambiguous middle rating 3. Class index
    ``r - 1`` holds rating ``r``.

All functions accept a single logit vector or a batch of them along the
leading axis and work in log space (log-sum-exp, log-sigmoid) throughout.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_softmax, softmax

from .errors import ConfigurationError, DomainError, NumericError, ShapeError

__all__ = [
    "LikelihoodModel",
    "ONION_PEEL_ORDER",
    "log_prob",
    "log_prob_grad",
    "log_prob_jacobian",
    "prob",
]

# class indices (0-based ratings) in the order the gates peel them
ONION_PEEL_ORDER = (0, 4, 1, 3)
ONION_RESIDUAL = 2
_KINDS = ("softmax", "bernoulli", "onion_peeling")


@dataclass(frozen=True)
class LikelihoodModel:
    kind: str = "softmax"
    num_classes: int = 2

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigurationError(f"unknown likelihood kind {self.kind!r}")
        if self.num_classes < 2:
            raise ConfigurationError("num_classes must be >= 2")
        if self.kind == "bernoulli" and self.num_classes != 2:
            raise ConfigurationError("bernoulli likelihood is binary (num_classes=2)")
        if self.kind == "onion_peeling" and self.num_classes != 5:
            raise ConfigurationError("onion_peeling likelihood has exactly 5 ratings")

    @property
    def num_logits(self) -> int:
        """Number of scorer outputs the model consumes."""
        if self.kind == "softmax":
            return self.num_classes
        if self.kind == "bernoulli":
            return 1
        return 4


def _log_sigmoid(z):
    return -np.logaddexp(0.0, -z)


def _check_logits(model: LikelihoodModel, logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim == 0 or z.shape[-1] != model.num_logits:
        raise ShapeError(
            f"{model.kind} likelihood expects {model.num_logits} logits, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise NumericError("non-finite logits")
    return z


def log_prob(model: LikelihoodModel, logits) -> np.ndarray:
    """Per-class log-probabilities, shape ``logits.shape[:-1] + (K,)``."""
    z = _check_logits(model, logits)
    if model.kind == "softmax":
        return log_softmax(z, axis=-1)
    if model.kind == "bernoulli":
        return np.concatenate([_log_sigmoid(-z), _log_sigmoid(z)], axis=-1)

    log_gate = _log_sigmoid(z)         # log s_i
    log_stay = _log_sigmoid(-z)        # log (1 - s_i)
    # log of the stick left before gate i
    remaining = np.concatenate(
        [np.zeros(z.shape[:-1] + (1,)), np.cumsum(log_stay, axis=-1)], axis=-1)
    out = np.empty(z.shape[:-1] + (5,))
    for i, cls in enumerate(ONION_PEEL_ORDER):
        out[..., cls] = remaining[..., i] + log_gate[..., i]
    out[..., ONION_RESIDUAL] = remaining[..., 4]
    return out


def prob(model: LikelihoodModel, logits) -> np.ndarray:
    return np.exp(log_prob(model, logits))


def log_prob_jacobian(model: LikelihoodModel, logits) -> np.ndarray:
    """``J[..., k, j] = d log p(k) / d logit_j`` for every class k."""
    z = _check_logits(model, logits)
    if model.kind == "softmax":
        p = softmax(z, axis=-1)
        eye = np.eye(model.num_classes)
        return eye - p[..., None, :]
    if model.kind == "bernoulli":
        s = expit(z[..., 0])
        return np.stack([-s, 1.0 - s], axis=-1)[..., None]

    s = expit(z)
    J = np.zeros(z.shape[:-1] + (5, 4))
    for i, cls in enumerate(ONION_PEEL_ORDER):
        # earlier gates were passed (-s), gate i fired (1 - s)
        J[..., cls, :i] = -s[..., :i]
        J[..., cls, i] = 1.0 - s[..., i]
    J[..., ONION_RESIDUAL, :] = -s
    return J


def log_prob_grad(model: LikelihoodModel, logits, y) -> np.ndarray:
    """Gradient of ``log p(y)`` with respect to the logits.

    ``y`` is a class index (or an integer array matching the batch shape).
    """
    y = np.asarray(y)
    if not np.issubdtype(y.dtype, np.integer):
        raise DomainError("class labels must be integers")
    if np.any(y < 0) or np.any(y >= model.num_classes):
        raise DomainError(f"class index out of range [0, {model.num_classes})")
    J = log_prob_jacobian(model, logits)
    if J.ndim == 2:
        if y.ndim != 0:
            raise ShapeError("a single logit vector takes a scalar class index")
        return J[int(y)].copy()
    return np.take_along_axis(J, y[..., None, None], axis=-2)[..., 0, :]
