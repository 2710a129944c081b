"""Label marginal ``p(y | w)`` under the true population.

The training set is built by drawing labels from a designer-chosen
distribution ``ptilde`` and then features from the true class conditionals,
so a plain average of predicted class probabilities over training rows
estimates the marginal under ``ptilde``, not under the population. Two
estimators undo this:

* :func:`estimate_marginal_eq3` reweights each row by
  ``beta(y_n) = p_Y(y_n) / ptilde(y_n)`` and averages.
* :func:`estimate_marginal_eq12` averages predictions within each true class
  and mixes the class means with ``p_Y``.

:class:`MarginalTracker` keeps a running categorical estimate that is fitted
to a stream of such minibatch estimates by cross-entropy descent.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import softmax

from .errors import DomainError, PreconditionError, ShapeError, UsageError

__all__ = [
    "PrevalenceSpec",
    "MarginalEstimate",
    "MarginalTracker",
    "beta_for",
    "estimate_marginal_eq3",
    "estimate_marginal_eq12",
    "tracker_update",
    "MARGINAL_FLOOR",
]

MARGINAL_FLOOR = 1e-8
_NORM_TOL = 1e-12


def _as_distribution(p, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size < 2:
        raise ShapeError(f"{name} must be a probability vector with at least 2 entries")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise DomainError(f"{name} has negative or non-finite entries")
    if abs(p.sum() - 1.0) > _NORM_TOL:
        raise DomainError(f"{name} sums to {p.sum()!r}, not 1")
    return p


@dataclass(frozen=True)
class PrevalenceSpec:
    """True population marginal ``p_Y`` and training marginal ``ptilde``."""

    true_marginal: np.ndarray
    train_marginal: np.ndarray

    def __post_init__(self):
        t = _as_distribution(self.true_marginal, "true_marginal")
        s = _as_distribution(self.train_marginal, "train_marginal")
        if t.shape != s.shape:
            raise ShapeError("true and train marginals have different lengths")
        object.__setattr__(self, "true_marginal", t)
        object.__setattr__(self, "train_marginal", s)

    @classmethod
    def binary(cls, prevalence: float, train_prevalence: float = 0.5) -> "PrevalenceSpec":
        """Two-class spec from positive-class rates."""
        return cls(np.array([1.0 - prevalence, prevalence]),
                   np.array([1.0 - train_prevalence, train_prevalence]))

    @property
    def num_classes(self) -> int:
        return self.true_marginal.size

    @property
    def beta(self) -> np.ndarray:
        """Per-class importance ratios ``p_Y / ptilde`` (inf where ``ptilde`` is 0)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.true_marginal / self.train_marginal


def beta_for(spec: PrevalenceSpec, y: int) -> float:
    """Importance ratio ``p_Y[y] / ptilde[y]`` for class ``y``."""
    if not 0 <= int(y) < spec.num_classes:
        raise DomainError(f"class {y} out of range")
    denom = spec.train_marginal[int(y)]
    if denom == 0.0:
        raise ZeroDivisionError(f"train marginal of class {y} is zero")
    return float(spec.true_marginal[int(y)] / denom)


def _batch_betas(spec: PrevalenceSpec, labels: np.ndarray) -> np.ndarray:
    ptilde = spec.train_marginal[labels]
    if np.any(ptilde == 0.0):
        bad = int(labels[np.argmax(ptilde == 0.0)])
        raise ZeroDivisionError(f"class {bad} occurs in the batch but has zero train marginal")
    return spec.true_marginal[labels] / ptilde


@dataclass(frozen=True)
class MarginalEstimate:
    probs: np.ndarray
    method: str

    def renormalized(self) -> "MarginalEstimate":
        return MarginalEstimate(self.probs / self.probs.sum(), self.method)


def _check_batch(batch_probs, batch_labels, spec):
    P = np.asarray(batch_probs, dtype=np.float64)
    y = np.asarray(batch_labels)
    if P.ndim != 2 or P.shape[0] == 0:
        raise UsageError("marginal estimate needs a nonempty (N, K) batch of class probabilities")
    if y.shape != (P.shape[0],):
        raise ShapeError("labels and class probabilities disagree on batch size")
    if P.shape[1] != spec.num_classes:
        raise ShapeError("class probability rows do not match the prevalence spec")
    return P, y.astype(np.intp)


def estimate_marginal_eq3(batch_probs, batch_labels, spec: PrevalenceSpec) -> MarginalEstimate:
    """Importance-weighted average ``(1/N) sum_n beta(y_n) p(.|x_n, w)``.

    ``batch_probs`` holds one row of class probabilities per sample. The
    result sums to the batch mean of ``beta``, which is 1 only on average;
    call :meth:`MarginalEstimate.renormalized` for a proper distribution.
    """
    P, y = _check_batch(batch_probs, batch_labels, spec)
    b = _batch_betas(spec, y)
    return MarginalEstimate(b @ P / P.shape[0], "eq3_sample_weighted")


def estimate_marginal_eq12(batch_probs, batch_labels, spec: PrevalenceSpec) -> MarginalEstimate:
    """Class-stratified estimate ``sum_y p_Y[y] * mean_{n: y_n = y} p(.|x_n, w)``.

    Every class with positive true marginal must occur in the batch.
    """
    P, y = _check_batch(batch_probs, batch_labels, spec)
    out = np.zeros(spec.num_classes)
    for k, pk in enumerate(spec.true_marginal):
        if pk == 0.0:
            continue
        rows = P[y == k]
        if rows.shape[0] == 0:
            raise PreconditionError(
                f"class {k} has positive true marginal but no sample in the batch")
        out += pk * rows.mean(axis=0)
    return MarginalEstimate(out, "eq12_per_class")


@dataclass
class MarginalTracker:
    """Categorical estimate ``softmax(psi)`` of the label marginal.

    It does not depend on the model parameters; it just follows the current
    model, one cross-entropy gradient step per update.
    """

    psi: np.ndarray
    learning_rate: float = 0.1
    floor: float = MARGINAL_FLOOR
    n_updates: int = field(default=0)

    def __post_init__(self):
        self.psi = np.array(self.psi, dtype=np.float64)
        if not self.learning_rate > 0:
            raise DomainError("tracker learning rate must be positive")

    @classmethod
    def from_prevalence(cls, true_marginal, learning_rate: float = 0.1) -> "MarginalTracker":
        """Start at ``psi = log p_Y`` (floored so absent classes stay finite)."""
        p = np.maximum(np.asarray(true_marginal, dtype=np.float64), MARGINAL_FLOOR)
        return cls(np.log(p), learning_rate)

    @classmethod
    def from_estimate(cls, estimate, learning_rate: float = 0.1) -> "MarginalTracker":
        """Start at a given marginal estimate (renormalized, floored)."""
        p = estimate.probs if isinstance(estimate, MarginalEstimate) else np.asarray(estimate, float)
        p = np.maximum(p / p.sum(), MARGINAL_FLOOR)
        return cls(np.log(p), learning_rate)

    def estimate(self) -> np.ndarray:
        return softmax(self.psi)

    def floored(self) -> tuple[np.ndarray, bool]:
        """Estimate clipped from below at ``floor``; flag is True if any class was clipped."""
        q = self.estimate()
        return np.maximum(q, self.floor), bool(np.any(q < self.floor))

    def update(self, target) -> "MarginalTracker":
        """One descent step on ``-sum_y target[y] log softmax(psi)[y]``."""
        t = target.probs if isinstance(target, MarginalEstimate) else target
        t = _as_distribution(t, "tracker target")
        if t.shape != self.psi.shape:
            raise ShapeError("tracker target has the wrong number of classes")
        self.psi = self.psi - self.learning_rate * (self.estimate() - t)
        self.n_updates += 1
        return self

    def copy(self) -> "MarginalTracker":
        return MarginalTracker(self.psi.copy(), self.learning_rate, self.floor, self.n_updates)


def tracker_update(tracker: MarginalTracker, target) -> MarginalTracker:
    return tracker.update(target)
