"""Evaluation metrics for binary and ordinal classifiers.

Binary conventions: class 1 is the positive class; a score is the predicted
probability of class 1. Rates with an empty denominator (for instance PPV
when nothing is predicted positive) are reported as 0 and flagged.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError, ShapeError, UsageError

__all__ = [
    "ConfusionCounts",
    "MetricsReport",
    "RocCurve",
    "confusion",
    "report",
    "roc_auc",
    "probability_histogram",
    "off_by_one_accuracy",
    "off_by_one_true_rates",
    "calibration_error",
]


@dataclass(frozen=True)
class ConfusionCounts:
    """``matrix[t, p]`` counts samples with true class ``t`` predicted as ``p``."""

    matrix: np.ndarray

    @property
    def num_classes(self) -> int:
        return self.matrix.shape[0]

    @property
    def total(self) -> int:
        return int(self.matrix.sum())

    def _binary(self):
        if self.num_classes != 2:
            raise ShapeError("tp/fp/tn/fn are defined for binary confusion counts only")
        return self.matrix

    @property
    def tp(self) -> int:
        return int(self._binary()[1, 1])

    @property
    def fp(self) -> int:
        return int(self._binary()[0, 1])

    @property
    def tn(self) -> int:
        return int(self._binary()[0, 0])

    @property
    def fn(self) -> int:
        return int(self._binary()[1, 0])

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.matrix + other.matrix)

    @classmethod
    def from_binary(cls, tp: int, fp: int, tn: int, fn: int) -> "ConfusionCounts":
        return cls(np.array([[tn, fp], [fn, tp]], dtype=np.int64))


def confusion(pred_labels, true_labels, num_classes: int | None = None) -> ConfusionCounts:
    pred = np.asarray(pred_labels, dtype=np.int64)
    true = np.asarray(true_labels, dtype=np.int64)
    if pred.shape != true.shape:
        raise UsageError("predicted and true labels have different lengths")
    if pred.size == 0:
        raise UsageError("confusion counts need at least one sample")
    K = num_classes or int(max(pred.max(), true.max())) + 1
    K = max(K, 2)
    m = np.zeros((K, K), dtype=np.int64)
    np.add.at(m, (true, pred), 1)
    return ConfusionCounts(m)


def _ratio(num, den):
    return (num / den, False) if den > 0 else (0.0, True)


@dataclass
class MetricsReport:
    exp_log_lik: float
    acc: float
    w_acc: float
    ba: float
    ppv: float | None = None
    npv: float | None = None
    tpr: float | None = None
    tnr: float | None = None
    auc: float | None = None
    off_by_one_acc: float | None = None
    per_class_true_rates: list | None = None
    flags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def report(counts: ConfusionCounts, scores, truths, prevalence) -> MetricsReport:
    """Summary metrics from confusion counts and predicted probabilities.

    Parameters
    ----------
    counts : ConfusionCounts
        Counts of hard predictions.
    scores : array or None
        Either ``(N, K)`` class probabilities or, for binary problems, the
        ``(N,)`` probabilities of class 1. Used for the expected
        log-likelihood and the AUC; pass None to skip both.
    truths : array or None
        True labels matching ``scores``.
    prevalence : float or array
        True positive-class rate ``pi`` (binary) or the true marginal vector.
        Accuracy weighted by prevalence is ``sum_k p_Y[k] * recall_k``, which
        reduces to ``pi * tpr + (1 - pi) * tnr``.
    """
    K = counts.num_classes
    m = counts.matrix
    if np.ndim(prevalence) == 0:
        pi = float(prevalence)
        if not 0.0 < pi < 1.0:
            raise DomainError(f"prevalence must lie in (0, 1), got {pi}")
        if K != 2:
            raise ShapeError("a scalar prevalence only applies to binary problems")
        p_true = np.array([1.0 - pi, pi])
    else:
        p_true = np.asarray(prevalence, dtype=np.float64)
        if p_true.shape != (K,) or np.any(p_true < 0) or abs(p_true.sum() - 1) > 1e-9:
            raise DomainError("prevalence vector must be a distribution over the classes")

    flags = {}
    support = m.sum(axis=1)
    recalls = np.array([_ratio(m[k, k], support[k])[0] for k in range(K)])
    for k in range(K):
        if support[k] == 0:
            flags[f"recall_{k}_undefined"] = True
    acc = float(np.trace(m) / m.sum())
    w_acc = float(sum(p * r for p, r in zip(p_true, recalls)))
    ba = float(recalls.mean())

    out = MetricsReport(exp_log_lik=float("nan"), acc=acc, w_acc=w_acc, ba=ba, flags=flags)
    if K == 2:
        tp, fp, tn, fn = counts.tp, counts.fp, counts.tn, counts.fn
        out.tpr, u1 = _ratio(tp, tp + fn)
        out.tnr, u2 = _ratio(tn, tn + fp)
        out.ppv, u3 = _ratio(tp, tp + fp)
        out.npv, u4 = _ratio(tn, tn + fn)
        for name, u in (("tpr", u1), ("tnr", u2), ("ppv", u3), ("npv", u4)):
            if u:
                flags[f"{name}_undefined"] = True
        out.w_acc = p_true[1] * out.tpr + p_true[0] * out.tnr
        out.ba = (out.tpr + out.tnr) / 2.0

    if scores is not None and truths is not None:
        y = np.asarray(truths, dtype=np.int64)
        P = np.asarray(scores, dtype=np.float64)
        if P.ndim == 1:
            P = np.column_stack([1.0 - P, P])
        if P.shape != (y.size, K):
            raise ShapeError("scores do not match the number of samples / classes")
        with np.errstate(divide="ignore"):
            out.exp_log_lik = math.fsum(np.log(P[np.arange(y.size), y])) / y.size
        if K == 2:
            if np.unique(y).size == 2:
                out.auc = roc_auc(P[:, 1], y)[1]
            else:
                flags["auc_undefined"] = True
    return out


@dataclass
class RocCurve:
    thresholds: np.ndarray
    tpr: np.ndarray
    fpr: np.ndarray

    def rows(self):
        return zip(self.thresholds.tolist(), self.tpr.tolist(), self.fpr.tolist())


def roc_auc(scores, truths) -> tuple[RocCurve, float]:
    """ROC curve over every distinct score and its trapezoidal area.

    A sample is called positive when ``score >= threshold``. Tied scores move
    together, so the area equals the Mann-Whitney statistic with ties counted
    as one half. The curve starts at ``(+inf, 0, 0)`` and ends at ``(1, 1)``.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(truths, dtype=np.int64)
    if s.shape != y.shape or s.ndim != 1:
        raise ShapeError("scores and truths must be 1-D and of equal length")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DomainError("AUC is undefined unless both classes are present")
    order = np.argsort(-s, kind="mergesort")
    s_sorted, y_sorted = s[order], y[order]
    # last index of every group of equal scores
    ends = np.flatnonzero(np.diff(s_sorted) != 0)
    ends = np.append(ends, s_sorted.size - 1)
    tps = np.cumsum(y_sorted == 1)[ends]
    fps = np.cumsum(y_sorted == 0)[ends]
    tpr = np.concatenate([[0.0], tps / n_pos])
    fpr = np.concatenate([[0.0], fps / n_neg])
    thresholds = np.concatenate([[np.inf], s_sorted[ends]])
    auc = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(thresholds, tpr, fpr), auc


def probability_histogram(scores, truths, bins: int = 10, num_classes: int | None = None):
    """Per-class histogram of scores on ``[0, 1]``.

    Returns ``(edges, counts)`` with ``counts[k, b]`` the number of class-k
    samples in bin ``b``; the last bin is closed on the right.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(truths, dtype=np.int64)
    if np.any(s < 0) or np.any(s > 1):
        raise DomainError("scores must lie in [0, 1]")
    K = num_classes or max(int(y.max()) + 1 if y.size else 2, 2)
    edges = np.linspace(0.0, 1.0, bins + 1)
    counts = np.stack([np.histogram(s[y == k], bins=edges)[0] for k in range(K)])
    return edges, counts


def _check_ratings(r, name):
    r = np.asarray(r)
    if not np.issubdtype(r.dtype, np.integer):
        if np.any(r != np.round(r)):
            raise DomainError(f"{name} must be integer ratings")
        r = r.astype(np.int64)
    if np.any(r < 1) or np.any(r > 5):
        raise DomainError(f"{name} must lie in 1..5")
    return r


def off_by_one_accuracy(pred_ratings, true_ratings) -> float:
    """Fraction of predictions within one rating of the truth."""
    p = _check_ratings(pred_ratings, "pred_ratings")
    t = _check_ratings(true_ratings, "true_ratings")
    if p.shape != t.shape or p.size == 0:
        raise UsageError("ratings must be nonempty and of equal length")
    return float(np.mean(np.abs(p - t) <= 1))


def off_by_one_true_rates(pred_ratings, true_ratings) -> list:
    """Per-rating recall under the off-by-one rule (None for absent ratings)."""
    p = _check_ratings(pred_ratings, "pred_ratings")
    t = _check_ratings(true_ratings, "true_ratings")
    out = []
    for r in range(1, 6):
        sel = t == r
        out.append(float(np.mean(np.abs(p[sel] - r) <= 1)) if sel.any() else None)
    return out


def calibration_error(pred_probs, analytic_probs) -> float:
    """Mean absolute gap between predicted and reference class-1 probabilities.

    Two-column inputs are reduced to their class-1 column.
    """
    a = np.asarray(pred_probs, dtype=np.float64)
    b = np.asarray(analytic_probs, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, 1]
    if b.ndim == 2:
        b = b[:, 1]
    if a.shape != b.shape:
        raise ShapeError("probability arrays have different lengths")
    return float(np.mean(np.abs(a - b)))
