import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biascorr.errors import DomainError, UsageError
from biascorr.metrics import (ConfusionCounts, calibration_error, confusion, off_by_one_accuracy,
                              off_by_one_true_rates, probability_histogram, report, roc_auc)


def test_confusion_diagonal(rng):
    y = rng.integers(0, 3, 50)
    c = confusion(y, y, 3)
    assert np.all(c.matrix == np.diag(np.diag(c.matrix)))
    assert c.total == 50


def test_all_negative_predictor():
    c = confusion(np.zeros(10, int), [0, 1] * 5)
    assert c.tp == 0 and c.fp == 0 and c.tn == 5 and c.fn == 5


def test_confusion_length_mismatch():
    with pytest.raises(UsageError):
        confusion([0, 1], [0])


def test_reference_row_prevalence_03():
    c = ConfusionCounts.from_binary(tp=712, fp=59, tn=941, fn=288)
    r = report(c, None, None, 0.3)
    assert r.w_acc == pytest.approx(0.8723, abs=1e-12)
    assert r.ba == pytest.approx(0.8265, abs=1e-12)


def test_reference_row_collapsed():
    c = ConfusionCounts.from_binary(tp=0, fp=0, tn=1000, fn=1000)
    r = report(c, None, None, 0.001)
    assert r.w_acc == pytest.approx(0.999, abs=1e-12)
    assert r.ba == 0.5
    assert r.ppv == 0.0 and r.flags["ppv_undefined"]


def test_perfect_predictor():
    y = np.array([0, 1, 1, 0, 1])
    r = report(confusion(y, y), np.eye(2)[y], y, 0.4)
    assert r.acc == r.w_acc == r.ba == r.tpr == r.tnr == r.ppv == r.npv == r.auc == 1.0
    assert r.exp_log_lik == 0.0


def test_prevalence_out_of_range():
    c = ConfusionCounts.from_binary(1, 1, 1, 1)
    for pi in (0.0, 1.0, -0.1):
        with pytest.raises(DomainError):
            report(c, None, None, pi)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 500), st.integers(0, 500), st.integers(1, 500), st.integers(0, 500),
       st.floats(1e-6, 1 - 1e-6))
def test_rate_identities(tp, fp, tn, fn, pi):
    r = report(ConfusionCounts.from_binary(tp, fp, tn, fn), None, None, pi)
    tpr, tnr = tp / (tp + fn), tn / (tn + fp)
    assert r.w_acc == pi * tpr + (1 - pi) * tnr
    assert r.ba == (tpr + tnr) / 2
    for v in (r.acc, r.w_acc, r.ba, r.ppv, r.npv, r.tpr, r.tnr):
        assert 0.0 <= v <= 1.0


def test_auc_examples(rng):
    _, auc = roc_auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1])
    assert auc == 1.0
    n = 10_000
    y = rng.integers(0, 2, n)
    _, auc = roc_auc(rng.random(n), y)
    n1, n0 = y.sum(), n - y.sum()
    sigma = np.sqrt((n0 + n1 + 1) / (12 * n0 * n1))
    assert abs(auc - 0.5) <= 3 * sigma


def test_auc_equals_mann_whitney(rng):
    for _ in range(20):
        n = int(rng.integers(4, 60))
        s = rng.integers(0, 6, n) / 5.0                 # plenty of ties
        y = rng.integers(0, 2, n)
        if y.min() == y.max():
            continue
        pos, neg = s[y == 1], s[y == 0]
        u = sum(1.0 if a > b else 0.5 if a == b else 0.0 for a in pos for b in neg)
        assert roc_auc(s, y)[1] == pytest.approx(u / (len(pos) * len(neg)), abs=1e-14)


def test_auc_monotone_invariance(rng):
    s = rng.random(200)
    y = rng.integers(0, 2, 200)
    assert roc_auc(s, y)[1] == roc_auc(np.exp(3 * s) - 7, y)[1]


def test_roc_shape(rng):
    curve, _ = roc_auc(rng.random(100), rng.integers(0, 2, 100))
    assert curve.fpr[0] == 0 and curve.tpr[0] == 0
    assert curve.fpr[-1] == 1 and curve.tpr[-1] == 1
    assert np.all(np.diff(curve.fpr) >= 0) and np.all(np.diff(curve.tpr) >= 0)


def test_auc_single_class():
    with pytest.raises(DomainError):
        roc_auc([0.1, 0.5], [1, 1])


def test_histogram(rng):
    _, c = probability_histogram(np.full(20, 0.5), np.arange(20) % 2, 10)
    assert np.count_nonzero(c.sum(axis=0)) == 1
    y = rng.integers(0, 2, 10_000)
    edges, c = probability_histogram(rng.random(10_000), y, 10)
    assert c.sum(axis=1).tolist() == np.bincount(y).tolist()
    sigma = np.sqrt(10_000 * 0.1 * 0.9)
    assert np.all(np.abs(c.sum(axis=0) - 1000) <= 3 * sigma)
    _, c = probability_histogram(np.array([0.0, 1.0]), [0, 1], 4)
    assert c[0, 0] == 1 and c[1, -1] == 1


def test_off_by_one(rng):
    t = rng.integers(1, 6, 100)
    assert off_by_one_accuracy(t, t) == 1.0
    assert off_by_one_accuracy([1], [5]) == 0.0
    # all-3 predictions over every rating equally often: 3 of 5 accepted
    assert off_by_one_accuracy(np.full(5, 3), np.arange(1, 6)) == pytest.approx(0.6)
    with pytest.raises(DomainError):
        off_by_one_accuracy([0, 1], [1, 1])
    with pytest.raises(DomainError):
        off_by_one_accuracy([2, 6], [1, 1])


def test_off_by_one_rates():
    rates = off_by_one_true_rates([1, 3, 3, 5], [1, 1, 3, 3])
    assert rates == [0.5, None, 0.5, None, None]


def test_calibration_error(rng):
    a = rng.random(30)
    assert calibration_error(a, a) == 0.0
    assert calibration_error(np.full(10, 0.3), np.full(10, 0.25)) == pytest.approx(0.05)
    b = rng.random(30)
    assert calibration_error(a, b) == pytest.approx(sum(abs(x - y) for x, y in zip(a, b)) / 30)
    P = np.column_stack([1 - a, a])
    assert calibration_error(P, b) == calibration_error(a, b)


def test_counts_merge(rng):
    p, t = rng.integers(0, 2, 100), rng.integers(0, 2, 100)
    whole = confusion(p, t, 2)
    parts = confusion(p[:40], t[:40], 2) + confusion(p[40:], t[40:], 2)
    assert np.array_equal(whole.matrix, parts.matrix)


def test_multiclass_weighted_accuracy():
    p = np.array([0, 1, 2, 2, 1, 0])
    t = np.array([0, 1, 2, 1, 1, 2])
    r = report(confusion(p, t, 3), None, None, [0.2, 0.5, 0.3])
    assert r.w_acc == pytest.approx(0.2 * 1 + 0.5 * 2 / 3 + 0.3 * 0.5)
    assert r.ba == pytest.approx((1 + 2 / 3 + 0.5) / 3)
