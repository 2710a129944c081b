import numpy as np
import pytest

from biascorr.diffcore import ScorerSpec, init_params
from biascorr.errors import ConfigurationError, PreconditionError
from biascorr.likelihoods import LikelihoodModel
from biascorr.marginal import PrevalenceSpec, estimate_marginal_eq3
from biascorr.sampling import (BatchSampler, Dataset, binary_overlap, binary_separable, ordinal5,
                               sample_biased_trainset, sample_population)
from biascorr.trainer import TrainConfig, evaluate, predict, train


@pytest.fixture(scope="module")
def overlap_data():
    m = binary_overlap(0.5)
    return (sample_biased_trainset(m, [0.5, 0.5], 400, 0),
            sample_biased_trainset(m, [0.5, 0.5], 400, 1))


def test_zero_learning_rate_is_a_no_op(overlap_data):
    tr, ev = overlap_data
    for loss in ("nll", "weighted", "bayes_ig"):
        cfg = TrainConfig(loss=loss, learning_rate=0.0, steps=20, true_marginal=(0.7, 0.3))
        params, _ = train(cfg, tr, ev)
        init_seed, _ = np.random.SeedSequence(cfg.seed).spawn(2)
        init = init_params(cfg.scorer, np.random.default_rng(init_seed))
        assert np.array_equal(params.values, init.values)


def test_same_seed_same_trace(overlap_data):
    tr, ev = overlap_data
    cfg = TrainConfig(loss="bayes_ig", steps=60, eval_every=20, true_marginal=(0.9, 0.1),
                      scorer=ScorerSpec("mlp", 2, (4,), 2))
    pa, ta = train(cfg, tr, ev)
    pb, tb = train(cfg, tr, ev)
    assert np.array_equal(pa.values, pb.values)
    assert ta.to_jsonl() == tb.to_jsonl()
    assert [r.step for r in ta.records] == [20, 40, 60]


def test_weighted_matches_nll_bit_for_bit(overlap_data):
    tr, ev = overlap_data
    base = TrainConfig(steps=50, eval_every=10, true_marginal=(0.5, 0.5))
    pa, ta = train(base.replace(loss="nll"), tr, ev)
    pb, tb = train(base.replace(loss="weighted"), tr, ev)
    assert np.array_equal(pa.values, pb.values)
    assert ta.to_jsonl() == tb.to_jsonl()


def test_separable_data_is_learned():
    m = binary_separable()
    tr = sample_biased_trainset(m, [0.5, 0.5], 1000, 0)
    ev = sample_biased_trainset(m, [0.5, 0.5], 2000, 1)
    _, trace = train(TrainConfig(loss="nll", steps=2000), tr, ev)
    assert trace.final.report.acc >= 0.99


def test_tracked_marginal_matches_prediction_implied():
    m = binary_overlap(0.3)
    tr = sample_biased_trainset(m, [0.5, 0.5], 1000, 0)
    ev = sample_population(m, 4000, 1)
    cfg = TrainConfig(loss="bayes_ig", true_marginal=(0.7, 0.3), steps=1000)
    params, trace = train(cfg, tr, ev)
    lik = cfg.likelihood_model()
    implied = predict(params, cfg.scorer, lik, ev.features).mean(axis=0)
    tracked = np.array(trace.final.tracked_marginal)
    assert np.max(np.abs(tracked - implied)) <= 0.05
    # the same check with fresh rebalanced batches through the importance-weighted estimator
    held = sample_biased_trainset(m, [0.5, 0.5], 1000, 2)
    sampler = BatchSampler("rebalanced", 32, 3)
    spec = PrevalenceSpec([0.7, 0.3], [0.5, 0.5])
    ests = [estimate_marginal_eq3(predict(params, cfg.scorer, lik, X), y, spec).probs
            for X, y in (sampler.next_batch(held) for _ in range(500))]
    assert np.max(np.abs(tracked - np.mean(ests, axis=0))) <= 0.05


def test_ordinal_training_reports_off_by_one():
    m = ordinal5()
    tr = sample_biased_trainset(m, m.true_marginal, 600, 0)
    ev = sample_biased_trainset(m, m.true_marginal, 600, 1)
    cfg = TrainConfig(loss="bayes_ig", likelihood="onion_peeling", num_classes=5,
                      true_marginal=tuple(m.true_marginal), scorer=ScorerSpec("mlp", 2, (), 4),
                      steps=300)
    _, trace = train(cfg, tr, ev)
    rep = trace.final.report
    assert rep.off_by_one_acc >= rep.acc and rep.off_by_one_acc > 0.8
    assert len(rep.per_class_true_rates) == 5


def test_zero_weights_give_uniform_prediction():
    spec = ScorerSpec("mlp", 2, (3,), 2)
    p = predict(init_params(spec, 0).zeros_like(), spec, LikelihoodModel(), np.ones((4, 2)))
    assert np.all(p == 0.5)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        TrainConfig(steps=0)
    with pytest.raises(ConfigurationError):
        TrainConfig(loss="hinge")
    with pytest.raises(ConfigurationError):
        TrainConfig(likelihood="onion_peeling", num_classes=5)       # scorer has 2 outputs
    cfg = TrainConfig(true_marginal=(0.9, 0.1))
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg


def test_empty_and_mismatched_data(overlap_data):
    tr, ev = overlap_data
    empty = Dataset(np.zeros((0, 2)), np.zeros(0, int), [0.5, 0.5])
    with pytest.raises(PreconditionError):
        train(TrainConfig(steps=1), empty, ev)
    with pytest.raises(ConfigurationError):
        train(TrainConfig(num_classes=3, scorer=ScorerSpec("mlp", 2, (), 3), steps=1), tr, ev)


def test_evaluate_uses_true_prevalence(overlap_data):
    tr, ev = overlap_data
    cfg = TrainConfig(loss="nll", steps=50)
    params, _ = train(cfg, tr, ev)
    a = evaluate(params, cfg, ev, [0.7, 0.3])
    assert a.w_acc == pytest.approx(0.3 * a.tpr + 0.7 * a.tnr, abs=1e-15)
