"""Deterministic minibatch SGD for the three objectives."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .diffcore import ParamVector, Scorer, ScorerSpec, forward, init_params
from .errors import ConfigurationError, NumericError, PreconditionError
from .io import jsonable
from .likelihoods import LikelihoodModel, log_prob
from .losses import LOSS_KINDS, compute_loss
from .marginal import MarginalTracker, PrevalenceSpec, estimate_marginal_eq3
from .metrics import MetricsReport, confusion, off_by_one_accuracy, off_by_one_true_rates, report
from .sampling import BatchSampler, Dataset

__all__ = ["TrainConfig", "TrainRecord", "TrainTrace", "TrainingDiverged",
           "train", "predict", "evaluate", "prevalence_for"]


@dataclass(frozen=True)
class TrainConfig:
    """Everything that defines a training run.

    ``tracker_init="warm"`` starts the marginal tracker at the importance
    weighted marginal of the initial model over the whole training set;
    ``"prevalence"`` starts it at ``true_marginal``.

    ``true_marginal`` defaults to the training set's apparent marginal.
    ``train_marginal`` is the label distribution of the minibatches; when
    left out it is uniform for the rebalanced sampler and the dataset's
    label frequencies for the natural one.
    """

    loss: str = "bayes_ig"
    scorer: ScorerSpec = field(default_factory=lambda: ScorerSpec("mlp", 2, (), 2, "relu"))
    likelihood: str = "softmax"
    num_classes: int = 2
    true_marginal: tuple | None = None
    train_marginal: tuple | None = None
    sampler: str = "rebalanced"
    batch_size: int = 32
    learning_rate: float = 0.05
    momentum: float = 0.9
    steps: int = 1000
    tracker_learning_rate: float = 0.1
    tracker_init: str = "warm"
    eval_every: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.loss not in LOSS_KINDS:
            raise ConfigurationError(f"unknown loss {self.loss!r}")
        if self.steps < 1:
            raise ConfigurationError("steps must be >= 1")
        if self.learning_rate < 0:
            raise ConfigurationError("learning_rate must be nonnegative")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigurationError("momentum must lie in [0, 1)")
        if self.tracker_init not in ("warm", "prevalence"):
            raise ConfigurationError("tracker_init must be 'warm' or 'prevalence'")
        if self.eval_every < 0:
            raise ConfigurationError("eval_every must be >= 0")
        lik = self.likelihood_model()
        if self.scorer.output_dim != lik.num_logits:
            raise ConfigurationError(
                f"scorer output_dim {self.scorer.output_dim} does not match the "
                f"{lik.kind} likelihood ({lik.num_logits} logits)")

    def likelihood_model(self) -> LikelihoodModel:
        return LikelihoodModel(self.likelihood, self.num_classes)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["scorer"] = self.scorer.to_dict()
        for k in ("true_marginal", "train_marginal"):
            if d[k] is not None:
                d[k] = [float(v) for v in d[k]]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "scorer" in d and isinstance(d["scorer"], dict):
            d["scorer"] = ScorerSpec.from_dict(d["scorer"])
        for k in ("true_marginal", "train_marginal"):
            if d.get(k) is not None:
                d[k] = tuple(float(v) for v in d[k])
        return cls(**d)

    def replace(self, **changes) -> "TrainConfig":
        return replace(self, **changes)


@dataclass
class TrainRecord:
    step: int
    train_loss: float
    report: MetricsReport
    tracked_marginal: list | None

    def to_dict(self) -> dict:
        return {"step": self.step, "train_loss": self.train_loss,
                "report": self.report.to_dict(), "tracked_marginal": self.tracked_marginal}


@dataclass
class TrainTrace:
    records: list = field(default_factory=list)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(jsonable(r.to_dict()), sort_keys=True) + "\n" for r in self.records)

    @property
    def final(self) -> TrainRecord:
        return self.records[-1]


class TrainingDiverged(NumericError):
    def __init__(self, step: int, diagnostics: dict):
        super().__init__(f"non-finite loss at step {step}: {diagnostics}")
        self.step = step
        self.diagnostics = diagnostics


def prevalence_for(config: TrainConfig, train_data: Dataset, sampler: BatchSampler) -> PrevalenceSpec:
    true = (np.asarray(config.true_marginal) if config.true_marginal is not None
            else train_data.apparent_marginal)
    return PrevalenceSpec(true, sampler.label_marginal(train_data))


def predict(params: ParamVector, spec: ScorerSpec, likelihood: LikelihoodModel, features) -> np.ndarray:
    """Class probabilities from the plain likelihood (no marginal correction)."""
    logits, _ = forward(params, spec, features)
    return np.exp(log_prob(likelihood, logits))


def evaluate(params: ParamVector, config: TrainConfig, data: Dataset,
             true_marginal=None) -> MetricsReport:
    """Metrics on ``data`` with prevalence weighting from ``true_marginal``."""
    lik = config.likelihood_model()
    probs = predict(params, config.scorer, lik, data.features)
    preds = np.argmax(probs, axis=1)
    counts = confusion(preds, data.labels, lik.num_classes)
    p_true = np.asarray(true_marginal if true_marginal is not None
                        else (config.true_marginal or data.apparent_marginal), dtype=np.float64)
    rep = report(counts, probs, data.labels, p_true[1] if lik.num_classes == 2 else p_true)
    if lik.kind == "onion_peeling":
        rep.off_by_one_acc = off_by_one_accuracy(preds + 1, data.labels + 1)
        rep.per_class_true_rates = off_by_one_true_rates(preds + 1, data.labels + 1)
    return rep


def train(config: TrainConfig, train_data: Dataset, eval_data: Dataset):
    """Run ``config.steps`` SGD-with-momentum updates.

    Each step draws a minibatch; for ``bayes_ig`` the marginal tracker is
    then moved one step towards the renormalized importance-weighted
    estimate of the marginal at the pre-step parameters, while the loss uses
    the tracker snapshot taken before that move.

    Returns
    -------
    params : ParamVector
    trace : TrainTrace
        One record every ``eval_every`` steps (if nonzero) plus the final step.
    """
    if len(train_data) == 0 or len(eval_data) == 0:
        raise PreconditionError("training and evaluation sets must be nonempty")
    lik = config.likelihood_model()
    if train_data.num_classes != lik.num_classes:
        raise ConfigurationError("dataset and likelihood disagree on the number of classes")

    init_seed, sampler_seed = np.random.SeedSequence(config.seed).spawn(2)
    params = init_params(config.scorer, np.random.default_rng(init_seed))
    sampler = BatchSampler(config.sampler, config.batch_size, np.random.default_rng(sampler_seed),
                           config.train_marginal)
    prev = prevalence_for(config, train_data, sampler)
    tracker = None
    if config.loss == "bayes_ig":
        if config.tracker_init == "warm":
            start = estimate_marginal_eq3(
                predict(params, config.scorer, lik, train_data.features), train_data.labels, prev)
            tracker = MarginalTracker.from_estimate(start, config.tracker_learning_rate)
        else:
            tracker = MarginalTracker.from_prevalence(prev.true_marginal, config.tracker_learning_rate)

    velocity = np.zeros_like(params.values)
    trace = TrainTrace()
    for step in range(1, config.steps + 1):
        X, y = sampler.next_batch(train_data)
        scorer = Scorer(config.scorer, params)
        snapshot = None
        if tracker is not None:
            snapshot = tracker.copy()
            batch_probs = predict(params, config.scorer, lik, X)
            tracker.update(estimate_marginal_eq3(batch_probs, y, prev).renormalized())
        out = compute_loss(config.loss, X, y, scorer, lik, prev, snapshot)
        if not math.isfinite(out.loss_value) or not np.all(np.isfinite(out.param_grad.values)):
            raise TrainingDiverged(step, out.diagnostics)
        velocity = config.momentum * velocity - config.learning_rate * out.param_grad.values
        params = params.with_values(params.values + velocity)

        if step == config.steps or (config.eval_every and step % config.eval_every == 0):
            trace.records.append(TrainRecord(
                step, out.loss_value, evaluate(params, config, eval_data, prev.true_marginal),
                None if tracker is None else tracker.estimate().tolist()))
    return params, trace
