"""Experiment configuration, single runs and prevalence sweeps.

An experiment config is a JSON document::

    {
      "data": {"scenario": "binary-overlap", "n_train": 1000, "n_eval": 2000,
               "ptilde": [0.5, 0.5], "seed": 0},
      "train": {"loss": "bayes_ig", "true_marginal": [0.7, 0.3], ...},
      "eval": {"prevalences": [0.3, 0.001], "histogram_bins": 20},
      "output_dir": "out"
    }

``data`` may instead point at CSV files (``train_csv`` / ``eval_csv``).
Unknown keys anywhere are rejected.
"""
from __future__ import annotations

import copy
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from .errors import ConfigurationError
from .metrics import calibration_error, probability_histogram, roc_auc
from .sampling import (Dataset, analytic_posterior, make_scenario, sample_biased_trainset,
                       sample_population)
from .trainer import TrainConfig, evaluate, predict, train

__all__ = [
    "CONFIG_SCHEMA",
    "DEFAULT_CONFIG",
    "SWEEP_COLUMNS",
    "validate_config",
    "resolve_train_config",
    "build_datasets",
    "RunResult",
    "run_single",
    "run_sweep",
]

_prob_vector = {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 2}

_SCORER_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["mlp", "kernel_head", "composite"]},
        "input_dim": {"type": "integer", "minimum": 1},
        "hidden_dims": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "output_dim": {"type": "integer", "minimum": 1},
        "activation": {"enum": ["relu", "tanh"]},
        "kernel_units": {"type": "integer", "minimum": 1},
        "bandwidth": {"type": "number", "exclusiveMinimum": 0},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["data", "train"],
    "properties": {
        "data": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "scenario": {"enum": ["binary-overlap", "binary-separable", "ordinal5"]},
                "n_train": {"type": "integer", "minimum": 1},
                "n_eval": {"type": "integer", "minimum": 1},
                "ptilde": _prob_vector,
                "eval_ptilde": _prob_vector,
                "eval_population": {"type": "boolean"},
                "seed": {"type": "integer", "minimum": 0},
                "train_csv": {"type": "string"},
                "eval_csv": {"type": "string"},
            },
        },
        "train": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "loss": {"enum": ["nll", "weighted", "bayes_ig"]},
                "scorer": _SCORER_SCHEMA,
                "likelihood": {"enum": ["softmax", "bernoulli", "onion_peeling"]},
                "num_classes": {"type": "integer", "minimum": 2},
                "true_marginal": _prob_vector,
                "train_marginal": _prob_vector,
                "sampler": {"enum": ["rebalanced", "natural"]},
                "batch_size": {"type": "integer", "minimum": 1},
                "learning_rate": {"type": "number", "minimum": 0},
                "momentum": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "steps": {"type": "integer", "minimum": 1},
                "tracker_learning_rate": {"type": "number", "exclusiveMinimum": 0},
                "tracker_init": {"enum": ["warm", "prevalence"]},
                "eval_every": {"type": "integer", "minimum": 0},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "eval": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "prevalences": {
                    "type": "array", "minItems": 1,
                    "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                },
                "histogram_bins": {"type": "integer", "minimum": 1},
            },
        },
        "output_dir": {"type": "string"},
    },
}

DEFAULT_CONFIG = {
    "data": {"scenario": "binary-overlap", "n_train": 1000, "n_eval": 2000,
             "ptilde": [0.5, 0.5], "seed": 0},
    "train": {"loss": "bayes_ig"},
    "eval": {"prevalences": [0.3, 0.001], "histogram_bins": 20},
    "output_dir": "out",
}

SWEEP_COLUMNS = ("prevalence", "loss", "seed", "acc", "w_acc", "ba", "ppv", "npv",
                 "tpr", "tnr", "auc", "exp_log_lik", "status")


def validate_config(cfg: dict) -> dict:
    """Schema-check ``cfg``; raise ConfigurationError naming the offending field."""
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigurationError(f"config field {where}: {exc.message}") from None
    data = cfg["data"]
    if "scenario" in data and ("train_csv" in data or "eval_csv" in data):
        raise ConfigurationError("config field data: give either a scenario or CSV paths, not both")
    if "scenario" not in data and not ("train_csv" in data and "eval_csv" in data):
        raise ConfigurationError("config field data: needs a scenario or both train_csv and eval_csv")
    return cfg


def resolve_train_config(cfg: dict, **overrides) -> TrainConfig:
    """TrainConfig from the ``train`` section, filling likelihood/scorer defaults
    from the data scenario."""
    t = copy.deepcopy(cfg["train"])
    t.update({k: v for k, v in overrides.items() if v is not None})
    scenario = cfg["data"].get("scenario")
    if scenario == "ordinal5":
        t.setdefault("likelihood", "onion_peeling")
        t.setdefault("num_classes", 5)
    lik = t.get("likelihood", "softmax")
    n_logits = {"softmax": t.get("num_classes", 2), "bernoulli": 1, "onion_peeling": 4}[lik]
    scorer = dict(t.get("scorer", {}))
    scorer.setdefault("kind", "mlp")
    scorer.setdefault("input_dim", 2)
    scorer.setdefault("hidden_dims", [])
    scorer.setdefault("output_dim", n_logits)
    t["scorer"] = scorer
    return TrainConfig.from_dict(t)


def _ptilde_for(cfg_data: dict, model) -> np.ndarray:
    if "ptilde" in cfg_data:
        return np.asarray(cfg_data["ptilde"], dtype=np.float64)
    return model.true_marginal


def build_datasets(cfg: dict, run_seed: int = 0, true_marginal=None):
    """Training and evaluation sets for one run.

    Scenario data is regenerated from ``data.seed`` and ``run_seed``, so every
    run of a sweep gets its own draw. Evaluation rows follow ``eval_ptilde``
    (default: the training ``ptilde``) or, with ``eval_population``, the true
    population at ``true_marginal``. Returns ``(train, eval, population_model)``;
    the model is None for CSV data.
    """
    d = cfg["data"]
    if "train_csv" in d:
        tr = Dataset.from_csv(d["train_csv"])
        ev = Dataset.from_csv(d["eval_csv"], num_classes=tr.num_classes)
        return tr, ev, None
    model = make_scenario(d["scenario"])
    if true_marginal is not None:
        model = model.with_marginal(true_marginal)
    base = int(d.get("seed", 0))
    ptilde = _ptilde_for(d, model)
    tr = sample_biased_trainset(model, ptilde, int(d.get("n_train", 1000)), [base, run_seed, 0])
    n_eval = int(d.get("n_eval", 2000))
    if d.get("eval_population", False):
        ev = sample_population(model, n_eval, [base, run_seed, 1])
    else:
        ev = sample_biased_trainset(model, np.asarray(d.get("eval_ptilde", ptilde)), n_eval,
                                    [base, run_seed, 1])
    return tr, ev, model


@dataclass
class RunResult:
    prevalence: float
    loss: str
    seed: int
    status: str = "ok"
    report: dict | None = None
    calibration_error: float | None = None
    roc: list = field(default_factory=list)            # (threshold, tpr, fpr)
    histogram: tuple | None = None                     # (edges, counts)
    tracked_marginal: list | None = None

    def row(self) -> dict:
        r = self.report or {}
        out = {"prevalence": self.prevalence, "loss": self.loss, "seed": self.seed}
        for k in SWEEP_COLUMNS[3:-1]:
            out[k] = r.get(k)
        out["status"] = self.status
        return out


def run_single(cfg: dict, prevalence: float, loss: str, seed: int) -> RunResult:
    """Train one binary model at true prevalence ``prevalence`` and evaluate it."""
    res = RunResult(prevalence, loss, seed)
    try:
        true_marginal = (1.0 - prevalence, prevalence)
        tcfg = resolve_train_config(cfg, loss=loss, seed=seed, true_marginal=list(true_marginal))
        tr, ev, model = build_datasets(cfg, seed)
        params, trace = train(tcfg, tr, ev)
        rep = trace.final.report
        res.report = rep.to_dict()
        res.tracked_marginal = trace.final.tracked_marginal
        probs = predict(params, tcfg.scorer, tcfg.likelihood_model(), ev.features)
        if model is not None:
            res.calibration_error = calibration_error(
                probs, analytic_posterior(model, ev.features, true_marginal))
        if np.unique(ev.labels).size == 2:
            curve, _ = roc_auc(probs[:, 1], ev.labels)
            res.roc = list(curve.rows())
        bins = int(cfg.get("eval", {}).get("histogram_bins", 20))
        res.histogram = probability_histogram(probs[:, 1], ev.labels, bins, 2)
    except Exception as exc:  # recorded per run; the sweep carries on
        res.status = f"error: {type(exc).__name__}: {exc}"
    return res


def _run_job(args):
    return run_single(*args)


def run_sweep(cfg: dict, prevalences, losses=("weighted", "bayes_ig"), seeds=range(5),
              jobs: int | None = None) -> list[RunResult]:
    """Every prevalence x loss x seed combination, in that nesting order."""
    jobs_list = [(cfg, float(p), loss, int(s)) for p in prevalences for loss in losses for s in seeds]
    if jobs is None:
        jobs = min(len(jobs_list), os.cpu_count() or 1)
    if jobs <= 1 or len(jobs_list) <= 1:
        return [_run_job(j) for j in jobs_list]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_job, jobs_list))


def median(values) -> float:
    vals = [v for v in values if v is not None and not math.isnan(v)]
    return float(np.median(vals)) if vals else float("nan")
