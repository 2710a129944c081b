"""Synthetic populations, label-biased training sets and minibatch samplers.

A :class:`PopulationModel` is a per-class Gaussian mixture plus the true
label marginal ``p_Y``. Two ways of drawing data from it:

* :func:`sample_population` draws ``(x, y)`` pairs as the population does.
* :func:`sample_biased_trainset` fixes the label counts first (an exact
  quota of a designer-chosen ``ptilde``) and only then draws features from
  the true class conditionals. This is label-based sampling bias: ``p(x|y)``
  is untouched, ``p(y)`` is not.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigurationError, PreconditionError, ShapeError, UsageError

__all__ = [
    "PopulationModel",
    "Dataset",
    "BatchSampler",
    "binary_overlap",
    "binary_separable",
    "ordinal5",
    "SCENARIOS",
    "make_scenario",
    "largest_remainder_counts",
    "sample_population",
    "sample_biased_trainset",
    "next_batch",
    "analytic_posterior",
]


@dataclass
class PopulationModel:
    """Class-conditional Gaussian mixtures with a true label marginal.

    ``means[k]`` is ``(M_k, d)``, ``covs[k]`` is ``(M_k, d, d)`` and
    ``weights[k]`` is ``(M_k,)`` for class ``k``.
    """

    means: list
    covs: list
    weights: list
    true_marginal: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        K = len(self.means)
        if K < 2 or len(self.covs) != K or len(self.weights) != K:
            raise ConfigurationError("need matching means/covs/weights for at least 2 classes")
        self.means = [np.atleast_2d(np.asarray(m, dtype=np.float64)) for m in self.means]
        self.covs = [np.asarray(c, dtype=np.float64).reshape(m.shape + (m.shape[1],))
                     for c, m in zip(self.covs, self.means)]
        self.weights = [np.asarray(w, dtype=np.float64).reshape(-1) for w in self.weights]
        self.true_marginal = np.asarray(self.true_marginal, dtype=np.float64)
        d = self.means[0].shape[1]
        self._chol = []
        for k in range(K):
            if self.means[k].shape[1] != d:
                raise ConfigurationError("all components must share the feature dimension")
            if self.weights[k].shape != (self.means[k].shape[0],):
                raise ConfigurationError(f"class {k}: one weight per mixture component")
            if np.any(self.weights[k] < 0) or abs(self.weights[k].sum() - 1.0) > 1e-12:
                raise ConfigurationError(f"class {k}: mixture weights must sum to 1")
            chols = []
            for c in self.covs[k]:
                try:
                    chols.append(np.linalg.cholesky(c))
                except np.linalg.LinAlgError:
                    raise ConfigurationError(
                        f"class {k}: covariance is not positive definite") from None
            self._chol.append(np.array(chols))
        if self.true_marginal.shape != (K,) or np.any(self.true_marginal < 0) \
                or abs(self.true_marginal.sum() - 1.0) > 1e-12:
            raise ConfigurationError("true_marginal must be a probability vector over the classes")

    @property
    def num_classes(self) -> int:
        return len(self.means)

    @property
    def dim(self) -> int:
        return self.means[0].shape[1]

    def with_marginal(self, true_marginal) -> "PopulationModel":
        return PopulationModel(self.means, self.covs, self.weights, true_marginal, self.name)

    def sample_class(self, k: int, n: int, rng: np.random.Generator) -> np.ndarray:
        comp = rng.choice(len(self.weights[k]), size=n, p=self.weights[k])
        z = rng.standard_normal((n, self.dim))
        return self.means[k][comp] + np.einsum("nij,nj->ni", self._chol[k][comp], z)

    def class_log_density(self, x) -> np.ndarray:
        """``log p(x | y=k)`` for every class, shape ``(N, K)``."""
        X = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise ShapeError(f"expected {self.dim} features, got {X.shape[1]}")
        out = np.empty((X.shape[0], self.num_classes))
        for k in range(self.num_classes):
            comp = []
            for mu, L, w in zip(self.means[k], self._chol[k], self.weights[k]):
                r = np.linalg.solve(L, (X - mu).T)
                logdet = 2.0 * np.log(np.diag(L)).sum()
                comp.append(np.log(w) - 0.5 * (r * r).sum(axis=0)
                            - 0.5 * logdet - 0.5 * self.dim * np.log(2 * np.pi))
            out[:, k] = logsumexp(np.array(comp), axis=0)
        return out

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "means": [m.tolist() for m in self.means],
            "covs": [c.tolist() for c in self.covs],
            "weights": [w.tolist() for w in self.weights],
            "true_marginal": self.true_marginal.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PopulationModel":
        return cls(d["means"], d["covs"], d["weights"], d["true_marginal"], d.get("name", "custom"))


def binary_overlap(prevalence: float = 0.5) -> PopulationModel:
    """Default desk scenario: unit-covariance Gaussians at (-1, 0) and (+1, 0)."""
    eye = np.eye(2)
    return PopulationModel(
        means=[[[-1.0, 0.0]], [[1.0, 0.0]]],
        covs=[[eye], [eye]],
        weights=[[1.0], [1.0]],
        true_marginal=[1.0 - prevalence, prevalence],
        name="binary-overlap",
    )


def binary_separable(prevalence: float = 0.5) -> PopulationModel:
    """Well separated classes, means at (-3, 0) and (+3, 0)."""
    eye = np.eye(2)
    return PopulationModel(
        means=[[[-3.0, 0.0]], [[3.0, 0.0]]],
        covs=[[eye], [eye]],
        weights=[[1.0], [1.0]],
        true_marginal=[1.0 - prevalence, prevalence],
        name="binary-separable",
    )


ORDINAL5_MARGINAL = (0.075, 0.2, 0.45, 0.2, 0.075)


def ordinal5(spacing: float = 1.5) -> PopulationModel:
    """Five ratings with collinear unit-covariance Gaussians, rating 3 at the origin."""
    eye = np.eye(2)
    return PopulationModel(
        means=[[[(r - 2) * spacing, 0.0]] for r in range(5)],
        covs=[[eye]] * 5,
        weights=[[1.0]] * 5,
        true_marginal=ORDINAL5_MARGINAL,
        name="ordinal5",
    )


SCENARIOS = {
    "binary-overlap": binary_overlap,
    "binary-separable": binary_separable,
    "ordinal5": ordinal5,
}


def make_scenario(name: str, prevalence: float | None = None) -> PopulationModel:
    if name not in SCENARIOS:
        raise ConfigurationError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    if prevalence is None:
        return SCENARIOS[name]()
    if name == "ordinal5":
        raise ConfigurationError("ordinal5 has a fixed marginal; prevalence does not apply")
    return SCENARIOS[name](prevalence)


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    apparent_marginal: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.intp)
        self.apparent_marginal = np.asarray(self.apparent_marginal, dtype=np.float64)
        if self.features.ndim != 2 or self.labels.shape != (self.features.shape[0],):
            raise ShapeError("features must be (N, d) with one label per row")

    def __len__(self) -> int:
        return self.labels.size

    @property
    def num_classes(self) -> int:
        return self.apparent_marginal.size

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def to_csv(self, path, header_comment: str | None = None) -> None:
        """Write ``f0..f{d-1},label`` rows plus a JSON provenance sidecar."""
        path = Path(path)
        d = self.features.shape[1]
        lines = []
        if header_comment:
            lines.append(f"# {header_comment}")
        lines.append(",".join([f"f{j}" for j in range(d)] + ["label"]))
        for row, lab in zip(self.features, self.labels):
            lines.append(",".join([repr(float(v)) for v in row] + [str(int(lab))]))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        sidecar = {
            "apparent_marginal": self.apparent_marginal.tolist(),
            "provenance": self.provenance,
        }
        _sidecar_path(path).write_text(
            json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def from_csv(cls, path, num_classes: int | None = None) -> "Dataset":
        path = Path(path)
        rows = [ln for ln in path.read_text(encoding="utf-8").splitlines()
                if ln.strip() and not ln.startswith("#")]
        header = rows[0].split(",")
        if header[-1] != "label" or header[:-1] != [f"f{j}" for j in range(len(header) - 1)]:
            raise ConfigurationError(f"{path}: header must be f0..f{{d-1}},label")
        body = [r.split(",") for r in rows[1:]]
        X = np.array([[float(v) for v in r[:-1]] for r in body], dtype=np.float64)
        y = np.array([int(r[-1]) for r in body], dtype=np.intp)
        provenance, marginal = {}, None
        side = _sidecar_path(path)
        if side.exists():
            meta = json.loads(side.read_text(encoding="utf-8"))
            provenance = meta.get("provenance", {})
            marginal = meta.get("apparent_marginal")
        if marginal is None:
            K = num_classes or int(y.max()) + 1
            marginal = np.bincount(y, minlength=K) / y.size
        return cls(X.reshape(len(body), len(header) - 1), y, marginal, provenance)


def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(".json")


def largest_remainder_counts(p, n: int) -> np.ndarray:
    """Integer counts summing to ``n`` closest to ``n * p`` (Hamilton method).

    Ties in the fractional remainders go to the lower class index.
    """
    p = np.asarray(p, dtype=np.float64)
    raw = n * p
    counts = np.floor(raw).astype(np.int64)
    short = n - int(counts.sum())
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[:short]] += 1
    return counts


def sample_population(model: PopulationModel, n: int, seed) -> Dataset:
    """I.i.d. draws from the population: label from ``p_Y``, then features."""
    if n < 1:
        raise UsageError("n must be >= 1")
    rng = np.random.default_rng(seed)
    labels = rng.choice(model.num_classes, size=n, p=model.true_marginal)
    X = np.empty((n, model.dim))
    for k in range(model.num_classes):
        idx = np.flatnonzero(labels == k)
        if idx.size:
            X[idx] = model.sample_class(k, idx.size, rng)
    return Dataset(X, labels, model.true_marginal.copy(), {
        "kind": "population", "seed": _seed_repr(seed), "n": int(n), "model": model.to_dict(),
    })


def sample_biased_trainset(model: PopulationModel, ptilde, n: int, seed) -> Dataset:
    """Label-biased training set with exact label quota ``round(n * ptilde)``."""
    ptilde = np.asarray(ptilde, dtype=np.float64)
    if n < 1:
        raise UsageError("n must be >= 1")
    if ptilde.shape != (model.num_classes,) or np.any(ptilde < 0) \
            or abs(ptilde.sum() - 1.0) > 1e-12:
        raise ConfigurationError("ptilde must be a probability vector over the model's classes")
    rng = np.random.default_rng(seed)
    counts = largest_remainder_counts(ptilde, n)
    labels = rng.permutation(np.repeat(np.arange(model.num_classes), counts))
    X = np.empty((n, model.dim))
    for k in range(model.num_classes):
        idx = np.flatnonzero(labels == k)
        if idx.size:
            X[idx] = model.sample_class(k, idx.size, rng)
    return Dataset(X, labels, counts / n, {
        "kind": "label_biased", "seed": _seed_repr(seed), "n": int(n),
        "ptilde": ptilde.tolist(), "model": model.to_dict(),
    })


def _seed_repr(seed):
    if isinstance(seed, (list, tuple)):
        return [int(s) for s in seed]
    return seed if isinstance(seed, (int, type(None))) else repr(seed)


class BatchSampler:
    """Minibatch stream over a dataset.

    ``rebalanced`` draws each row's class from ``batch_marginal`` (uniform by
    default) and then a uniform row of that class; ``natural`` draws rows
    uniformly. Both sample with replacement.
    """

    def __init__(self, mode: str = "rebalanced", batch_size: int = 32, seed=0,
                 batch_marginal=None):
        if mode not in ("rebalanced", "natural"):
            raise ConfigurationError(f"unknown sampler mode {mode!r}")
        if batch_size < 1:
            raise ConfigurationError("batch_size must be positive")
        self.mode = mode
        self.batch_size = int(batch_size)
        self.batch_marginal = None if batch_marginal is None else np.asarray(batch_marginal, float)
        self.rng = np.random.default_rng(seed)
        self._index_cache: tuple[int, list] | None = None

    def label_marginal(self, data: Dataset) -> np.ndarray:
        """Distribution of labels in the batches this sampler produces for ``data``."""
        if self.mode == "natural":
            return data.class_counts() / len(data)
        if self.batch_marginal is not None:
            return self.batch_marginal
        return np.full(data.num_classes, 1.0 / data.num_classes)

    def _class_rows(self, data: Dataset):
        if self._index_cache is None or self._index_cache[0] != id(data):
            rows = [np.flatnonzero(data.labels == k) for k in range(data.num_classes)]
            self._index_cache = (id(data), rows)
        return self._index_cache[1]

    def next_indices(self, data: Dataset) -> np.ndarray:
        if len(data) == 0:
            raise PreconditionError("cannot sample from an empty dataset")
        if self.mode == "natural":
            return self.rng.integers(0, len(data), size=self.batch_size)
        rows = self._class_rows(data)
        p = self.label_marginal(data)
        if p.shape != (data.num_classes,):
            raise ConfigurationError("batch marginal does not match the dataset's classes")
        for k, r in enumerate(rows):
            if p[k] > 0 and r.size == 0:
                raise PreconditionError(f"rebalanced sampling needs class {k}, absent from the dataset")
        classes = self.rng.choice(data.num_classes, size=self.batch_size, p=p)
        out = np.empty(self.batch_size, dtype=np.intp)
        for k in np.unique(classes):
            where = np.flatnonzero(classes == k)
            out[where] = rows[k][self.rng.integers(0, rows[k].size, size=where.size)]
        return out

    def next_batch(self, data: Dataset) -> tuple[np.ndarray, np.ndarray]:
        idx = self.next_indices(data)
        return data.features[idx], data.labels[idx]


def next_batch(sampler: BatchSampler, data: Dataset) -> tuple[np.ndarray, np.ndarray]:
    return sampler.next_batch(data)


def analytic_posterior(model: PopulationModel, x, at_marginal) -> np.ndarray:
    """Bayes posterior over classes at ``x`` under the marginal ``at_marginal``.

    Returns ``(K,)`` for a single point or ``(N, K)`` for a batch. Rows where
    every class density underflows fall back to ``at_marginal`` with a
    warning.
    """
    prior = np.asarray(at_marginal, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    logdens = model.class_log_density(x)
    with np.errstate(divide="ignore"):
        logjoint = logdens + np.log(prior)
    norm = logsumexp(logjoint, axis=1, keepdims=True)
    bad = ~np.isfinite(norm[:, 0])
    post = np.exp(logjoint - np.where(bad[:, None], 0.0, norm))
    if np.any(bad):
        warnings.warn(f"{bad.sum()} point(s) have zero density under every class; "
                      "returning the marginal for them", RuntimeWarning, stacklevel=2)
        post[bad] = prior
    return post[0] if single else post
