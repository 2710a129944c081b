"""Small differentiable scorers with hand-written backward passes.

Two scorer families are provided, plus their sum:

* ``mlp``: a fully connected network ending in a linear layer that outputs
  the logits.
* ``kernel_head``: ``logits(x) = sum_u K(g_u(x)) * l_u(x)`` where ``g_u`` is a
  scalar affine map, ``l_u`` an affine map to the logit space and
  ``K(t) = exp(-(t / bandwidth)**2)``.
* ``composite``: ``mlp(x) + kernel_head(x)`` on the same input.

Everything is float64. Parameters live in a single flat vector with a named
segment layout so that optimizers and finite-difference checks can treat the
model as a plain vector.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericError, ShapeError, UsageError

__all__ = [
    "Segment",
    "ParamVector",
    "ScorerSpec",
    "ForwardTape",
    "Scorer",
    "param_layout",
    "init_params",
    "forward",
    "backward",
]

_KINDS = ("mlp", "kernel_head", "composite")
_ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class Segment:
    name: str
    offset: int
    shape: tuple[int, ...]

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))


@dataclass
class ParamVector:
    """Flat float64 parameter vector with a named segment layout."""

    values: np.ndarray
    layout: tuple[Segment, ...]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ShapeError("parameter values must be a flat vector")
        total = sum(s.size for s in self.layout)
        if total != self.values.size:
            raise ShapeError(
                f"layout describes {total} values but vector has {self.values.size}")
        if not np.all(np.isfinite(self.values)):
            raise NumericError("parameter vector has non-finite entries")

    def __len__(self) -> int:
        return self.values.size

    def segment(self, name: str) -> np.ndarray:
        """Reshaped view onto one named segment (writes go through)."""
        for seg in self.layout:
            if seg.name == name:
                return self.values[seg.offset:seg.offset + seg.size].reshape(seg.shape)
        raise KeyError(name)

    def names(self) -> list[str]:
        return [s.name for s in self.layout]

    def copy(self) -> "ParamVector":
        return ParamVector(self.values.copy(), self.layout)

    def with_values(self, values) -> "ParamVector":
        return ParamVector(np.array(values, dtype=np.float64), self.layout)

    def zeros_like(self) -> "ParamVector":
        return ParamVector(np.zeros_like(self.values), self.layout)


@dataclass(frozen=True)
class ScorerSpec:
    """Architecture of a scorer.

    ``hidden_dims`` only applies to the MLP part (an empty tuple gives a
    linear model). ``kernel_units`` and ``bandwidth`` only apply to the
    kernel head.
    """

    kind: str = "mlp"
    input_dim: int = 2
    hidden_dims: tuple[int, ...] = ()
    output_dim: int = 2
    activation: str = "relu"
    kernel_units: int = 8
    bandwidth: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.kind not in _KINDS:
            raise ConfigurationError(f"unknown scorer kind {self.kind!r}; expected one of {_KINDS}")
        if self.activation not in _ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")
        if int(self.input_dim) < 1:
            raise ConfigurationError("input_dim must be a positive integer")
        if int(self.output_dim) < 1:
            raise ConfigurationError("output_dim must be >= 1")
        if any(h < 1 for h in self.hidden_dims):
            raise ConfigurationError("hidden_dims entries must be positive integers")
        if self.kind in ("kernel_head", "composite"):
            if int(self.kernel_units) < 1:
                raise ConfigurationError("kernel_units must be >= 1")
            if not self.bandwidth > 0:
                raise ConfigurationError("bandwidth must be positive")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "input_dim": self.input_dim,
            "hidden_dims": list(self.hidden_dims),
            "output_dim": self.output_dim,
            "activation": self.activation,
            "kernel_units": self.kernel_units,
            "bandwidth": self.bandwidth,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScorerSpec":
        d = dict(d)
        if "hidden_dims" in d:
            d["hidden_dims"] = tuple(d["hidden_dims"])
        return cls(**d)


def _mlp_segments(spec: ScorerSpec, prefix: str):
    dims = (spec.input_dim, *spec.hidden_dims, spec.output_dim)
    out = []
    for i in range(len(dims) - 1):
        out.append((f"{prefix}W{i}", (dims[i + 1], dims[i]), dims[i]))
        out.append((f"{prefix}b{i}", (dims[i + 1],), None))
    return out


def _kernel_segments(spec: ScorerSpec, prefix: str):
    H, d, k = spec.kernel_units, spec.input_dim, spec.output_dim
    return [
        (f"{prefix}G", (H, d), d),
        (f"{prefix}gb", (H,), None),
        (f"{prefix}L", (H, k, d), d),
        (f"{prefix}lb", (H, k), None),
    ]


def _segment_plan(spec: ScorerSpec):
    # (name, shape, fan_in or None for biases)
    if spec.kind == "mlp":
        return _mlp_segments(spec, "")
    if spec.kind == "kernel_head":
        return _kernel_segments(spec, "")
    return _mlp_segments(spec, "mlp.") + _kernel_segments(spec, "kernel.")


def param_layout(spec: ScorerSpec) -> tuple[Segment, ...]:
    layout, offset = [], 0
    for name, shape, _ in _segment_plan(spec):
        seg = Segment(name, offset, tuple(shape))
        layout.append(seg)
        offset += seg.size
    return tuple(layout)


def init_params(spec: ScorerSpec, seed: int) -> ParamVector:
    """Draw initial parameters.

    Weights are uniform on ``[-sqrt(6/fan_in), sqrt(6/fan_in)]``, biases are
    zero. The draw is a pure function of ``(spec, seed)``.
    """
    if not isinstance(spec, ScorerSpec):
        raise ConfigurationError("spec must be a ScorerSpec")
    rng = np.random.default_rng(seed)
    layout = param_layout(spec)
    values = np.zeros(sum(s.size for s in layout))
    for seg, (_, _, fan_in) in zip(layout, _segment_plan(spec)):
        if fan_in is None:
            continue
        bound = np.sqrt(6.0 / fan_in)
        values[seg.offset:seg.offset + seg.size] = rng.uniform(-bound, bound, seg.size)
    return ParamVector(values, layout)


class ForwardTape:
    """Intermediate values of one forward call, consumed by ``backward``."""

    def __init__(self, spec: ScorerSpec, params: ParamVector, x: np.ndarray, single: bool):
        self.spec = spec
        self.params = params
        self.x = x
        self.single = single
        self.mlp_cache: list | None = None
        self.kernel_cache: tuple | None = None
        self.consumed = False


def _act(spec, z):
    if spec.activation == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _act_grad(spec, z, a):
    if spec.activation == "relu":
        return (z > 0.0).astype(np.float64)
    return 1.0 - a * a


def _mlp_forward(spec, params, x, prefix, tape):
    n_layers = len(spec.hidden_dims) + 1
    a = x
    cache = []
    for i in range(n_layers):
        W = params.segment(f"{prefix}W{i}")
        b = params.segment(f"{prefix}b{i}")
        z = a @ W.T + b
        if i < n_layers - 1:
            h = _act(spec, z)
            cache.append((a, z, h))
            a = h
        else:
            cache.append((a, None, None))
            a = z
    tape.mlp_cache = cache
    return a


def _mlp_backward(spec, params, tape, dout, prefix, grad):
    cache = tape.mlp_cache
    n_layers = len(cache)
    delta = dout
    for i in reversed(range(n_layers)):
        a_in, _, _ = cache[i]
        grad.segment(f"{prefix}W{i}")[...] += delta.T @ a_in
        grad.segment(f"{prefix}b{i}")[...] += delta.sum(axis=0)
        if i > 0:
            W = params.segment(f"{prefix}W{i}")
            _, z_prev, h_prev = cache[i - 1]
            delta = (delta @ W) * _act_grad(spec, z_prev, h_prev)


def _kernel_forward(spec, params, x, prefix, tape):
    G = params.segment(f"{prefix}G")
    gb = params.segment(f"{prefix}gb")
    L = params.segment(f"{prefix}L")
    lb = params.segment(f"{prefix}lb")
    g = x @ G.T + gb                                   # (N, H)
    kern = np.exp(-(g / spec.bandwidth) ** 2)          # (N, H)
    lin = np.einsum("hkd,nd->nhk", L, x) + lb          # (N, H, K)
    tape.kernel_cache = (g, kern, lin)
    return np.einsum("nh,nhk->nk", kern, lin)


def _kernel_backward(spec, tape, dout, prefix, grad):
    x = tape.x
    g, kern, lin = tape.kernel_cache
    # d logits / d lin
    dlin = kern[:, :, None] * dout[:, None, :]                     # (N, H, K)
    grad.segment(f"{prefix}lb")[...] += dlin.sum(axis=0)
    grad.segment(f"{prefix}L")[...] += np.einsum("nhk,nd->hkd", dlin, x)
    # d logits / d g through K'(g) = -2 g / s^2 * K(g)
    dkern = np.einsum("nk,nhk->nh", dout, lin)
    dg = dkern * kern * (-2.0 * g / spec.bandwidth ** 2)
    grad.segment(f"{prefix}gb")[...] += dg.sum(axis=0)
    grad.segment(f"{prefix}G")[...] += dg.T @ x


def _check_params(params: ParamVector, spec: ScorerSpec):
    if params.layout != param_layout(spec):
        raise ShapeError("parameter layout does not match scorer spec")


def forward(params: ParamVector, spec: ScorerSpec, x) -> tuple[np.ndarray, ForwardTape]:
    """Evaluate the scorer.

    ``x`` may be a single feature vector of length ``input_dim`` or an
    ``(N, input_dim)`` batch; the logits have the matching leading shape.
    """
    _check_params(params, spec)
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != spec.input_dim:
        raise ShapeError(f"expected features with {spec.input_dim} columns, got shape {x.shape}")
    tape = ForwardTape(spec, params, X, single)
    if spec.kind == "mlp":
        out = _mlp_forward(spec, params, X, "", tape)
    elif spec.kind == "kernel_head":
        out = _kernel_forward(spec, params, X, "", tape)
    else:
        out = (_mlp_forward(spec, params, X, "mlp.", tape)
               + _kernel_forward(spec, params, X, "kernel.", tape))
    return (out[0] if single else out), tape


def backward(tape: ForwardTape, dlogits) -> ParamVector:
    """Gradient of ``sum(dlogits * logits)`` with respect to the parameters.

    For a batched forward call the contributions of all rows are summed.
    """
    if tape.consumed:
        raise UsageError("forward tape already consumed by a previous backward call")
    spec = tape.spec
    d = np.asarray(dlogits, dtype=np.float64)
    D = d[None, :] if tape.single else d
    if D.shape != (tape.x.shape[0], spec.output_dim):
        raise ShapeError(
            f"dlogits shape {d.shape} does not match logits of a "
            f"{'single input' if tape.single else f'{tape.x.shape[0]}-row batch'}")
    tape.consumed = True
    grad = tape.params.zeros_like()
    if spec.kind == "mlp":
        _mlp_backward(spec, tape.params, tape, D, "", grad)
    elif spec.kind == "kernel_head":
        _kernel_backward(spec, tape, D, "", grad)
    else:
        _mlp_backward(spec, tape.params, tape, D, "mlp.", grad)
        _kernel_backward(spec, tape, D, "kernel.", grad)
    return grad


@dataclass
class Scorer:
    """A scorer spec bundled with its current parameters."""

    spec: ScorerSpec
    params: ParamVector | None = None

    def __post_init__(self):
        if self.params is None:
            self.params = init_params(self.spec, 0)
        _check_params(self.params, self.spec)

    @classmethod
    def initialized(cls, spec: ScorerSpec, seed: int) -> "Scorer":
        return cls(spec, init_params(spec, seed))

    def forward(self, x):
        return forward(self.params, self.spec, x)

    def backward(self, tape: ForwardTape, dlogits) -> ParamVector:
        return backward(tape, dlogits)

    def logits(self, x) -> np.ndarray:
        return self.forward(x)[0]

    def with_values(self, values) -> "Scorer":
        return Scorer(self.spec, self.params.with_values(values))

