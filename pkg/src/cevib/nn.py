"""Dense feed-forward networks with exact reverse-mode gradients, plus Adam.

Matrices are plain float64 numpy arrays in row-major layout (batch rows,
feature columns).  Networks are small enough that clarity beats cleverness:
forward passes are pure, backward passes recompute the forward trace and
return gradients shaped exactly like the parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, TrainingError
from .rng import RngStream

__all__ = [
    "Layer",
    "Mlp",
    "AdamState",
    "mlp_forward",
    "mlp_backward",
    "adam_step",
    "elu",
    "sigmoid",
    "softplus",
]

ACTIVATIONS = ("elu", "linear", "sigmoid")


def as_matrix(x) -> np.ndarray:
    """Coerce to a finite float64 2-D array."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ShapeError("matrix contains non-finite entries")
    return a


def elu(x: np.ndarray) -> np.ndarray:
    out = np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))
    return out


def sigmoid(x: np.ndarray) -> np.ndarray:
    # two-branch form avoids overflow for large |x|
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softplus(x: np.ndarray) -> np.ndarray:
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


def _activate(name: str, s: np.ndarray) -> np.ndarray:
    if name == "elu":
        return elu(s)
    if name == "linear":
        return s
    if name == "sigmoid":
        return sigmoid(s)
    raise ValueError(f"unknown activation {name!r}")


def _activate_grad(name: str, s: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Derivative of the activation, reusing the forward output ``a``."""
    if name == "elu":
        return np.where(s > 0, 1.0, a + 1.0)
    if name == "linear":
        return np.ones_like(s)
    if name == "sigmoid":
        return a * (1.0 - a)
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class Layer:
    W: np.ndarray  # (in_dim, out_dim)
    b: np.ndarray  # (out_dim,)
    activation: str

    @property
    def in_dim(self) -> int:
        return self.W.shape[0]

    @property
    def out_dim(self) -> int:
        return self.W.shape[1]


@dataclass
class Mlp:
    """A stack of dense layers with per-layer activation tags."""

    layers: list[Layer] = field(default_factory=list)

    @classmethod
    def build(cls, sizes, hidden_activation="elu", output_activation="linear",
              rng: RngStream | None = None) -> "Mlp":
        """Create a network with layer widths ``sizes`` (input first).

        Weights use Glorot-uniform init from ``rng`` (zeros when ``rng`` is
        None); biases start at zero.
        """
        if len(sizes) < 2:
            raise ShapeError("need at least input and output sizes")
        layers = []
        for i in range(len(sizes) - 1):
            fan_in, fan_out = sizes[i], sizes[i + 1]
            if rng is None:
                W = np.zeros((fan_in, fan_out))
            else:
                limit = np.sqrt(6.0 / (fan_in + fan_out))
                W = rng.gen.uniform(-limit, limit, size=(fan_in, fan_out))
            act = hidden_activation if i < len(sizes) - 2 else output_activation
            layers.append(Layer(W=W, b=np.zeros(fan_out), activation=act))
        return cls(layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def n_params(self) -> int:
        return sum(l.W.size + l.b.size for l in self.layers)

    def validate(self) -> None:
        for i in range(len(self.layers) - 1):
            got, want = self.layers[i].out_dim, self.layers[i + 1].in_dim
            if got != want:
                raise ShapeError(
                    f"layer {i} outputs {got} features but layer {i + 1} expects {want}")


def _forward_trace(net: Mlp, x: np.ndarray):
    """Forward pass keeping pre- and post-activation values per layer."""
    a = x
    pre, post = [], []
    for layer in net.layers:
        s = a @ layer.W + layer.b
        a = _activate(layer.activation, s)
        pre.append(s)
        post.append(a)
    return pre, post


def mlp_forward(net: Mlp, x) -> np.ndarray:
    """Evaluate the network on a batch; pure and deterministic."""
    x = as_matrix(x)
    if x.shape[1] != net.in_dim:
        raise ShapeError(
            f"input has {x.shape[1]} features but network expects {net.in_dim}")
    _, post = _forward_trace(net, x)
    return post[-1]


def mlp_backward(net: Mlp, x, upstream_grad):
    """Exact reverse-mode gradients of ``sum(upstream ⊙ forward(x))``.

    Returns ``(layer_grads, input_grad)`` where ``layer_grads`` is a list of
    (dW, db) pairs shaped like the parameters.
    """
    x = as_matrix(x)
    g = np.asarray(upstream_grad, dtype=np.float64)
    if g.ndim == 1:
        g = g.reshape(1, -1)
    if x.shape[1] != net.in_dim:
        raise ShapeError(
            f"input has {x.shape[1]} features but network expects {net.in_dim}")
    pre, post = _forward_trace(net, x)
    if g.shape != post[-1].shape:
        raise ShapeError(
            f"upstream gradient shape {g.shape} does not match output shape {post[-1].shape}")

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(net.layers)
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        gs = g * _activate_grad(layer.activation, pre[i], post[i])
        a_prev = x if i == 0 else post[i - 1]
        grads[i] = (a_prev.T @ gs, gs.sum(axis=0))
        g = gs @ layer.W.T
    return grads, g


@dataclass
class AdamState:
    """Adam accumulators over a flat parameter vector."""

    m: np.ndarray
    v: np.ndarray
    step: int
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    # optional (name, start, stop) segments used to name offending params
    layout: list[tuple[str, int, int]] | None = None

    @classmethod
    def init(cls, n_params: int, learning_rate: float, **kw) -> "AdamState":
        return cls(m=np.zeros(n_params), v=np.zeros(n_params), step=0,
                   learning_rate=learning_rate, **kw)

    def _segment_name(self, idx: int) -> str:
        if self.layout:
            for name, start, stop in self.layout:
                if start <= idx < stop:
                    return name
        return f"param[{idx}]"


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """One Adam update with bias correction; returns the new parameters."""
    if params.shape != grads.shape:
        raise ShapeError(
            f"parameter shape {params.shape} does not match gradient shape {grads.shape}")
    bad = ~np.isfinite(grads)
    if bad.any():
        idx = int(np.argmax(bad))
        raise TrainingError(f"non-finite gradient in {state._segment_name(idx)}")
    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = state.m / (1.0 - state.beta1 ** state.step)
    v_hat = state.v / (1.0 - state.beta2 ** state.step)
    out = params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    if not np.all(np.isfinite(out)):
        idx = int(np.argmax(~np.isfinite(out)))
        raise TrainingError(f"non-finite parameter after update in {state._segment_name(idx)}")
    return out
