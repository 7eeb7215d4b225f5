"""Dense feed-forward networks with explicit backpropagation.

Layers compute ``act(X @ W.T + b)`` with ``W`` of shape (out, in).  The
derivative of every supported activation can be written in terms of the
layer output, so :func:`forward` only keeps outputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .numkit import ParameterError, RngStream, ShapeError

ACTIVATIONS = ("sigmoid", "relu", "tanh", "linear")


class ContractError(RuntimeError):
    """Activations handed to :func:`backward` do not belong to the network."""


def sigmoid(z):
    # split by sign so that exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def activate(z, kind: str):
    if kind == "sigmoid":
        return sigmoid(z)
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    if kind == "linear":
        return z
    raise ParameterError(f"unknown activation {kind!r}")


def activation_grad(a, kind: str):
    """Derivative of the activation expressed through its output ``a``."""
    if kind == "sigmoid":
        return a * (1.0 - a)
    if kind == "relu":
        return (a > 0).astype(a.dtype)
    if kind == "tanh":
        return 1.0 - a * a
    if kind == "linear":
        return np.ones_like(a)
    raise ParameterError(f"unknown activation {kind!r}")


@dataclass
class DenseLayer:
    W: np.ndarray
    b: np.ndarray
    activation: str = "linear"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ParameterError(f"unknown activation {self.activation!r}")
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ShapeError(f"bias shape {self.b.shape} does not match W {self.W.shape}")

    @property
    def n_in(self) -> int:
        return self.W.shape[1]

    @property
    def n_out(self) -> int:
        return self.W.shape[0]


@dataclass
class MlpNetwork:
    layers: list[DenseLayer] = field(default_factory=list)

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.n_out != b.n_in:
                raise ShapeError(f"layer widths do not chain: {a.n_out} -> {b.n_in}")

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    @property
    def n_out(self) -> int:
        return self.layers[-1].n_out

    def params(self) -> list[np.ndarray]:
        """Flat list ``[W0, b0, W1, b1, ...]`` of the live parameter arrays."""
        out = []
        for layer in self.layers:
            out.extend((layer.W, layer.b))
        return out

    def copy(self) -> "MlpNetwork":
        return MlpNetwork([DenseLayer(l.W.copy(), l.b.copy(), l.activation) for l in self.layers])

    def load(self, params: Sequence[np.ndarray]) -> None:
        for p, src in zip(self.params(), params):
            p[...] = src

    def __call__(self, X):
        return forward(self, X)[-1]


def init_network(widths: Sequence[int], activations: Sequence[str], rng: RngStream) -> MlpNetwork:
    """Glorot-uniform weights and zero biases for a chain of ``widths``."""
    if len(activations) != len(widths) - 1:
        raise ParameterError("need one activation per layer")
    layers = []
    for n_in, n_out, act in zip(widths[:-1], widths[1:], activations):
        limit = np.sqrt(6.0 / (n_in + n_out))
        W = rng.uniform((n_out, n_in), -limit, limit)
        layers.append(DenseLayer(W, np.zeros(n_out), act))
    return MlpNetwork(layers)


def forward(net: MlpNetwork, X) -> list[np.ndarray]:
    """Return ``[X, a1, ..., aL]``; the last entry is the network output."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.n_in:
        raise ShapeError(f"input of shape {X.shape} does not fit network input width {net.n_in}")
    acts = [X]
    for layer in net.layers:
        acts.append(activate(acts[-1] @ layer.W.T + layer.b, layer.activation))
    return acts


def backward(net: MlpNetwork, acts: Sequence[np.ndarray], grad_out) -> tuple[list[np.ndarray], np.ndarray]:
    """Backpropagate ``grad_out`` (dLoss/dOutput).

    Returns the parameter gradients in :meth:`MlpNetwork.params` order and the
    gradient with respect to the network input.
    """
    if len(acts) != len(net.layers) + 1:
        raise ContractError(f"expected {len(net.layers) + 1} activations, got {len(acts)}")
    for layer, a_in, a_out in zip(net.layers, acts[:-1], acts[1:]):
        if a_in.shape[1] != layer.n_in or a_out.shape[1] != layer.n_out or a_in.shape[0] != a_out.shape[0]:
            raise ContractError("activations do not match the network (stale forward pass?)")
    grad = np.asarray(grad_out, dtype=np.float64)
    if grad.shape != acts[-1].shape:
        raise ContractError(f"output gradient shape {grad.shape} != output shape {acts[-1].shape}")
    grads: list[np.ndarray] = [None] * (2 * len(net.layers))
    for idx in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[idx]
        dz = grad * activation_grad(acts[idx + 1], layer.activation)
        grads[2 * idx] = dz.T @ acts[idx]
        grads[2 * idx + 1] = dz.sum(axis=0)
        grad = dz @ layer.W
    return grads, grad


@dataclass
class Optimizer:
    """SGD or Adam state for a fixed list of parameter arrays."""

    kind: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ParameterError(f"unknown optimizer {self.kind!r}")
        if not self.lr > 0:
            raise ParameterError(f"learning rate must be > 0, got {self.lr}")


def step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], opt: Optimizer) -> Sequence[np.ndarray]:
    """Apply one optimizer update to ``params`` in place and return them."""
    if len(params) != len(grads):
        raise ShapeError(f"{len(params)} parameters but {len(grads)} gradients")
    for p, g in zip(params, grads):
        if p.shape != np.shape(g):
            raise ShapeError(f"gradient shape {np.shape(g)} does not match parameter {p.shape}")
    if opt.kind == "sgd":
        for p, g in zip(params, grads):
            p -= opt.lr * g
        return params
    if not opt.m:
        opt.m = [np.zeros_like(p) for p in params]
        opt.v = [np.zeros_like(p) for p in params]
    opt.t += 1
    c1 = 1.0 - opt.beta1 ** opt.t
    c2 = 1.0 - opt.beta2 ** opt.t
    for p, g, m, v in zip(params, grads, opt.m, opt.v):
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * g * g
        p -= opt.lr * (m / c1) / (np.sqrt(v / c2) + opt.eps)
    return params


def mse_loss(pred, target):
    """Mean over all entries of the squared error, with its gradient."""
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def mae_loss(pred, target):
    diff = pred - target
    return float(np.mean(np.abs(diff))), np.sign(diff) / diff.size
