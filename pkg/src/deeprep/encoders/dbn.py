"""Restricted Boltzmann machines trained by contrastive divergence, stacked into a DBN."""
from __future__ import annotations

from typing import Optional

import numpy as np

from ..neural import DenseLayer, MlpNetwork
from ..numkit import ParameterError, RngStream
from .base import DivergenceError, EncoderConfig, EncoderModel, Rbm, iterate_minibatches


def init_rbm(n_visible: int, n_hidden: int, rng: RngStream, visible: str = "bernoulli", scale: float = 0.01) -> Rbm:
    return Rbm(rng.normal((n_hidden, n_visible), 0.0, scale), np.zeros(n_visible), np.zeros(n_hidden), visible)


def rbm_cd_step(rbm: Rbm, batch, k: int, lr: float, rng: RngStream) -> tuple[Rbm, float]:
    """One CD-k update on ``batch``; returns the new RBM and the batch reconstruction MSE.

    Hidden states are sampled during the Gibbs chain, visible states use
    their conditional means (identity for Gaussian units, sigmoid for
    Bernoulli units).  The reconstruction error is measured after the first
    Gibbs half-step back to the visible layer.
    """
    if k < 1:
        raise ParameterError(f"CD steps must be >= 1, got {k}")
    if lr < 0:
        raise ParameterError(f"learning rate must be >= 0, got {lr}")
    v0 = np.asarray(batch, dtype=np.float64)
    n = v0.shape[0]
    ph0 = rbm.hidden_probs(v0)
    ph = ph0
    recon_err = None
    for _ in range(k):
        h = (rng.random(ph.shape) < ph).astype(np.float64)
        vk = rbm.visible_mean(h)
        if recon_err is None:
            recon_err = float(np.mean((v0 - vk) ** 2))
        ph = rbm.hidden_probs(vk)
    new = rbm.copy()
    if lr > 0:
        new.W += lr * (ph0.T @ v0 - ph.T @ vk) / n
        new.a += lr * (ph0 - ph).mean(axis=0)
        new.c += lr * (v0 - vk).mean(axis=0)
    return new, recon_err


def train_rbm(X, n_hidden: int, epochs: int, lr: float, k: int, batch_size: int, rng: RngStream,
              visible: str = "bernoulli") -> tuple[Rbm, list[float]]:
    """Train one RBM; returns it with the per-epoch mean reconstruction error."""
    X = np.asarray(X, dtype=np.float64)
    rbm = init_rbm(X.shape[1], n_hidden, rng.derive(0), visible)
    errors = []
    for epoch in range(1, epochs + 1):
        total = 0.0
        for idx in iterate_minibatches(len(X), batch_size, rng):
            rbm, err = rbm_cd_step(rbm, X[idx], k, lr, rng)
            total += err * len(idx)
        errors.append(total / len(X))
        if not np.isfinite(errors[-1]) or not np.all(np.isfinite(rbm.W)):
            raise DivergenceError("DBN", epoch, "cd")
    return rbm, errors


def dbn_from_rbms(rbms: list[Rbm], cfg: EncoderConfig) -> EncoderModel:
    encoder = MlpNetwork([DenseLayer(r.W.copy(), r.a.copy(), "sigmoid") for r in rbms])
    return EncoderModel("DBN", encoder, None, rbms[-1].W.shape[0], cfg, {}, list(rbms))


def _reconstruct_mse(rbms: list[Rbm], X) -> float:
    h = X
    for r in rbms:
        h = r.hidden_probs(h)
    for r in reversed(rbms):
        h = r.visible_mean(h)
    return float(np.mean((X - h) ** 2))


def train_dbn(X, cfg: EncoderConfig, X_val: Optional[np.ndarray] = None, n_layers: int = 3) -> EncoderModel:
    """Greedy stack of RBMs: Gaussian-Bernoulli first, Bernoulli-Bernoulli above.

    Each layer trains on the hidden probabilities of the one below.  The
    history has one row per epoch of every layer; ``val_loss`` is the
    reconstruction MSE of the partial stack's down-pass on ``X_val``.
    """
    X = np.asarray(X, dtype=np.float64)
    rng = RngStream(cfg.seed, (0xDB7,))
    widths = cfg.hidden_widths(X.shape[1], n_layers - 1) + (cfg.latent_dim,)
    history: dict[str, list[float]] = {"layer": [], "train_loss": []}
    if X_val is not None and len(X_val):
        history["val_loss"] = []
    rbms: list[Rbm] = []
    inputs = X
    for i, width in enumerate(widths):
        visible = "gaussian" if i == 0 else "bernoulli"
        # Gaussian visible units need a smaller step than binary ones
        lr = cfg.lr if i else cfg.lr * 0.1
        layer_rng = rng.derive(i)
        rbm = init_rbm(inputs.shape[1], width, layer_rng.derive(0), visible)
        for epoch in range(1, cfg.epochs + 1):
            total = 0.0
            for idx in iterate_minibatches(len(inputs), cfg.batch_size, layer_rng):
                rbm, err = rbm_cd_step(rbm, inputs[idx], cfg.cd_k, lr, layer_rng)
                total += err * len(idx)
            history["layer"].append(float(i))
            history["train_loss"].append(total / len(inputs))
            if not np.isfinite(history["train_loss"][-1]) or not np.all(np.isfinite(rbm.W)):
                raise DivergenceError("DBN", epoch, f"layer {i}")
            if "val_loss" in history:
                history["val_loss"].append(_reconstruct_mse(rbms + [rbm], X_val))
        rbms.append(rbm)
        inputs = rbm.hidden_probs(inputs)
    model = dbn_from_rbms(rbms, cfg)
    model.history = history
    return model


def bars_and_stripes(size: int = 4) -> np.ndarray:
    """All distinct ``size x size`` bars-and-stripes images, flattened."""
    patterns = set()
    for bits in range(2 ** size):
        row = np.array([(bits >> j) & 1 for j in range(size)], dtype=np.float64)
        patterns.add(tuple(np.tile(row, (size, 1)).ravel()))
        patterns.add(tuple(np.tile(row[:, None], (1, size)).ravel()))
    return np.array(sorted(patterns))
