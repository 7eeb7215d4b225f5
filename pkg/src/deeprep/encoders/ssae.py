"""Stacked sparse autoencoder: greedy layer-wise pretraining, then fine-tuning."""
from __future__ import annotations

from typing import Optional

import numpy as np

from ..neural import MlpNetwork, Optimizer, backward, forward, init_network, mae_loss, step
from ..numkit import RngStream
from .base import EncoderConfig, EncoderModel, fit_loop, kl_bernoulli, kl_bernoulli_grad


def sparsity_penalty(mid, rho: float, kind: str = "kl"):
    """Penalty on middle-layer activations and its gradient w.r.t. them.

    ``kl`` sums ``KL(rho || mean activation of unit j)`` over units; ``l1``
    is the batch mean of the summed absolute activations.
    """
    n = mid.shape[0]
    if kind == "kl":
        rho_hat = mid.mean(axis=0)
        pen = float(np.sum(kl_bernoulli(rho, rho_hat)))
        grad = np.broadcast_to(kl_bernoulli_grad(rho, rho_hat) / n, mid.shape)
        return pen, grad
    return float(np.abs(mid).sum() / n), np.sign(mid) / n


def ssae_loss_grad(encoder: MlpNetwork, decoder: MlpNetwork, X, rho: float, weight: float,
                   sparsity: str = "kl"):
    """MAE reconstruction plus ``weight`` times the sparsity penalty.

    Returns ``(total, components, encoder grads, decoder grads)``.
    """
    enc_acts = forward(encoder, X)
    mid = enc_acts[-1]
    dec_acts = forward(decoder, mid)
    recon, g_out = mae_loss(dec_acts[-1], X)
    dec_grads, g_mid = backward(decoder, dec_acts, g_out)
    pen = 0.0
    if weight:
        pen, g_pen = sparsity_penalty(mid, rho, sparsity)
        g_mid = g_mid + weight * g_pen
    enc_grads, _ = backward(encoder, enc_acts, g_mid)
    return recon + weight * pen, {"recon_loss": recon, "sparsity_loss": pen}, enc_grads, dec_grads


def _pair_trainer(enc: MlpNetwork, dec: MlpNetwork, cfg: EncoderConfig, sparse: bool):
    opt = Optimizer("adam", cfg.lr)
    params = enc.params() + dec.params()
    weight = cfg.sparsity_weight if sparse else 0.0

    def batch_step(xb, rng):
        total, parts, ge, gd = ssae_loss_grad(enc, dec, xb, cfg.rho, weight, cfg.sparsity)
        step(params, ge + gd, opt)
        return {"train_loss": total, **parts}

    def val_losses(xv):
        total, parts, _, _ = ssae_loss_grad(enc, dec, xv, cfg.rho, weight, cfg.sparsity)
        return {"val_loss": total, "val_recon_loss": parts["recon_loss"]}

    return batch_step, val_losses, params


def build_ssae(n_in: int, cfg: EncoderConfig, rng: RngStream) -> tuple[MlpNetwork, MlpNetwork]:
    widths = (n_in,) + cfg.hidden_widths(n_in) + (cfg.latent_dim,)
    n = len(widths) - 1
    enc = init_network(widths, [cfg.activation] * (n - 1) + ["sigmoid"], rng)
    dec = init_network(widths[::-1], [cfg.activation] * (n - 1) + ["linear"], rng)
    return enc, dec


def train_ssae(X, cfg: EncoderConfig, X_val: Optional[np.ndarray] = None) -> EncoderModel:
    """Train a stacked sparse autoencoder on standardized rows ``X``.

    Each encoder layer is first pretrained as a one-hidden-layer autoencoder
    on the previous layer's output (the sparsity penalty applies to the
    middle layer only), then the assembled stack is fine-tuned end to end.
    The middle layer is sigmoid so its mean activation is a probability.
    """
    X = np.asarray(X, dtype=np.float64)
    rng = RngStream(cfg.seed, (0x55AE,))
    enc, dec = build_ssae(X.shape[1], cfg, rng.derive(0))
    n_layers = len(enc.layers)
    history: dict[str, list[float]] = {}

    if cfg.pretrain_epochs > 0:
        inputs, val_inputs = X, X_val
        for i in range(n_layers):
            e = MlpNetwork([enc.layers[i]])
            d = MlpNetwork([dec.layers[n_layers - 1 - i]])
            batch_step, _, params = _pair_trainer(e, d, cfg, sparse=(i == n_layers - 1))
            h = fit_loop("SSAE", cfg, inputs, None, rng.derive(1, i), batch_step, None, params,
                         epochs=cfg.pretrain_epochs)
            history[f"pretrain_layer{i}_loss"] = h["train_loss"]
            inputs = e(inputs)
            if val_inputs is not None:
                val_inputs = e(val_inputs)

    batch_step, val_losses, params = _pair_trainer(enc, dec, cfg, sparse=True)
    fit_loop("SSAE", cfg, X, X_val, rng.derive(2), batch_step, val_losses, params, history=history)
    return EncoderModel("SSAE", enc, dec, cfg.latent_dim, cfg, history)
