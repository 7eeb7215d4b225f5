"""Variational autoencoder with a Gaussian encoder and standard-normal prior."""
from __future__ import annotations

from typing import Optional

import numpy as np

from ..neural import MlpNetwork, Optimizer, backward, forward, init_network, mse_loss, step
from ..numkit import RngStream
from .base import EncoderConfig, EncoderModel, fit_loop, kl_gaussian, reparameterize


def vae_loss_grad(encoder: MlpNetwork, decoder: MlpNetwork, X, eps, beta: float):
    """Reconstruction MSE of ``decode(mu + sigma * eps)`` plus ``beta`` times the mean KL.

    The encoder emits ``[mu | logvar]``.  Returns ``(total, components,
    encoder grads, decoder grads)``.
    """
    d = eps.shape[1]
    n = X.shape[0]
    enc_acts = forward(encoder, X)
    stats = enc_acts[-1]
    mu, logvar = stats[:, :d], stats[:, d:]
    z = reparameterize(mu, logvar, eps)
    dec_acts = forward(decoder, z)
    recon, g_out = mse_loss(dec_acts[-1], X)
    # non-finite encoder output propagates as NaN so the training loop reports divergence
    kl = float(np.mean(kl_gaussian(mu, logvar))) if np.all(np.isfinite(logvar)) else float("nan")
    dec_grads, g_z = backward(decoder, dec_acts, g_out)
    std = np.exp(0.5 * logvar)
    g_mu = g_z + beta * mu / n
    g_logvar = g_z * eps * 0.5 * std + beta * 0.5 * (np.exp(logvar) - 1.0) / n
    enc_grads, _ = backward(encoder, enc_acts, np.hstack([g_mu, g_logvar]))
    return recon + beta * kl, {"recon_loss": recon, "kl_loss": kl}, enc_grads, dec_grads


def build_vae(n_in: int, cfg: EncoderConfig, rng: RngStream) -> tuple[MlpNetwork, MlpNetwork]:
    hidden = cfg.hidden_widths(n_in)
    enc_w = (n_in,) + hidden + (2 * cfg.latent_dim,)
    dec_w = (cfg.latent_dim,) + hidden[::-1] + (n_in,)
    acts = [cfg.activation] * len(hidden) + ["linear"]
    enc = init_network(enc_w, acts, rng)
    dec = init_network(dec_w, acts, rng)
    return enc, dec


def posterior(model: EncoderModel, X) -> tuple[np.ndarray, np.ndarray]:
    """Posterior means and log-variances for the rows of ``X``."""
    stats = forward(model.encoder, np.asarray(X, dtype=np.float64))[-1]
    return stats[:, :model.latent_dim], stats[:, model.latent_dim:]


def train_vae(X, cfg: EncoderConfig, X_val: Optional[np.ndarray] = None) -> EncoderModel:
    """Maximize the evidence lower bound by minibatch Adam.

    ``beta`` defaults to ``1 / n_features``, which makes the objective a
    per-feature scaling of the Gaussian-likelihood bound.  Validation losses
    use a fixed noise draw so they are comparable across epochs.
    """
    X = np.asarray(X, dtype=np.float64)
    rng = RngStream(cfg.seed, (0x7AE,))
    beta = cfg.beta if cfg.beta is not None else 1.0 / X.shape[1]
    enc, dec = build_vae(X.shape[1], cfg, rng.derive(0))
    opt = Optimizer("adam", cfg.lr)
    params = enc.params() + dec.params()
    d = cfg.latent_dim
    val_eps = None if X_val is None else rng.derive(1).normal((len(X_val), d))

    def batch_step(xb, r):
        eps = r.normal((len(xb), d))
        total, parts, ge, gd = vae_loss_grad(enc, dec, xb, eps, beta)
        step(params, ge + gd, opt)
        return {"train_loss": total, **parts}

    def val_losses(xv):
        total, parts, _, _ = vae_loss_grad(enc, dec, xv, val_eps, beta)
        return {"val_loss": total, "val_recon_loss": parts["recon_loss"], "val_kl_loss": parts["kl_loss"]}

    history = fit_loop("VAE", cfg, X, X_val, rng.derive(2), batch_step, val_losses, params)
    return EncoderModel("VAE", enc, dec, d, cfg, history)
