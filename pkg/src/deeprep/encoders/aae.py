"""Adversarial autoencoder: reconstruction plus a latent-space GAN against N(0, I)."""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..neural import MlpNetwork, Optimizer, backward, forward, init_network, mse_loss, step
from ..numkit import RngStream
from .base import EncoderConfig, EncoderModel, fit_loop

_LOG_FLOOR = 1e-12


def ae_loss_grad(encoder: MlpNetwork, decoder: MlpNetwork, X):
    """Plain autoencoder MSE with gradients for both halves."""
    enc_acts = forward(encoder, X)
    dec_acts = forward(decoder, enc_acts[-1])
    loss, g = mse_loss(dec_acts[-1], X)
    dec_grads, g_z = backward(decoder, dec_acts, g)
    enc_grads, _ = backward(encoder, enc_acts, g_z)
    return loss, enc_grads, dec_grads


def discriminator_loss_grad(disc: MlpNetwork, z_prior, z_code):
    """Binary cross-entropy, prior samples labelled 1 and codes labelled 0.

    The loss is averaged over all ``len(z_prior) + len(z_code)`` samples.
    """
    z = np.vstack([z_prior, z_code])
    y = np.concatenate([np.ones(len(z_prior)), np.zeros(len(z_code))])[:, None]
    acts = forward(disc, z)
    p = np.clip(acts[-1], _LOG_FLOOR, 1 - _LOG_FLOOR)
    m = len(z)
    loss = float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))
    g = (-(y / p) + (1 - y) / (1 - p)) / m
    grads, _ = backward(disc, acts, g)
    return loss, grads


def generator_loss_grad(encoder: MlpNetwork, disc: MlpNetwork, X):
    """Non-saturating generator loss ``-mean log D(encoder(X))``; encoder grads only."""
    enc_acts = forward(encoder, X)
    d_acts = forward(disc, enc_acts[-1])
    p = np.clip(d_acts[-1], _LOG_FLOOR, 1.0)
    loss = float(-np.mean(np.log(p)))
    _, g_z = backward(disc, d_acts, -1.0 / (p * len(X)))
    enc_grads, _ = backward(encoder, enc_acts, g_z)
    return loss, enc_grads


def build_discriminator(latent_dim: int, hidden: Sequence[int], rng: RngStream) -> MlpNetwork:
    widths = (latent_dim,) + tuple(hidden) + (1,)
    return init_network(widths, ["relu"] * len(hidden) + ["sigmoid"], rng)


def discriminator_accuracy(disc: MlpNetwork, z_prior, z_code) -> float:
    p_prior = forward(disc, z_prior)[-1][:, 0]
    p_code = forward(disc, z_code)[-1][:, 0]
    hits = np.sum(p_prior > 0.5) + np.sum(p_code <= 0.5)
    return float(hits / (len(z_prior) + len(z_code)))


def fit_discriminator(z_prior, z_code, hidden: Sequence[int] = (32, 32), epochs: int = 200,
                      lr: float = 1e-3, batch_size: int = 64, seed: int = 0) -> MlpNetwork:
    """Train a fresh discriminator to tell ``z_prior`` rows from ``z_code`` rows."""
    rng = RngStream(seed, (0xD15C,))
    z_prior = np.asarray(z_prior, dtype=np.float64)
    z_code = np.asarray(z_code, dtype=np.float64)
    disc = build_discriminator(z_prior.shape[1], hidden, rng.derive(0))
    opt = Optimizer("adam", lr)
    params = disc.params()
    n = min(len(z_prior), len(z_code))
    for _ in range(epochs):
        ip = rng.permutation(len(z_prior))[:n]
        ic = rng.permutation(len(z_code))[:n]
        for s in range(0, n, batch_size):
            _, g = discriminator_loss_grad(disc, z_prior[ip[s:s + batch_size]], z_code[ic[s:s + batch_size]])
            step(params, g, opt)
    return disc


def build_aae(n_in: int, cfg: EncoderConfig, rng: RngStream):
    hidden = cfg.hidden_widths(n_in)
    acts = [cfg.activation] * len(hidden) + ["linear"]
    enc = init_network((n_in,) + hidden + (cfg.latent_dim,), acts, rng)
    dec = init_network((cfg.latent_dim,) + hidden[::-1] + (n_in,), acts, rng)
    disc = build_discriminator(cfg.latent_dim, cfg.disc_hidden, rng)
    return enc, dec, disc


def train_aae(X, cfg: EncoderConfig, X_val: Optional[np.ndarray] = None) -> EncoderModel:
    """Alternate reconstruction, discriminator and generator updates on every batch.

    History keys: ``recon_loss`` (also ``train_loss``), ``disc_loss``,
    ``gen_loss``; ``val_loss`` is the reconstruction MSE on ``X_val``.
    """
    X = np.asarray(X, dtype=np.float64)
    rng = RngStream(cfg.seed, (0xAAE,))
    enc, dec, disc = build_aae(X.shape[1], cfg, rng.derive(0))
    d = cfg.latent_dim
    ae_params = enc.params() + dec.params()
    disc_params = disc.params()
    enc_params = enc.params()
    opt_ae = Optimizer("adam", cfg.lr)
    # beta1 = 0.5 damps the oscillation of the adversarial game
    opt_disc = Optimizer("adam", cfg.disc_lr or cfg.lr, beta1=0.5)
    opt_gen = Optimizer("adam", cfg.disc_lr or cfg.lr, beta1=0.5)

    def batch_step(xb, r):
        recon, ge, gd = ae_loss_grad(enc, dec, xb)
        step(ae_params, ge + gd, opt_ae)
        prior = r.normal((len(xb), d))
        disc_loss, gdisc = discriminator_loss_grad(disc, prior, enc(xb))
        step(disc_params, gdisc, opt_disc)
        gen_loss, genc = generator_loss_grad(enc, disc, xb)
        step(enc_params, genc, opt_gen)
        return {"train_loss": recon, "recon_loss": recon, "disc_loss": disc_loss, "gen_loss": gen_loss}

    def val_losses(xv):
        loss, _ = mse_loss(dec(enc(xv)), xv)
        return {"val_loss": loss}

    history = fit_loop("AAE", cfg, X, X_val, rng.derive(2), batch_step, val_losses,
                       ae_params + disc_params)
    return EncoderModel("AAE", enc, dec, d, cfg, history)
