"""Shared pieces of the representation learners: config, model, training loop."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Optional, Sequence

import numpy as np

from ..neural import DenseLayer, MlpNetwork, activate, forward
from ..numkit import ParameterError, RngStream, ShapeError

KINDS = ("SSAE", "DBN", "VAE", "AAE")
KL_EPS = 1e-7
# Adam step for the gradient-trained encoders, CD step for the DBN
DEFAULT_LR = {"SSAE": 1e-3, "VAE": 1e-3, "AAE": 1e-3, "DBN": 0.5}


class DivergenceError(FloatingPointError):
    def __init__(self, kind: str, epoch: int, phase: str = "train"):
        super().__init__(f"{kind} training diverged at epoch {epoch} ({phase} loss is not finite)")
        self.kind, self.epoch, self.phase = kind, epoch, phase


@dataclass(frozen=True)
class EncoderConfig:
    kind: str = "SSAE"
    hidden: Optional[tuple[int, ...]] = None   # encoder-side hidden widths; None = geometric
    latent_dim: int = 8
    lr: Optional[float] = None                # None = DEFAULT_LR[kind]
    batch_size: int = 32
    epochs: int = 100
    seed: int = 0
    activation: str = "relu"
    patience: Optional[int] = 10
    # SSAE
    rho: float = 0.05
    sparsity_weight: float = 0.1
    sparsity: str = "kl"
    pretrain_epochs: int = 10
    # DBN
    cd_k: int = 1
    # VAE; None means 1 / input width
    beta: Optional[float] = None
    # AAE
    disc_hidden: tuple[int, ...] = (32, 32)
    disc_lr: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown encoder kind {self.kind!r}")
        if self.lr is None:
            object.__setattr__(self, "lr", DEFAULT_LR[self.kind])
        if not 0 < self.rho < 1:
            raise ParameterError(f"rho must lie in (0, 1), got {self.rho}")
        if self.sparsity_weight < 0:
            raise ParameterError(f"sparsity weight must be >= 0, got {self.sparsity_weight}")
        if self.sparsity not in ("kl", "l1"):
            raise ParameterError(f"sparsity must be 'kl' or 'l1', got {self.sparsity!r}")
        if self.cd_k < 1:
            raise ParameterError(f"CD steps must be >= 1, got {self.cd_k}")
        if self.beta is not None and not self.beta > 0:
            raise ParameterError(f"beta must be > 0, got {self.beta}")
        if self.latent_dim < 1 or self.batch_size < 1 or self.epochs < 1:
            raise ParameterError("latent_dim, batch_size and epochs must be positive")
        if not 0 < self.lr < np.inf:
            raise ParameterError(f"learning rate must be finite and > 0, got {self.lr}")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ParameterError(f"unknown encoder option(s): {sorted(unknown)}")
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return cls(**kw)

    def hidden_widths(self, n_in: int, n_layers: int = 2) -> tuple[int, ...]:
        if self.hidden is not None:
            return tuple(self.hidden)
        # geometric interpolation between input and latent widths
        ts = np.arange(1, n_layers + 1) / (n_layers + 1)
        return tuple(max(1, int(round(n_in ** (1 - t) * self.latent_dim ** t))) for t in ts)


def kl_bernoulli(rho: float, rho_hat):
    """KL divergence between Bernoulli(rho) and Bernoulli(rho_hat), elementwise.

    ``rho_hat`` is clamped to ``[1e-7, 1 - 1e-7]``.
    """
    if not 0 < rho < 1:
        raise ParameterError(f"rho must lie in (0, 1), got {rho}")
    r = np.clip(rho_hat, KL_EPS, 1 - KL_EPS)
    out = rho * np.log(rho / r) + (1 - rho) * np.log((1 - rho) / (1 - r))
    return float(out) if np.ndim(out) == 0 else out


def kl_bernoulli_grad(rho: float, rho_hat):
    """d kl_bernoulli / d rho_hat (zero where the clamp is active)."""
    inside = (rho_hat > KL_EPS) & (rho_hat < 1 - KL_EPS)
    r = np.clip(rho_hat, KL_EPS, 1 - KL_EPS)
    return np.where(inside, -rho / r + (1 - rho) / (1 - r), 0.0)


def kl_gaussian(mu, logvar):
    """KL(N(mu, exp(logvar)) || N(0, I)) summed over the last axis."""
    mu = np.asarray(mu, dtype=np.float64)
    logvar = np.asarray(logvar, dtype=np.float64)
    if not np.all(np.isfinite(logvar)):
        raise ParameterError("logvar must be finite")
    # expm1 keeps exp(v) - 1 - v accurate (and non-negative) for logvar near 0
    out = 0.5 * np.sum(mu * mu + np.maximum(np.expm1(logvar) - logvar, 0.0), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def reparameterize(mu, logvar, eps):
    mu, logvar, eps = (np.asarray(a, dtype=np.float64) for a in (mu, logvar, eps))
    if not (mu.shape == logvar.shape == eps.shape):
        raise ShapeError(f"shapes differ: mu {mu.shape}, logvar {logvar.shape}, eps {eps.shape}")
    return mu + np.exp(0.5 * logvar) * eps


@dataclass
class Rbm:
    W: np.ndarray          # (hidden, visible)
    c: np.ndarray          # visible bias
    a: np.ndarray          # hidden bias
    visible: str = "bernoulli"

    def copy(self) -> "Rbm":
        return Rbm(self.W.copy(), self.c.copy(), self.a.copy(), self.visible)

    def hidden_probs(self, v):
        return activate(v @ self.W.T + self.a, "sigmoid")

    def visible_mean(self, h):
        z = h @ self.W + self.c
        return z if self.visible == "gaussian" else activate(z, "sigmoid")


@dataclass
class EncoderModel:
    kind: str
    encoder: MlpNetwork
    decoder: Optional[MlpNetwork]
    latent_dim: int
    config: EncoderConfig
    history: dict[str, list[float]] = field(default_factory=dict)
    rbms: list[Rbm] = field(default_factory=list)

    @property
    def input_dim(self) -> int:
        return self.encoder.n_in

    @property
    def seed(self) -> int:
        return self.config.seed

    def to_state(self) -> tuple[dict, dict]:
        blocks = {}
        acts = {}
        for net_name, net in (("encoder", self.encoder), ("decoder", self.decoder)):
            if net is None:
                continue
            acts[net_name] = [l.activation for l in net.layers]
            for i, l in enumerate(net.layers):
                blocks[f"{net_name}.{i}.W"] = l.W
                blocks[f"{net_name}.{i}.b"] = l.b
        for i, r in enumerate(self.rbms):
            blocks[f"rbm.{i}.W"] = r.W
            blocks[f"rbm.{i}.c"] = r.c
            blocks[f"rbm.{i}.a"] = r.a
        meta = {"type": "encoder", "kind": self.kind, "latent_dim": self.latent_dim,
                "config": self.config.to_dict(), "history": self.history,
                "activations": acts, "rbm_visible": [r.visible for r in self.rbms]}
        return meta, blocks

    @classmethod
    def from_state(cls, meta: dict, blocks: dict) -> "EncoderModel":
        def net(name):
            if name not in meta["activations"]:
                return None
            return MlpNetwork([DenseLayer(blocks[f"{name}.{i}.W"], blocks[f"{name}.{i}.b"], act)
                               for i, act in enumerate(meta["activations"][name])])

        rbms = [Rbm(blocks[f"rbm.{i}.W"], blocks[f"rbm.{i}.c"], blocks[f"rbm.{i}.a"], vis)
                for i, vis in enumerate(meta["rbm_visible"])]
        return cls(meta["kind"], net("encoder"), net("decoder"), meta["latent_dim"],
                   EncoderConfig.from_dict(meta["config"]), meta["history"], rbms)


def _check_input(model: EncoderModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ShapeError(f"input of shape {X.shape} does not match model input width {model.input_dim}")
    return X


def encode(model: EncoderModel, X) -> np.ndarray:
    """Deterministic middle-layer representation (the posterior mean for VAE)."""
    X = _check_input(model, X)
    out = forward(model.encoder, X)[-1]
    return out[:, :model.latent_dim]


def reconstruct(model: EncoderModel, X) -> np.ndarray:
    X = _check_input(model, X)
    z = encode(model, X)
    if model.kind == "DBN":
        for rbm in reversed(model.rbms):
            z = rbm.visible_mean(z)
        return z
    return forward(model.decoder, z)[-1]


def iterate_minibatches(n: int, batch_size: int, rng: RngStream):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def fit_loop(kind: str, cfg: EncoderConfig, X, X_val, rng: RngStream,
             batch_step: Callable[[np.ndarray, RngStream], dict],
             val_losses: Optional[Callable[[np.ndarray], dict]],
             params: Sequence[np.ndarray], epochs: Optional[int] = None,
             history: Optional[dict] = None) -> dict:
    """Run minibatch epochs with divergence checks and optional early stopping.

    ``batch_step`` performs one update and returns its losses; the epoch
    average of each goes into ``history``.  ``val_losses`` only reads the
    validation rows.  When ``patience`` is set and validation data exists,
    training stops after that many epochs without improvement and the best
    parameters are restored in place.
    """
    history = {} if history is None else history
    epochs = cfg.epochs if epochs is None else epochs
    best, best_params, stale = np.inf, None, 0
    for epoch in range(1, epochs + 1):
        sums: dict[str, float] = {}
        count = 0
        for idx in iterate_minibatches(len(X), cfg.batch_size, rng):
            losses = batch_step(X[idx], rng)
            for k, v in losses.items():
                if not np.isfinite(v):
                    raise DivergenceError(kind, epoch, k)
                sums[k] = sums.get(k, 0.0) + v * len(idx)
            count += len(idx)
        for k, v in sums.items():
            history.setdefault(k, []).append(v / count)
        if val_losses is not None and X_val is not None and len(X_val):
            vl = val_losses(X_val)
            for k, v in vl.items():
                history.setdefault(k, []).append(v)
            if not np.isfinite(vl["val_loss"]):
                raise DivergenceError(kind, epoch, "validation")
            if cfg.patience:
                if vl["val_loss"] < best:
                    best, stale = vl["val_loss"], 0
                    best_params = [p.copy() for p in params]
                else:
                    stale += 1
                    if stale >= cfg.patience:
                        break
    if best_params is not None:
        for p, b in zip(params, best_params):
            p[...] = b
    return history
