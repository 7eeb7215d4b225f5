import numpy as np

from .aae import (ae_loss_grad, discriminator_accuracy, discriminator_loss_grad, fit_discriminator,
                  generator_loss_grad, train_aae)
from .base import (KINDS, DivergenceError, EncoderConfig, EncoderModel, Rbm, encode, kl_bernoulli,
                   kl_gaussian, reconstruct, reparameterize)
from .dbn import bars_and_stripes, rbm_cd_step, train_dbn, train_rbm
from .ssae import ssae_loss_grad, sparsity_penalty, train_ssae
from .vae import posterior, train_vae, vae_loss_grad

TRAINERS = {"SSAE": train_ssae, "DBN": train_dbn, "VAE": train_vae, "AAE": train_aae}


def train_encoder(X, cfg: EncoderConfig, X_val=None) -> EncoderModel:
    return TRAINERS[cfg.kind](X, cfg, X_val)


def validation_loss(model: EncoderModel, X) -> float:
    """Reconstruction MSE used to rank candidates of the same kind."""
    return float(np.mean((reconstruct(model, X) - X) ** 2))
