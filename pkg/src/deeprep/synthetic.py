"""Synthetic datasets with planted structure for tests and benchmarks."""
from __future__ import annotations

import numpy as np

from .numkit import RngStream


def linear_factor_data(n: int, p: int, k: int, noise: float = 0.1, seed: int = 0):
    """Rows ``x = z @ A + noise`` with ``z ~ N(0, I_k)``; returns ``(X, Z)``."""
    rng = RngStream(seed, (0x11,))
    Z = rng.normal((n, k))
    A = rng.normal((k, p)) / np.sqrt(k)
    return Z @ A + noise * rng.normal((n, p)), Z


def two_clusters(n: int, p: int, separation: float = 4.0, seed: int = 0):
    """Two Gaussian blobs whose means differ by ``separation`` along a random direction."""
    rng = RngStream(seed, (0x22,))
    labels = np.arange(n) % 2
    direction = rng.normal(p)
    direction /= np.linalg.norm(direction)
    X = rng.normal((n, p)) + np.outer(labels - 0.5, direction) * separation
    return X, labels


def latent_factor_regression(n: int = 1000, p: int = 100, k: int = 4, x_noise: float = 0.3,
                             y_noise: float = 0.1, freq: float = 1.0, seed: int = 0):
    """Regression data whose target is linear in a hidden low-dimensional factor.

    ``z ~ N(0, I_k)`` is expanded to ``p`` features ``sin(freq * z @ a_j + phase_j)``
    along random unit directions ``a_j``, plus Gaussian noise; the target is
    ``z @ w + noise``.  The features are non-monotone in ``z``, so a linear
    read-out of the raw columns is poor.  Returns ``(X, y, Z)``.
    """
    rng = RngStream(seed, (0x33,))
    Z = rng.normal((n, k))
    A = rng.normal((k, p))
    A /= np.linalg.norm(A, axis=0, keepdims=True)
    phase = rng.uniform(p, 0.0, 2 * np.pi)
    X = np.sin(freq * Z @ A + phase[None, :]) + x_noise * rng.normal((n, p))
    w = rng.normal(k)
    y = Z @ w + y_noise * rng.normal(n)
    return X, y, Z
