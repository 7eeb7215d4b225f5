"""Dense float64 matrix helpers and seeded random streams.

Matrices are plain ``numpy.ndarray`` objects of dtype float64 in row-major
(C) order; rows are records, columns are features.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

Matrix = np.ndarray


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class ParameterError(ValueError):
    """Raised when a numeric parameter is outside its valid range."""


def as_matrix(a, name="matrix") -> Matrix:
    m = np.ascontiguousarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {m.shape}")
    return m


def matmul(a: Matrix, b: Matrix) -> Matrix:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    return a @ b


def transpose(a: Matrix) -> Matrix:
    return np.ascontiguousarray(as_matrix(a).T)


def check_finite(a: np.ndarray, what: str = "array") -> None:
    if not np.all(np.isfinite(a)):
        raise FloatingPointError(f"{what} contains non-finite values")


@dataclass(frozen=True)
class Gaussian:
    mu: float = 0.0
    sigma: float = 1.0


@dataclass(frozen=True)
class Uniform:
    low: float = 0.0
    high: float = 1.0


Distribution = Union[Gaussian, Uniform]


class RngStream:
    """Seeded random stream with cheap derivation of independent child streams.

    Children are keyed by integers, so ``derive(fold, model)`` returns the
    same stream no matter how many other streams were derived before it.
    """

    def __init__(self, seed: int, key: tuple[int, ...] = ()):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.key = tuple(int(k) for k in key)
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=self.key)))

    def derive(self, *key: int) -> "RngStream":
        return RngStream(self.seed, self.key + tuple(key))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def normal(self, size, mu=0.0, sigma=1.0) -> np.ndarray:
        return self._gen.normal(mu, sigma, size=size)

    def uniform(self, size, low=0.0, high=1.0) -> np.ndarray:
        return self._gen.uniform(low, high, size=size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, n: int, size: int, replace: bool = True) -> np.ndarray:
        return self._gen.choice(n, size=size, replace=replace)

    def random(self, size) -> np.ndarray:
        return self._gen.random(size)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, key={self.key})"


def sample(rng: RngStream, dist: Distribution, rows: int, cols: int) -> Matrix:
    """Draw a ``rows x cols`` matrix of i.i.d. samples from ``dist``."""
    if isinstance(dist, Gaussian):
        if not dist.sigma > 0:
            raise ParameterError(f"gaussian sigma must be > 0, got {dist.sigma}")
        return rng.normal((rows, cols), dist.mu, dist.sigma)
    if isinstance(dist, Uniform):
        if not dist.low < dist.high:
            raise ParameterError(f"uniform requires low < high, got [{dist.low}, {dist.high})")
        return rng.uniform((rows, cols), dist.low, dist.high)
    raise ParameterError(f"unknown distribution {dist!r}")
