"""GloVe embeddings for categorical levels.

Each record is treated as one document whose tokens are its
``(column, level)`` pairs; there is no word order, so every pair of tokens
in a record co-occurs once.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dataio import UNKNOWN_CODE, TabularDataset
from .numkit import ParameterError, RngStream


class EmptyVocabularyError(ValueError):
    pass


class DegenerateInputError(ValueError):
    pass


@dataclass(frozen=True)
class CooccurrenceMatrix:
    vocab: tuple[tuple[int, int], ...]   # (categorical column index, level code)
    counts: np.ndarray                   # (V, V) symmetric, zero diagonal
    labels: tuple[str, ...] = ()

    @property
    def size(self) -> int:
        return len(self.vocab)


def _tokens(ds: TabularDataset, rows) -> np.ndarray:
    """One-hot token incidence matrix (n_rows, V) and its vocabulary."""
    cats = ds.categorical[rows]
    mask = ds.categorical_mask[rows] | (cats == UNKNOWN_CODE)
    vocab = []
    for j in range(cats.shape[1]):
        for code in np.unique(cats[~mask[:, j], j]):
            vocab.append((j, int(code)))
    index = {tok: t for t, tok in enumerate(vocab)}
    onehot = np.zeros((len(rows), len(vocab)))
    for j in range(cats.shape[1]):
        for r in np.flatnonzero(~mask[:, j]):
            onehot[r, index[(j, int(cats[r, j]))]] = 1.0
    return onehot, vocab


def build_cooccurrence(ds: TabularDataset, rows=None) -> CooccurrenceMatrix:
    """Count, over ``rows``, how many records contain each pair of tokens."""
    if ds.categorical.shape[1] == 0:
        raise EmptyVocabularyError("dataset has no categorical columns")
    rows = np.arange(ds.n) if rows is None else np.asarray(rows)
    onehot, vocab = _tokens(ds, rows)
    if not vocab:
        raise EmptyVocabularyError("no observed categorical levels in the selected rows")
    counts = onehot.T @ onehot
    np.fill_diagonal(counts, 0.0)
    names = ds.schema.categorical
    labels = tuple(f"{names[j]}={ds.levels[j][c]}" for j, c in vocab)
    return CooccurrenceMatrix(tuple(vocab), counts, labels)


def glove_weight(x, xmax: float = 100.0, alpha: float = 0.75):
    """GloVe weighting ``(x/xmax)**alpha`` capped at 1; zero for zero counts."""
    if not xmax > 0:
        raise ParameterError(f"xmax must be > 0, got {xmax}")
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0):
        raise ParameterError("co-occurrence counts must be non-negative")
    w = np.where(x < xmax, (x / xmax) ** alpha, 1.0)
    return float(w) if w.ndim == 0 else w


@dataclass(frozen=True)
class GloveConfig:
    lr: float = 0.05
    epochs: int = 300
    xmax: float = 100.0
    alpha: float = 0.75
    seed: int = 0


@dataclass
class EmbeddingTable:
    vocab: tuple[tuple[int, int], ...]
    w: np.ndarray
    w_ctx: np.ndarray
    b: np.ndarray
    b_ctx: np.ndarray
    history: list[float] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.w.shape[1]

    @property
    def vectors(self) -> np.ndarray:
        return self.w + self.w_ctx

    def to_state(self) -> tuple[dict, dict]:
        meta = {"type": "embedding", "vocab": [list(t) for t in self.vocab], "history": self.history}
        blocks = {"w": self.w, "w_ctx": self.w_ctx, "b": self.b, "b_ctx": self.b_ctx}
        return meta, blocks

    @classmethod
    def from_state(cls, meta: dict, blocks: dict) -> "EmbeddingTable":
        return cls(tuple(tuple(t) for t in meta["vocab"]), blocks["w"], blocks["w_ctx"],
                   blocks["b"], blocks["b_ctx"], list(meta["history"]))


def glove_loss(table: EmbeddingTable, cooc: CooccurrenceMatrix, xmax=100.0, alpha=0.75) -> float:
    i, j = np.nonzero(cooc.counts)
    x = cooc.counts[i, j]
    diff = np.einsum("kd,kd->k", table.w[i], table.w_ctx[j]) + table.b[i] + table.b_ctx[j] - np.log(x)
    return float(np.sum(glove_weight(x, xmax, alpha) * diff ** 2))


def train_glove(cooc: CooccurrenceMatrix, d: int = 8, config: Optional[GloveConfig] = None) -> EmbeddingTable:
    """Fit main/context vectors and biases by full-batch AdaGrad.

    ``history`` holds the weighted least-squares loss before each epoch and
    once more after the last one.
    """
    cfg = config or GloveConfig()
    if d < 1:
        raise ParameterError(f"embedding dimension must be >= 1, got {d}")
    i, j = np.nonzero(cooc.counts)
    if i.size == 0:
        raise DegenerateInputError("co-occurrence matrix has no nonzero entries")
    x = cooc.counts[i, j]
    fx = glove_weight(x, cfg.xmax, cfg.alpha)
    logx = np.log(x)
    V = cooc.size
    rng = RngStream(cfg.seed, (0x61,))
    w = (rng.uniform((V, d)) - 0.5) / d
    wc = (rng.uniform((V, d)) - 0.5) / d
    b = np.zeros(V)
    bc = np.zeros(V)
    # AdaGrad accumulators start at 1 as in the reference GloVe code
    gw, gwc, gb, gbc = np.ones_like(w), np.ones_like(wc), np.ones(V), np.ones(V)

    history = []
    for _ in range(cfg.epochs):
        diff = np.einsum("kd,kd->k", w[i], wc[j]) + b[i] + bc[j] - logx
        history.append(float(np.sum(fx * diff ** 2)))
        g = 2.0 * fx * diff
        dw = np.zeros_like(w)
        dwc = np.zeros_like(wc)
        np.add.at(dw, i, g[:, None] * wc[j])
        np.add.at(dwc, j, g[:, None] * w[i])
        db = np.bincount(i, weights=g, minlength=V)
        dbc = np.bincount(j, weights=g, minlength=V)
        gw += dw ** 2
        gwc += dwc ** 2
        gb += db ** 2
        gbc += dbc ** 2
        w -= cfg.lr * dw / np.sqrt(gw)
        wc -= cfg.lr * dwc / np.sqrt(gwc)
        b -= cfg.lr * db / np.sqrt(gb)
        bc -= cfg.lr * dbc / np.sqrt(gbc)
    table = EmbeddingTable(cooc.vocab, w, wc, b, bc, history)
    history.append(glove_loss(table, cooc, cfg.xmax, cfg.alpha))
    if not all(np.isfinite(history)):
        raise FloatingPointError("GloVe training diverged")
    return table


def embed_dataset(ds: TabularDataset, table: Optional[EmbeddingTable]) -> np.ndarray:
    """Numeric block followed by one embedding vector per categorical column.

    Missing or unseen levels contribute a zero vector.
    """
    n_cat = ds.categorical.shape[1]
    if n_cat == 0 or table is None:
        return ds.numeric.copy()
    d = table.dim
    lookup = {tok: t for t, tok in enumerate(table.vocab)}
    vecs = table.vectors
    out = np.zeros((ds.n, ds.numeric.shape[1] + d * n_cat))
    out[:, :ds.numeric.shape[1]] = ds.numeric
    base = ds.numeric.shape[1]
    for col in range(n_cat):
        codes = ds.categorical[:, col]
        missing = ds.categorical_mask[:, col]
        for r in range(ds.n):
            if missing[r]:
                continue
            t = lookup.get((col, int(codes[r])))
            if t is not None:
                out[r, base + col * d: base + (col + 1) * d] = vecs[t]
    return out
