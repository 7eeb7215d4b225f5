"""Imputation, outlier clipping, standardization and fold construction.

Every ``fit_*`` function takes the row indices it may learn from, so that
statistics can be computed on training rows only and applied elsewhere.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dataio import TabularDataset
from .numkit import ParameterError, RngStream


class UnusableColumnError(ValueError):
    def __init__(self, columns: Sequence[str]):
        super().__init__(f"columns with no observed values: {', '.join(columns)}")
        self.columns = list(columns)


def _rows(n: int, rows) -> np.ndarray:
    if rows is None:
        return np.arange(n)
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        raise ParameterError("row set is empty")
    return rows


# ---------------------------------------------------------------------------
# imputation

@dataclass(frozen=True)
class ImputeStats:
    medians: np.ndarray
    modes: np.ndarray


def fit_impute(ds: TabularDataset, rows=None) -> ImputeStats:
    rows = _rows(ds.n, rows)
    medians = np.zeros(ds.numeric.shape[1])
    modes = np.zeros(ds.categorical.shape[1], dtype=np.int64)
    dead = []
    for j, name in enumerate(ds.schema.numeric):
        seen = ds.numeric[rows, j][~ds.numeric_mask[rows, j]]
        if seen.size == 0:
            dead.append(name)
        else:
            medians[j] = np.median(seen)
    for j, name in enumerate(ds.schema.categorical):
        seen = ds.categorical[rows, j][~ds.categorical_mask[rows, j]]
        if seen.size == 0:
            dead.append(name)
        else:
            # ties go to the lowest code, i.e. the earliest-seen level
            modes[j] = np.argmax(np.bincount(seen))
    if dead:
        raise UnusableColumnError(dead)
    return ImputeStats(medians, modes)


def apply_impute(ds: TabularDataset, stats: ImputeStats) -> TabularDataset:
    num = np.where(ds.numeric_mask, stats.medians[None, :], ds.numeric)
    cat = np.where(ds.categorical_mask, stats.modes[None, :], ds.categorical)
    return ds.replace(numeric=num, categorical=cat,
                      numeric_mask=np.zeros_like(ds.numeric_mask),
                      categorical_mask=np.zeros_like(ds.categorical_mask))


def impute(ds: TabularDataset, rows=None) -> TabularDataset:
    """Fill numeric gaps with the column median and categorical gaps with the mode."""
    return apply_impute(ds, fit_impute(ds, rows))


# ---------------------------------------------------------------------------
# outliers

@dataclass(frozen=True)
class ClipStats:
    mean: np.ndarray
    sd: np.ndarray
    zmax: float


def fit_clip(ds: TabularDataset, zmax: float = 4.0, rows=None) -> ClipStats:
    if not zmax > 0:
        raise ParameterError(f"zmax must be > 0, got {zmax}")
    if ds.numeric_mask.any():
        raise ParameterError("clip_outliers needs imputed numeric columns")
    rows = _rows(ds.n, rows)
    block = ds.numeric[rows]
    return ClipStats(block.mean(axis=0), block.std(axis=0), float(zmax))


def apply_clip(ds: TabularDataset, stats: ClipStats) -> TabularDataset:
    lo = stats.mean - stats.zmax * stats.sd
    hi = stats.mean + stats.zmax * stats.sd
    return ds.replace(numeric=np.clip(ds.numeric, lo, hi))


def clip_outliers(ds: TabularDataset, zmax: float = 4.0, rows=None) -> TabularDataset:
    """Winsorize numeric entries whose population z-score exceeds ``zmax``."""
    return apply_clip(ds, fit_clip(ds, zmax, rows))


# ---------------------------------------------------------------------------
# standardization

@dataclass(frozen=True)
class StandardizeStats:
    mean: np.ndarray
    sd: np.ndarray

    @property
    def constant(self) -> np.ndarray:
        return self.sd == 0


def _block(data) -> np.ndarray:
    return data.numeric if isinstance(data, TabularDataset) else np.asarray(data, dtype=np.float64)


def fit_standardize(data, rows=None) -> StandardizeStats:
    """Per-column mean and population sd over ``rows`` of a dataset or matrix."""
    block = _block(data)
    if rows is not None and len(rows) == 0:
        raise ParameterError("cannot fit standardization on an empty row set")
    rows = _rows(block.shape[0], rows)
    sub = block[rows]
    return StandardizeStats(sub.mean(axis=0), sub.std(axis=0))


def apply_standardize(data, stats: StandardizeStats):
    """Map columns to ``(x - mean) / sd``; constant columns become 0.

    Not idempotent: applying twice standardizes already-standardized values
    with the original statistics again.
    """
    block = _block(data)
    scale = np.where(stats.constant, 1.0, stats.sd)
    out = (block - stats.mean) / scale
    out[:, stats.constant] = 0.0
    if isinstance(data, TabularDataset):
        return data.replace(numeric=out)
    return out


def inverse_standardize(data, stats: StandardizeStats):
    block = _block(data)
    out = block * stats.sd + stats.mean
    if isinstance(data, TabularDataset):
        return data.replace(numeric=out)
    return out


# ---------------------------------------------------------------------------
# folds

@dataclass(frozen=True)
class Fold:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


@dataclass(frozen=True)
class FoldPlan:
    k: int
    n: int
    seed: int
    folds: tuple[Fold, ...]

    def to_manifest(self) -> str:
        lines = [f"# fold plan n={self.n} k={self.k} seed={self.seed}"]
        for i, f in enumerate(self.folds):
            for part in ("train", "val", "test"):
                idx = getattr(f, part)
                lines.append(f"{i} {part} " + ",".join(map(str, idx.tolist())))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_manifest(cls, text: str) -> "FoldPlan":
        lines = text.strip().splitlines()
        head = dict(tok.split("=") for tok in lines[0].split()[3:])
        parts: dict[int, dict[str, np.ndarray]] = {}
        for line in lines[1:]:
            i, part, *rest = line.split(" ", 2)
            idx = np.array([int(t) for t in rest[0].split(",")] if rest and rest[0] else [], dtype=np.int64)
            parts.setdefault(int(i), {})[part] = idx
        folds = tuple(Fold(**parts[i]) for i in sorted(parts))
        return cls(int(head["k"]), int(head["n"]), int(head["seed"]), folds)


def make_folds(n: int, k: int = 5, seed: int = 0, val_fraction: float = 0.1) -> FoldPlan:
    """Shuffled k-fold plan with a validation split carved from each training remainder.

    Test folds have size floor(n/k) or ceil(n/k).  The validation set holds
    ``round(val_fraction * n)`` records (at least one training row is always
    kept), so n=100, k=5 gives 70/10/20.
    """
    if k < 2:
        raise ParameterError(f"need k >= 2 folds, got {k}")
    if n < k:
        raise ParameterError(f"cannot split {n} records into {k} folds")
    rng = RngStream(seed, (0xF01D,))
    order = rng.permutation(n)
    chunks = np.array_split(order, k)
    folds = []
    for i, test in enumerate(chunks):
        rest = np.concatenate([c for j, c in enumerate(chunks) if j != i])
        rest = rest[rng.permutation(len(rest))]
        n_val = min(int(round(val_fraction * n)), len(rest) - 1)
        folds.append(Fold(train=np.sort(rest[n_val:]), val=np.sort(rest[:n_val]), test=np.sort(test)))
    return FoldPlan(k, n, seed, tuple(folds))


@dataclass(frozen=True)
class Preprocessor:
    """Impute, clip and standardize fitted on a row subset."""

    impute: ImputeStats
    clip: Optional[ClipStats]
    standardize: StandardizeStats

    @classmethod
    def fit(cls, ds: TabularDataset, rows, zmax: Optional[float] = 4.0) -> "Preprocessor":
        imp = fit_impute(ds, rows)
        filled = apply_impute(ds, imp)
        clip = fit_clip(filled, zmax, rows) if zmax else None
        clipped = apply_clip(filled, clip) if clip else filled
        return cls(imp, clip, fit_standardize(clipped, rows))

    def transform(self, ds: TabularDataset) -> TabularDataset:
        out = apply_impute(ds, self.impute)
        if self.clip is not None:
            out = apply_clip(out, self.clip)
        return apply_standardize(out, self.standardize)
