"""Cross-validated {encoder + Original} x {RF, Lasso, SVM} experiment driver."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..dataio import FeatureSchema, TabularDataset, infer_schema, load_csv
from ..embed import build_cooccurrence, embed_dataset, train_glove
from ..encoders import KINDS, DivergenceError, EncoderModel, encode, train_encoder, validation_loss
from ..preprocess import FoldPlan, Preprocessor, apply_standardize, fit_standardize, make_folds
from ..supervised import ForestConfig, SvrConfig, rmse, train_lasso, train_random_forest, train_svr
from .config import LEARNERS, ExperimentConfig

log = logging.getLogger(__name__)

ORIGINAL = "Original"
ROW_ORDER = ("SSAE", "DBN", "AAE", "VAE", ORIGINAL)


class RunError(RuntimeError):
    pass


class LeakageError(RuntimeError):
    pass


@dataclass
class LeakageAudit:
    """Records which rows every fitted statistic or model was computed from.

    ``stage`` names ending in ``:select`` may read validation rows; every
    other stage must only see training rows, and nothing may see test rows.
    """

    records: list[tuple[int, str, np.ndarray]] = field(default_factory=list)

    def record(self, fold: int, stage: str, rows) -> None:
        self.records.append((fold, stage, np.asarray(rows, dtype=np.int64)))

    def violations(self, plan: FoldPlan) -> list[str]:
        out = []
        for fold, stage, rows in self.records:
            f = plan.folds[fold]
            forbidden = f.test if stage.endswith(":select") else np.concatenate([f.test, f.val])
            bad = np.intersect1d(rows, forbidden)
            if bad.size:
                out.append(f"fold {fold} stage {stage}: {bad.size} held-out rows used")
        return out

    def check(self, plan: FoldPlan) -> None:
        bad = self.violations(plan)
        if bad:
            raise LeakageError("leakage audit failed:\n  " + "\n  ".join(bad))


@dataclass
class Cell:
    representation: str
    learner: str
    fold_rmse: list[Optional[float]] = field(default_factory=list)
    best_params: list[Optional[dict]] = field(default_factory=list)
    failure: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.failure is not None

    @property
    def values(self) -> np.ndarray:
        return np.array([v for v in self.fold_rmse if v is not None], dtype=np.float64)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values)) if not self.failed and self.values.size else float("nan")

    @property
    def sd(self) -> float:
        v = self.values
        return float(np.std(v, ddof=1)) if not self.failed and v.size > 1 else float("nan")


@dataclass
class ExperimentReport:
    cells: dict[tuple[str, str], Cell]
    representations: list[str]
    learners: list[str]
    k: int
    seed: int
    config_hash: str = ""
    timing: dict[str, float] = field(default_factory=dict)
    histories: dict[tuple[str, int], dict] = field(default_factory=dict)
    audit: Optional[LeakageAudit] = None
    plan: Optional[FoldPlan] = None

    def cell(self, representation: str, learner: str) -> Cell:
        return self.cells[(representation, learner)]

    def best_original(self) -> float:
        vals = [self.cells[(ORIGINAL, l)].mean for l in self.learners if not self.cells[(ORIGINAL, l)].failed]
        return min(vals) if vals else float("nan")

    def to_dict(self) -> dict:
        """Deterministic content of the report (timing and histories excluded)."""
        return {
            "k": self.k, "seed": self.seed, "config_hash": self.config_hash,
            "representations": self.representations, "learners": self.learners,
            "cells": [{"representation": c.representation, "learner": c.learner,
                       "fold_rmse": c.fold_rmse, "best_params": c.best_params,
                       "failure": c.failure, "mean": c.mean, "sd": c.sd}
                      for c in (self.cells[(r, l)] for r in self.representations for l in self.learners)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        cells = {}
        for c in d["cells"]:
            cells[(c["representation"], c["learner"])] = Cell(c["representation"], c["learner"], list(c["fold_rmse"]),
                                                              list(c["best_params"]), c["failure"])
        return cls(cells, list(d["representations"]), list(d["learners"]), d["k"], d["seed"], d["config_hash"])

    @classmethod
    def from_means(cls, table: dict[str, dict[str, float]]) -> "ExperimentReport":
        """Single-value report, e.g. to render published numbers."""
        reps = [r for r in ROW_ORDER if r in table] + [r for r in table if r not in ROW_ORDER]
        learners = list(next(iter(table.values())).keys())
        cells = {(r, l): Cell(r, l, [float(table[r][l])], [None]) for r in reps for l in learners}
        return cls(cells, reps, learners, 1, 0)


def load_dataset(cfg: ExperimentConfig) -> TabularDataset:
    dcfg = cfg.dataset
    if dcfg.columns:
        kinds = dict(dcfg.columns)
        kinds[dcfg.target] = "target"
        schema = FeatureSchema.from_kinds(kinds, dcfg.missing)
    else:
        schema = infer_schema(dcfg.path, dcfg.target, dcfg.categorical, dcfg.missing)
    return load_csv(dcfg.path, schema)


def fit_learner(name: str, params: dict, X, y, seed: int):
    if name == "RF":
        return train_random_forest(X, y, ForestConfig(**params, seed=seed))
    if name == "Lasso":
        return train_lasso(X, y, **params)
    if name == "SVM":
        return train_svr(X, y, SvrConfig(**params, seed=seed))
    raise ValueError(f"unknown learner {name!r}")


@dataclass
class FoldDesign:
    """Fully numeric, standardized design matrix for one fold."""

    X: np.ndarray
    y: np.ndarray


def build_design(ds: TabularDataset, cfg: ExperimentConfig, fold_idx: int, plan: FoldPlan,
                 audit: LeakageAudit, seed: int) -> FoldDesign:
    fold = plan.folds[fold_idx]
    train = fold.train
    prep = Preprocessor.fit(ds, train, cfg.preprocess.zmax)
    audit.record(fold_idx, "impute", train)
    audit.record(fold_idx, "clip", train)
    audit.record(fold_idx, "standardize", train)
    clean = prep.transform(ds)
    table = None
    if ds.categorical.shape[1]:
        embed_rows = np.arange(ds.n) if cfg.paper_faithful else train
        cooc = build_cooccurrence(ds, embed_rows)
        audit.record(fold_idx, "embedding", embed_rows)
        table = train_glove(cooc, cfg.embedding.dim, cfg.embedding.glove(seed))
    X = embed_dataset(clean, table)
    stats = fit_standardize(X, train)
    audit.record(fold_idx, "design-standardize", train)
    return FoldDesign(apply_standardize(X, stats), ds.target.copy())


def _select_learner(name: str, cfg: ExperimentConfig, Z, y, fold, seed: int, audit: LeakageAudit,
                    fold_idx: int, tag: str):
    """Grid-search ``name`` on validation RMSE; returns (test rmse, params, val rmse)."""
    stats = fit_standardize(Z, fold.train)
    audit.record(fold_idx, f"{tag}/{name}:rep-standardize", fold.train)
    Zs = apply_standardize(Z, stats)
    best = None
    for ci, params in enumerate(cfg.learner_candidates(name)):
        model = fit_learner(name, params, Zs[fold.train], y[fold.train], seed + ci)
        audit.record(fold_idx, f"{tag}/{name}:fit", fold.train)
        score = rmse(y[fold.val], model.predict(Zs[fold.val])) if len(fold.val) else 0.0
        audit.record(fold_idx, f"{tag}/{name}:select", fold.val)
        if best is None or score < best[0]:
            best = (score, params, model)
    score, params, model = best
    return rmse(y[fold.test], model.predict(Zs[fold.test])), params, score


def _derive_seed(master: int, *key: int) -> int:
    ss = np.random.SeedSequence(master, spawn_key=key)
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def run_experiment(cfg: ExperimentConfig, dataset: Optional[TabularDataset] = None) -> ExperimentReport:
    """Run every fold of the representation x learner grid.

    For each fold, preprocessing, embedding and encoders are fitted on the
    training rows; encoder and learner hyperparameters are picked on the
    validation rows; RMSE is reported on the test rows.  A diverging encoder
    marks its row failed and the run goes on.
    """
    t0 = time.perf_counter()
    ds = dataset if dataset is not None else load_dataset(cfg)
    plan = make_folds(ds.n, cfg.folds, cfg.seed, cfg.preprocess.val_fraction)
    audit = LeakageAudit()
    kinds = [k for k in KINDS if k in cfg.encoders]
    reps = [r for r in ROW_ORDER if r in kinds or r == ORIGINAL]
    learners = [l for l in LEARNERS if l in cfg.learners]
    cells = {(r, l): Cell(r, l) for r in reps for l in learners}
    histories: dict[tuple[str, int], dict] = {}
    timing: dict[str, float] = {}

    for fi, fold in enumerate(plan.folds):
        if len(fold.val) == 0:
            raise RunError(f"fold {fi} has no validation rows; dataset too small")
        design = build_design(ds, cfg, fi, plan, audit, _derive_seed(cfg.seed, fi, 0))
        X, y = design.X, design.y
        representations: dict[str, np.ndarray] = {ORIGINAL: X}
        failures: dict[str, str] = {}

        for ki, kind in enumerate(kinds):
            t = time.perf_counter()
            best = None
            try:
                for ci, enc_cfg in enumerate(cfg.encoder_candidates(kind)):
                    enc_cfg = type(enc_cfg).from_dict({**enc_cfg.to_dict(), "seed": _derive_seed(cfg.seed, fi, 1, ki, ci)})
                    model = train_encoder(X[fold.train], enc_cfg, X[fold.val])
                    audit.record(fi, f"{kind}:fit", fold.train)
                    audit.record(fi, f"{kind}:early-stop:select", fold.val)
                    if cfg.selection == "downstream":
                        Z = encode(model, X)
                        score = min(_select_learner(l, cfg, Z, y, fold, _derive_seed(cfg.seed, fi, 2, ki, li),
                                                    audit, fi, kind)[2] for li, l in enumerate(learners))
                    else:
                        score = validation_loss(model, X[fold.val])
                    audit.record(fi, f"{kind}:candidate:select", fold.val)
                    if best is None or score < best[0]:
                        best = (score, model)
            except DivergenceError as exc:
                failures[kind] = str(exc)
                log.warning("fold %d: %s", fi, exc)
                continue
            model: EncoderModel = best[1]
            histories[(kind, fi)] = model.history
            representations[kind] = encode(model, X)
            timing[f"fold{fi}/{kind}"] = time.perf_counter() - t

        for ri, rep in enumerate(reps):
            for li, learner in enumerate(learners):
                cell = cells[(rep, learner)]
                if rep in failures:
                    cell.fold_rmse.append(None)
                    cell.best_params.append(None)
                    cell.failure = cell.failure or failures[rep]
                    continue
                t = time.perf_counter()
                score, params, _ = _select_learner(learner, cfg, representations[rep], y, fold,
                                                   _derive_seed(cfg.seed, fi, 3, ri, li), audit, fi, rep)
                cell.fold_rmse.append(score)
                cell.best_params.append(params)
                timing[f"fold{fi}/{rep}/{learner}"] = time.perf_counter() - t
        log.info("fold %d done", fi)

    if all(c.failed for c in cells.values()):
        raise RunError("every cell failed")
    timing["total"] = time.perf_counter() - t0
    report = ExperimentReport(cells, reps, learners, cfg.folds, cfg.seed, cfg.snapshot_hash(), timing,
                              histories, audit, plan)
    if cfg.audit_leakage:
        audit.check(plan)
    return report
