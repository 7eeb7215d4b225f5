"""Experiment configuration: YAML document -> validated :class:`ExperimentConfig`.

Top-level keys (all but ``dataset`` optional)::

    dataset:       {path, target, categorical: [...], missing: [...], columns: {name: kind}}
    preprocess:    {zmax: 4.0, val_fraction: 0.1}
    embedding:     {dim: 8, lr: 0.05, epochs: 300, xmax: 100.0, alpha: 0.75}
    encoders:      {SSAE: {...}, DBN: {...}, VAE: {...}, AAE: {...}}
    learners:      {RF: {...}, Lasso: {...}, SVM: {...}}
    folds:         5
    seed:          0
    output:        out
    selection:     reconstruction | downstream
    paper_faithful: false
    audit_leakage:  false

Inside ``encoders`` and ``learners`` every option may be a scalar or a list;
lists are grid axes and the candidates are their Cartesian product.  For
options whose value is itself a sequence (``hidden``, ``disc_hidden``) a
flat list is one value and a list of lists is a grid.
"""
from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

import yaml

from ..embed import GloveConfig
from ..encoders import KINDS, EncoderConfig
from ..supervised import ForestConfig, SvrConfig

LEARNERS = ("RF", "Lasso", "SVM")
LEARNER_ALIASES = {"SVR": "SVM", "rf": "RF", "lasso": "Lasso", "svm": "SVM", "svr": "SVM"}
SEQUENCE_OPTIONS = {"hidden", "disc_hidden"}


class ConfigError(ValueError):
    pass


DEFAULT_ENCODER_GRIDS: dict[str, dict[str, Any]] = {kind: {} for kind in KINDS}
DEFAULT_LEARNER_GRIDS: dict[str, dict[str, Any]] = {
    "RF": {"n_trees": 200, "min_leaf": 5},
    "Lasso": {"lam": [0.001, 0.01, 0.1]},
    "SVM": {"C": [1.0], "epsilon": [0.1]},
}
LASSO_OPTIONS = {"lam", "tol", "max_iter"}


@dataclass(frozen=True)
class DatasetConfig:
    path: str
    target: str
    categorical: tuple[str, ...] = ()
    missing: tuple[str, ...] = ("NA",)
    columns: Optional[dict] = None


@dataclass(frozen=True)
class PreprocessConfig:
    zmax: Optional[float] = 4.0
    val_fraction: float = 0.1


@dataclass(frozen=True)
class EmbeddingConfig:
    dim: int = 8
    lr: float = 0.05
    epochs: int = 300
    xmax: float = 100.0
    alpha: float = 0.75

    def glove(self, seed: int) -> GloveConfig:
        return GloveConfig(self.lr, self.epochs, self.xmax, self.alpha, seed)


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    encoders: dict[str, dict[str, Any]] = field(default_factory=lambda: {k: dict(v) for k, v in DEFAULT_ENCODER_GRIDS.items()})
    learners: dict[str, dict[str, Any]] = field(default_factory=lambda: {k: dict(v) for k, v in DEFAULT_LEARNER_GRIDS.items()})
    folds: int = 5
    seed: int = 0
    output: str = "out"
    selection: str = "reconstruction"
    paper_faithful: bool = False
    audit_leakage: bool = False

    def to_dict(self) -> dict:
        return {
            "dataset": {"path": self.dataset.path, "target": self.dataset.target,
                        "categorical": list(self.dataset.categorical), "missing": list(self.dataset.missing),
                        "columns": self.dataset.columns},
            "preprocess": vars(self.preprocess).copy(),
            "embedding": vars(self.embedding).copy(),
            "encoders": self.encoders, "learners": self.learners,
            "folds": self.folds, "seed": self.seed, "output": self.output,
            "selection": self.selection, "paper_faithful": self.paper_faithful,
            "audit_leakage": self.audit_leakage,
        }

    def snapshot_hash(self) -> str:
        """SHA-256 of the canonical config, ignoring the output directory."""
        d = self.to_dict()
        d.pop("output")
        return hashlib.sha256(json.dumps(d, sort_keys=True, default=list).encode()).hexdigest()

    def encoder_candidates(self, kind: str) -> list[EncoderConfig]:
        return [EncoderConfig.from_dict({"kind": kind, **point}) for point in expand_grid(self.encoders[kind])]

    def learner_candidates(self, name: str) -> list[dict]:
        return expand_grid(self.learners[name])


def expand_grid(grid: dict[str, Any]) -> list[dict]:
    """Cartesian product of the list-valued options of ``grid``."""
    keys, axes = [], []
    for key, value in grid.items():
        if key in SEQUENCE_OPTIONS:
            is_axis = isinstance(value, list) and value and isinstance(value[0], (list, tuple))
        else:
            is_axis = isinstance(value, list)
        if is_axis and not value:
            raise ConfigError(f"grid axis {key!r} is empty")
        keys.append(key)
        axes.append(value if is_axis else [value])
    return [dict(zip(keys, combo)) for combo in itertools.product(*axes)]


def _section(cls, data: Any, name: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    allowed = {f.name for f in fields(cls)}
    for key in data:
        if key not in allowed:
            raise ConfigError(f"unknown key {name}.{key}")
    return cls(**data)


def _check_encoder_grid(kind: str, grid: dict) -> None:
    allowed = {f.name for f in fields(EncoderConfig)} - {"kind"}
    for key in grid:
        if key not in allowed:
            raise ConfigError(f"unknown key encoders.{kind}.{key}")
    for point in expand_grid(grid):
        try:
            EncoderConfig.from_dict({"kind": kind, **point})
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"encoders.{kind}: {exc}") from None


def _check_learner_grid(name: str, grid: dict) -> None:
    allowed = {"RF": {f.name for f in fields(ForestConfig)} - {"seed"},
               "Lasso": LASSO_OPTIONS,
               "SVM": {f.name for f in fields(SvrConfig)} - {"seed"}}[name]
    for key in grid:
        if key not in allowed:
            raise ConfigError(f"unknown key learners.{name}.{key}")
    expand_grid(grid)


KNOWN_TOP = {"dataset", "preprocess", "embedding", "encoders", "learners", "folds", "seed", "output",
             "selection", "paper_faithful", "audit_leakage"}


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a YAML experiment document, filling every default."""
    try:
        doc = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    for key in doc:
        if key not in KNOWN_TOP:
            raise ConfigError(f"unknown key {key}")

    ds = doc.get("dataset")
    if not isinstance(ds, dict) or not ds.get("path"):
        raise ConfigError("dataset.path is required")
    if not ds.get("target"):
        raise ConfigError("dataset.target is required")
    for key in ds:
        if key not in {f.name for f in fields(DatasetConfig)}:
            raise ConfigError(f"unknown key dataset.{key}")
    dataset = DatasetConfig(path=str(ds["path"]), target=str(ds["target"]),
                            categorical=tuple(ds.get("categorical") or ()),
                            missing=tuple(ds.get("missing", ("NA",)) or ()),
                            columns=ds.get("columns"))

    encoders = doc.get("encoders", None)
    if encoders is None:
        encoders = {k: dict(v) for k, v in DEFAULT_ENCODER_GRIDS.items()}
    if isinstance(encoders, list):
        encoders = {k: {} for k in encoders}
    if not isinstance(encoders, dict):
        raise ConfigError("encoders must be a mapping of kind -> grid")
    for kind, grid in list(encoders.items()):
        if kind not in KINDS:
            raise ConfigError(f"unknown key encoders.{kind}")
        encoders[kind] = dict(grid or {})
        _check_encoder_grid(kind, encoders[kind])

    learners = doc.get("learners", None)
    if learners is None:
        learners = {k: dict(v) for k, v in DEFAULT_LEARNER_GRIDS.items()}
    if isinstance(learners, list):
        learners = {k: {} for k in learners}
    if not isinstance(learners, dict) or not learners:
        raise ConfigError("learners must be a non-empty mapping of name -> grid")
    canon = {}
    for name, grid in learners.items():
        key = LEARNER_ALIASES.get(name, name)
        if key not in LEARNERS:
            raise ConfigError(f"unknown key learners.{name}")
        merged = dict(DEFAULT_LEARNER_GRIDS[key])
        merged.update(grid or {})
        _check_learner_grid(key, merged)
        canon[key] = merged
    learners = {k: canon[k] for k in LEARNERS if k in canon}

    folds = doc.get("folds", 5)
    if not isinstance(folds, int) or folds < 2:
        raise ConfigError(f"folds must be an integer >= 2, got {folds!r}")
    selection = doc.get("selection", "reconstruction")
    if selection not in ("reconstruction", "downstream"):
        raise ConfigError(f"selection must be 'reconstruction' or 'downstream', got {selection!r}")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}")

    pre = _section(PreprocessConfig, doc.get("preprocess"), "preprocess")
    if pre.zmax is not None and not pre.zmax > 0:
        raise ConfigError("preprocess.zmax must be > 0 (or null to disable clipping)")
    emb = _section(EmbeddingConfig, doc.get("embedding"), "embedding")
    if emb.dim < 1:
        raise ConfigError("embedding.dim must be >= 1")

    return ExperimentConfig(dataset, pre, emb, encoders, learners, folds, seed,
                            str(doc.get("output", "out")), selection,
                            bool(doc.get("paper_faithful", False)), bool(doc.get("audit_leakage", False)))


def load_config(path) -> ExperimentConfig:
    """Read a config file; a relative dataset path is taken relative to the file."""
    with open(path) as fh:
        cfg = parse_config(fh.read())
    data_path = Path(cfg.dataset.path)
    if not data_path.is_absolute():
        cfg.dataset = replace(cfg.dataset, path=str(Path(path).resolve().parent / data_path))
    return cfg
