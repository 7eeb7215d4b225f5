"""CSV ingestion for mixed-type tabular data and the binary model container.

Model container layout (all integers little-endian)::

    offset  size  field
    0       4     magic b"DREP"
    4       2     format version (uint16), currently 1
    6       4     header length H in bytes (uint32)
    10      H     UTF-8 JSON header: {"meta": {...}, "blocks": [{"name", "shape"}, ...]}
    10+H    ...   float64 little-endian payload of each block, in header order

A file whose length differs from the one implied by the header is rejected.
"""
from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MAGIC = b"DREP"
FORMAT_VERSION = 1
UNKNOWN_CODE = -1

NUMERIC, CATEGORICAL, TARGET = "numeric", "categorical", "target"
DEFAULT_MISSING = ("",)


class SchemaError(ValueError):
    pass


class CsvParseError(ValueError):
    def __init__(self, row: int, column: str, value: str):
        super().__init__(f"row {row}, column {column!r}: cannot parse {value!r} as a number")
        self.row, self.column, self.value = row, column, value


class FormatError(ValueError):
    """Raised for corrupt, truncated or wrong-version container files."""


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str
    missing: tuple[str, ...] = ()


@dataclass(frozen=True)
class FeatureSchema:
    columns: tuple[ColumnSpec, ...]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate column names: {dup}")
        bad = [c.name for c in self.columns if c.kind not in (NUMERIC, CATEGORICAL, TARGET)]
        if bad:
            raise SchemaError(f"unknown column kind for {bad}")
        n_target = sum(c.kind == TARGET for c in self.columns)
        if n_target != 1:
            raise SchemaError(f"schema needs exactly one target column, found {n_target}")

    @classmethod
    def from_kinds(cls, kinds: dict[str, str], missing: Iterable[str] = ()) -> "FeatureSchema":
        miss = tuple(missing)
        return cls(tuple(ColumnSpec(n, k, miss) for n, k in kinds.items()))

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def numeric(self) -> list[str]:
        return [c.name for c in self.columns if c.kind == NUMERIC]

    @property
    def categorical(self) -> list[str]:
        return [c.name for c in self.columns if c.kind == CATEGORICAL]

    @property
    def target(self) -> str:
        return next(c.name for c in self.columns if c.kind == TARGET)

    def to_dict(self) -> dict:
        return {"columns": [{"name": c.name, "kind": c.kind, "missing": list(c.missing)} for c in self.columns]}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        return cls(tuple(ColumnSpec(c["name"], c["kind"], tuple(c.get("missing", ()))) for c in d["columns"]))


@dataclass
class TabularDataset:
    """Typed columns plus a per-cell missing mask.

    Missing numeric cells hold 0.0 and missing categorical cells hold
    ``UNKNOWN_CODE``; the masks are the source of truth for missingness.
    """

    schema: FeatureSchema
    numeric: np.ndarray            # (n, p_num) float64
    categorical: np.ndarray        # (n, p_cat) int64 level codes
    levels: list[list[str]]        # per categorical column, code -> level string
    numeric_mask: np.ndarray       # (n, p_num) bool, True = missing
    categorical_mask: np.ndarray   # (n, p_cat) bool
    target: np.ndarray             # (n,) float64

    def __post_init__(self):
        n = self.n
        for name, block in [("numeric", self.numeric), ("categorical", self.categorical),
                            ("numeric_mask", self.numeric_mask), ("categorical_mask", self.categorical_mask)]:
            if block.ndim != 2 or block.shape[0] != n:
                raise SchemaError(f"{name} block has shape {block.shape}, expected {n} rows")
        for j, lv in enumerate(self.levels):
            if self.categorical.shape[0] and self.categorical[:, j].max(initial=UNKNOWN_CODE) >= len(lv):
                raise SchemaError(f"level code out of range in column {self.schema.categorical[j]!r}")

    @property
    def n(self) -> int:
        return len(self.target)

    @property
    def has_missing(self) -> bool:
        return bool(self.numeric_mask.any() or self.categorical_mask.any())

    def subset(self, rows) -> "TabularDataset":
        rows = np.asarray(rows)
        return TabularDataset(self.schema, self.numeric[rows], self.categorical[rows],
                              [list(lv) for lv in self.levels], self.numeric_mask[rows],
                              self.categorical_mask[rows], self.target[rows])

    def replace(self, **kw) -> "TabularDataset":
        fields_ = dict(schema=self.schema, numeric=self.numeric, categorical=self.categorical,
                       levels=self.levels, numeric_mask=self.numeric_mask,
                       categorical_mask=self.categorical_mask, target=self.target)
        fields_.update(kw)
        return TabularDataset(**fields_)

    def equals(self, other: "TabularDataset") -> bool:
        return (self.schema == other.schema
                and np.array_equal(self.numeric, other.numeric)
                and np.array_equal(self.categorical, other.categorical)
                and self.levels == other.levels
                and np.array_equal(self.numeric_mask, other.numeric_mask)
                and np.array_equal(self.categorical_mask, other.categorical_mask)
                and np.array_equal(self.target, other.target))


def from_arrays(X, y, prefix: str = "x", target: str = "y") -> TabularDataset:
    """All-numeric dataset from a dense matrix; NaN cells are marked missing."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != len(y):
        raise SchemaError(f"X of shape {X.shape} does not match {len(y)} targets")
    if np.isnan(y).any():
        raise SchemaError("target contains NaN")
    schema = FeatureSchema.from_kinds({**{f"{prefix}{j}": NUMERIC for j in range(X.shape[1])}, target: TARGET})
    mask = np.isnan(X)
    n = len(y)
    return TabularDataset(schema, np.where(mask, 0.0, X), np.zeros((n, 0), dtype=np.int64), [],
                          mask, np.zeros((n, 0), dtype=bool), y)


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise CsvParseError(row, column, text) from None
    if not math.isfinite(value):
        raise CsvParseError(row, column, text)
    return value


def load_csv(path, schema: FeatureSchema) -> TabularDataset:
    """Read a header-first CSV file into a :class:`TabularDataset`.

    Empty cells and each column's declared marker tokens are treated as
    missing.  Categorical levels get codes in order of first appearance.
    Rows are numbered from 1 for the first data line in error messages.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if header != schema.names:
            raise SchemaError(f"header {header} does not match schema columns {schema.names}")
        records = list(reader)

    spec = {c.name: c for c in schema.columns}
    pos = {name: i for i, name in enumerate(header)}
    num_cols, cat_cols = schema.numeric, schema.categorical
    n = len(records)
    numeric = np.zeros((n, len(num_cols)))
    num_mask = np.zeros((n, len(num_cols)), dtype=bool)
    cats = np.full((n, len(cat_cols)), UNKNOWN_CODE, dtype=np.int64)
    cat_mask = np.zeros((n, len(cat_cols)), dtype=bool)
    levels: list[list[str]] = [[] for _ in cat_cols]
    lookup: list[dict[str, int]] = [{} for _ in cat_cols]
    target = np.zeros(n)

    for r, rec in enumerate(records, start=1):
        if len(rec) != len(header):
            raise SchemaError(f"row {r} has {len(rec)} fields, expected {len(header)}")
        for j, name in enumerate(num_cols):
            cell = rec[pos[name]]
            if cell in DEFAULT_MISSING or cell in spec[name].missing:
                num_mask[r - 1, j] = True
            else:
                numeric[r - 1, j] = _parse_float(cell, r, name)
        for j, name in enumerate(cat_cols):
            cell = rec[pos[name]]
            if cell in DEFAULT_MISSING or cell in spec[name].missing:
                cat_mask[r - 1, j] = True
                continue
            code = lookup[j].get(cell)
            if code is None:
                code = lookup[j][cell] = len(levels[j])
                levels[j].append(cell)
            cats[r - 1, j] = code
        tname = schema.target
        cell = rec[pos[tname]]
        if cell in DEFAULT_MISSING or cell in spec[tname].missing:
            raise SchemaError(f"row {r}: target column {tname!r} is missing")
        target[r - 1] = _parse_float(cell, r, tname)

    return TabularDataset(schema, numeric, cats, levels, num_mask, cat_mask, target)


def save_csv(ds: TabularDataset, path) -> None:
    """Write ``ds`` so that :func:`load_csv` reproduces it bit-exactly."""
    num_idx = {n: j for j, n in enumerate(ds.schema.numeric)}
    cat_idx = {n: j for j, n in enumerate(ds.schema.categorical)}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ds.schema.names)
        for i in range(ds.n):
            row = []
            for c in ds.schema.columns:
                if c.kind == NUMERIC:
                    j = num_idx[c.name]
                    row.append("" if ds.numeric_mask[i, j] else repr(float(ds.numeric[i, j])))
                elif c.kind == CATEGORICAL:
                    j = cat_idx[c.name]
                    row.append("" if ds.categorical_mask[i, j] else ds.levels[j][ds.categorical[i, j]])
                else:
                    row.append(repr(float(ds.target[i])))
            w.writerow(row)


def infer_schema(path, target: str, categorical: Sequence[str] = (), missing: Iterable[str] = ("NA",)) -> FeatureSchema:
    """Build a schema from a CSV header; non-numeric columns become categorical."""
    miss = tuple(missing)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    if target not in header:
        raise SchemaError(f"target column {target!r} not in header {header}")
    cols = []
    for j, name in enumerate(header):
        if name == target:
            kind = TARGET
        elif name in categorical:
            kind = CATEGORICAL
        else:
            kind = NUMERIC
            for rec in rows:
                cell = rec[j]
                if cell in miss or cell == "":
                    continue
                try:
                    float(cell)
                except ValueError:
                    kind = CATEGORICAL
                    break
        cols.append(ColumnSpec(name, kind, miss))
    return FeatureSchema(tuple(cols))


# ---------------------------------------------------------------------------
# binary container

def write_container(path, meta: dict, blocks: dict[str, np.ndarray]) -> None:
    header = {"meta": meta, "blocks": [{"name": k, "shape": list(np.shape(v))} for k, v in blocks.items()]}
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", FORMAT_VERSION, len(hbytes)))
        fh.write(hbytes)
        for v in blocks.values():
            fh.write(np.ascontiguousarray(v, dtype="<f8").tobytes())


def read_container(path) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    if len(raw) < 10 or raw[:4] != MAGIC:
        raise FormatError(f"{path}: not a model container (bad magic or too short)")
    version, hlen = struct.unpack("<HI", raw[4:10])
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: container version {version}, expected {FORMAT_VERSION}")
    if len(raw) < 10 + hlen:
        raise FormatError(f"{path}: truncated header")
    try:
        header = json.loads(raw[10:10 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupt header ({exc})") from None
    offset = 10 + hlen
    blocks = {}
    for b in header["blocks"]:
        shape = tuple(b["shape"])
        nbytes = 8 * int(np.prod(shape, dtype=np.int64))
        if offset + nbytes > len(raw):
            raise FormatError(f"{path}: truncated payload in block {b['name']!r}")
        blocks[b["name"]] = np.frombuffer(raw, dtype="<f8", count=nbytes // 8, offset=offset).astype(np.float64).reshape(shape)
        offset += nbytes
    if offset != len(raw):
        raise FormatError(f"{path}: {len(raw) - offset} trailing bytes")
    return header["meta"], blocks


def save_model(model, path) -> None:
    meta, blocks = model.to_state()
    write_container(path, meta, blocks)


def load_model(path):
    from .encoders import EncoderModel

    meta, blocks = read_container(path)
    if meta.get("type") != "encoder":
        raise FormatError(f"{path}: container does not hold an encoder model")
    return EncoderModel.from_state(meta, blocks)
