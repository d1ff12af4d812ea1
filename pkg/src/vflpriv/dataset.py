"""Loading, encoding, normalizing, splitting and synthesizing classification data.

All transformations are pure and deterministic given their inputs and seeds.
Feature matrices live in [0, 1]; labels are integers in [0, k-1].
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


class DataError(Exception):
    """Raised for malformed input tables or invalid dataset parameters."""


@dataclass
class RawTable:
    """A rectangular table of mixed numeric/categorical cells plus a label column."""

    columns: list[list]          # column-major cells; label column excluded
    names: list[str]             # feature names (label column excluded)
    labels: list                 # raw label cells
    categorical: list[bool]      # per-feature flag

    @property
    def n_rows(self) -> int:
        return len(self.labels)

    @property
    def n_features(self) -> int:
        return len(self.columns)


@dataclass
class Dataset:
    """Normalized feature matrix with labels and a train/test partition."""

    x: np.ndarray                # n x d_t, entries in [0, 1]
    y: np.ndarray                # n integer labels in [0, k-1]
    k: int
    feature_names: list[str]
    train_mask: np.ndarray = field(default=None)
    test_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=int)
        if self.x.ndim != 2 or self.x.shape[0] != self.y.shape[0]:
            raise DataError("feature matrix and labels disagree on sample count")
        if self.x.size and (self.x.min() < 0.0 or self.x.max() > 1.0):
            raise DataError("feature values must lie in [0, 1]")
        if self.y.size and (self.y.min() < 0 or self.y.max() >= self.k):
            raise DataError("labels must lie in [0, k-1]")
        if self.train_mask is None:
            self.train_mask = np.ones(self.n, dtype=bool)
        if self.test_mask is None:
            self.test_mask = ~self.train_mask

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d_t(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters for the class-conditional Gaussian synthetic generator."""

    n: int = 50_000
    d_t: int = 10
    k: int = 2
    separation: float = 1.0
    cov_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < self.k:
            raise DataError("need at least one sample per class")
        if self.d_t < 1:
            raise DataError("need at least one feature")


def _is_number(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def load_csv(path, label_col: int = -1) -> RawTable:
    """Read a UTF-8 comma-delimited file with a header row into a RawTable.

    label_col indexes the header (default: last column). Columns containing
    any non-numeric cell are tagged categorical.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError("empty file")
    header, data = rows[0], rows[1:]
    if not data:
        raise DataError("no data rows")
    width = len(header)
    for i, row in enumerate(data):
        if len(row) != width:
            raise DataError(f"ragged row {i + 2}: expected {width} cells, got {len(row)}")
    label_col = label_col % width
    labels = [row[label_col] for row in data]
    if len(set(labels)) < 2:
        raise DataError("label column must have at least 2 distinct values")
    feat_idx = [j for j in range(width) if j != label_col]
    columns = [[row[j] for row in data] for j in feat_idx]
    names = [header[j] for j in feat_idx]
    categorical = [not all(_is_number(c) for c in col) for col in columns]
    return RawTable(columns=columns, names=names, labels=labels, categorical=categorical)


def encode_labels(raw_labels) -> tuple[np.ndarray, int]:
    """Map raw label cells to dense integers 0..k-1 in sorted-value order."""
    values = sorted(set(str(v) for v in raw_labels))
    lut = {v: i for i, v in enumerate(values)}
    return np.array([lut[str(v)] for v in raw_labels]), len(values)


def encode_categoricals(table: RawTable, train_mask=None) -> np.ndarray:
    """Replace categorical values by the training-set mean label of the category.

    Categories never seen in training fall back to the global training mean.
    Numeric columns pass through unchanged. Returns an n x d float matrix.
    """
    y, _ = encode_labels(table.labels)
    n = table.n_rows
    if train_mask is None:
        train_mask = np.ones(n, dtype=bool)
    train_mask = np.asarray(train_mask, dtype=bool)
    out = np.empty((n, table.n_features))
    y_train = y[train_mask].astype(float)
    global_mean = float(y_train.mean()) if y_train.size else 0.0
    for j, col in enumerate(table.columns):
        if not table.categorical[j]:
            out[:, j] = [float(c) for c in col]
            continue
        sums: dict[str, float] = {}
        counts: dict[str, int] = {}
        for i in np.flatnonzero(train_mask):
            key = col[i]
            sums[key] = sums.get(key, 0.0) + float(y[i])
            counts[key] = counts.get(key, 0) + 1
        means = {key: sums[key] / counts[key] for key in sums}
        out[:, j] = [means.get(c, global_mean) for c in col]
    return out


def normalize(values: np.ndarray, labels, k: int | None = None,
              feature_names=None, train_mask=None) -> Dataset:
    """Per-feature min-max scaling into [0, 1], computed over the whole table.

    Constant features map to 0. Pass train_mask to restrict the min/max
    statistics to training rows (off by default: the reference procedure
    scales the entire table; resulting test values are clipped to [0, 1]).
    """
    values = np.asarray(values, dtype=float)
    y = np.asarray(labels, dtype=int)
    if k is None:
        k = int(y.max()) + 1
    ref = values if train_mask is None else values[np.asarray(train_mask, dtype=bool)]
    lo = ref.min(axis=0)
    hi = ref.max(axis=0)
    span = hi - lo
    span[span == 0.0] = 1.0  # constant features map to 0
    x = np.clip((values - lo) / span, 0.0, 1.0)
    names = list(feature_names) if feature_names is not None else [
        f"f{j}" for j in range(values.shape[1])]
    return Dataset(x=x, y=y, k=k, feature_names=names)


def split(ds: Dataset, fraction: float = 0.8, seed: int = 0) -> Dataset:
    """Deterministic shuffled train/test split; masks are disjoint and exhaustive."""
    if not 0.0 < fraction < 1.0:
        raise DataError("train fraction must be in (0, 1)")
    n = ds.n
    n_train = int(round(fraction * n))
    if n_train < 1 or n - n_train < 1:
        raise DataError("split leaves fewer than one sample on a side")
    perm = np.random.default_rng(seed).permutation(n)
    train_mask = np.zeros(n, dtype=bool)
    train_mask[perm[:n_train]] = True
    return Dataset(x=ds.x, y=ds.y, k=ds.k, feature_names=ds.feature_names,
                   train_mask=train_mask, test_mask=~train_mask)


def synthesize(spec: SyntheticSpec) -> Dataset:
    """Class-conditional Gaussian clusters, min-max normalized to [0, 1].

    Per-class means sit on a hypercube scaled by the separation scalar with
    isotropic covariance before normalization. Labels are balanced.
    """
    rng = np.random.default_rng(spec.seed)
    # balanced labels: round-robin assignment, then shuffled
    y = np.arange(spec.n) % spec.k
    rng.shuffle(y)
    signs = rng.choice([-1.0, 1.0], size=(spec.k, spec.d_t))
    means = spec.separation * signs
    x = means[y] + spec.cov_scale * rng.standard_normal((spec.n, spec.d_t))
    ds = normalize(x, y, k=spec.k)
    return split(ds, fraction=0.8, seed=spec.seed)


def load_dataset(path, label_col: int = -1, train_fraction: float = 0.8,
                 seed: int = 0, normalize_train_only: bool = False) -> Dataset:
    """Full pipeline: CSV -> categorical encoding -> normalize -> split."""
    table = load_csv(path, label_col=label_col)
    y, k = encode_labels(table.labels)
    # the split must be fixed before target-mean encoding (training rows only)
    n = table.n_rows
    n_train = int(round(train_fraction * n))
    perm = np.random.default_rng(seed).permutation(n)
    train_mask = np.zeros(n, dtype=bool)
    train_mask[perm[:n_train]] = True
    values = encode_categoricals(table, train_mask)
    ds = normalize(values, y, k=k, feature_names=table.names,
                   train_mask=train_mask if normalize_train_only else None)
    return Dataset(x=ds.x, y=ds.y, k=k, feature_names=ds.feature_names,
                   train_mask=train_mask, test_mask=~train_mask)
