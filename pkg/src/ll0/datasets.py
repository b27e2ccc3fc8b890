"""Benchmark datasets: generation, CSV ingestion, normalization, splitting and streaming."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import DatasetError, ParseError, SchemaError

BUILTIN = ("spirals", "digits", "radiology", "wine")
EXPECTED_SIZES = {"spirals": (2000, 2, 2), "digits": (1797, 64, 10),
                  "radiology": (569, 30, 2), "wine": (178, 13, 3)}


@dataclass(frozen=True)
class DataPoint:
    x: np.ndarray
    y: np.ndarray

    @property
    def label(self) -> int:
        return int(np.argmax(self.y))


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus integer labels.

    ``feature_ranges`` is a ``(d, 2)`` array of per-feature (min, max) taken
    from the training split, or ``None`` before splitting.
    """

    name: str
    X: np.ndarray
    labels: np.ndarray
    n_classes: int
    feature_ranges: np.ndarray | None = None
    class_names: tuple = ()

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[0] != self.labels.shape[0]:
            raise SchemaError(f"{self.name}: X shape {self.X.shape} does not match "
                              f"{self.labels.shape[0]} labels")

    def __len__(self):
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def Y(self) -> np.ndarray:
        """One-hot targets."""
        return np.eye(self.n_classes)[self.labels]

    @property
    def points(self) -> list[DataPoint]:
        Y = self.Y
        return [DataPoint(self.X[i], Y[i]) for i in range(len(self))]

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return replace(self, X=self.X[idx], labels=self.labels[idx])


def gen_spirals(n=2000, turns=1.75, radius=5.0, seed=None) -> Dataset:
    """Two intertwined, noise-free spirals; class 1 is class 0 rotated by pi.

    Points are interleaved (class 0, class 1) per index; ``seed`` only
    permutes that order.
    """
    if n % 2:
        raise DatasetError(f"spirals need an even number of points, got {n}")
    half = n // 2
    X = np.empty((n, 2))
    labels = np.empty(n, dtype=np.int64)
    for i in range(half):
        r = i / half * radius
        for k in (0, 1):
            phi = i / half * turns * 2 * math.pi + k * math.pi
            X[2 * i + k] = (r * math.sin(phi), r * math.cos(phi))
            labels[2 * i + k] = k
    if seed is not None:
        perm = np.random.default_rng(seed).permutation(n)
        X, labels = X[perm], labels[perm]
    return Dataset("spirals", X, labels, 2)


@dataclass(frozen=True)
class CsvSchema:
    n_features: int | None = None
    n_classes: int | None = None


def load_csv(path, schema: CsvSchema | None = None, name=None) -> Dataset:
    """Read a header-first CSV whose last column is the class label.

    Labels become class indices in order of first appearance.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"dataset file not found: {path}")
    rows, labels, classes = [], [], {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file", line=1) from None
        if len(header) < 2:
            raise SchemaError(f"{path}: need at least one feature and a label column")
        columns = header[:-1]
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: expected {len(header)} fields, got {len(row)}",
                                 line=line)
            feats = []
            for col, cell in zip(columns, row[:-1]):
                try:
                    feats.append(float(cell))
                except ValueError:
                    raise ParseError(f"{path}: non-numeric value {cell!r}",
                                     line=line, column=col) from None
            label = row[-1].strip()
            labels.append(classes.setdefault(label, len(classes)))
            rows.append(feats)
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    X = np.asarray(rows, dtype=float)
    if schema is not None:
        if schema.n_features is not None and X.shape[1] != schema.n_features:
            raise SchemaError(f"{path}: expected {schema.n_features} features, got {X.shape[1]}")
        if schema.n_classes is not None and len(classes) != schema.n_classes:
            raise SchemaError(f"{path}: expected {schema.n_classes} classes, got {len(classes)}")
    return Dataset(name or path.stem, X, np.asarray(labels, dtype=np.int64), len(classes),
                   class_names=tuple(classes))


def write_csv(ds: Dataset, path, feature_names=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(feature_names or (f"f{i}" for i in range(ds.n_features)))
    class_names = ds.class_names or tuple(str(k) for k in range(ds.n_classes))
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["label"])
        for x, lab in zip(ds.X, ds.labels):
            w.writerow([repr(float(v)) for v in x] + [class_names[lab]])
    return path


def load_builtin(name: str, seed=None) -> Dataset:
    """One of the four benchmark sets; the scikit-learn ones ship with the library."""
    if name == "spirals":
        return gen_spirals(seed=seed)
    from sklearn import datasets as skd

    loaders = {"digits": skd.load_digits, "radiology": skd.load_breast_cancer,
               "wine": skd.load_wine}
    if name not in loaders:
        raise DatasetError(f"unknown dataset {name!r}; expected one of {BUILTIN} or a CSV path")
    raw = loaders[name]()
    labels = np.asarray(raw.target, dtype=np.int64)
    names = tuple(str(t) for t in getattr(raw, "target_names", range(labels.max() + 1)))
    return Dataset(name, np.asarray(raw.data, dtype=float), labels, len(names),
                   class_names=names)


def resolve(name_or_path, seed=None) -> Dataset:
    if name_or_path in BUILTIN:
        return load_builtin(name_or_path, seed=seed)
    return load_csv(name_or_path)


def fit_ranges(ds: Dataset) -> np.ndarray:
    return np.stack([ds.X.min(axis=0), ds.X.max(axis=0)], axis=1)


def normalize(ds: Dataset) -> Dataset:
    """Min-max scale to [0, 1] with the stored ranges, then clamp to [-0.5, 1.5].

    Constant features map to 0.5.  The result carries unit ranges, so a
    second application is the identity.
    """
    ranges = ds.feature_ranges if ds.feature_ranges is not None else fit_ranges(ds)
    lo, hi = ranges[:, 0], ranges[:, 1]
    span = hi - lo
    const = span == 0
    X = (ds.X - lo) / np.where(const, 1.0, span)
    X[:, const] = 0.5
    X = np.clip(X, -0.5, 1.5)
    unit = np.tile([0.0, 1.0], (ds.n_features, 1))
    return replace(ds, X=X, feature_ranges=unit)


def split(ds: Dataset, fraction=0.8, seed=0) -> tuple[Dataset, Dataset]:
    """Seeded shuffle and split; both halves carry the train-split ranges."""
    if not 0.0 < fraction < 1.0:
        raise DatasetError(f"split fraction must lie in (0, 1), got {fraction}")
    perm = np.random.default_rng(seed).permutation(len(ds))
    cut = int(round(fraction * len(ds)))
    train, test = ds.take(perm[:cut]), ds.take(perm[cut:])
    ranges = fit_ranges(train)
    return replace(train, feature_ranges=ranges), replace(test, feature_ranges=ranges)


@dataclass
class StreamConfig:
    split_fraction: float = 0.8
    shuffle_seed: int = 0
    epochs: int = 1

    def __post_init__(self):
        if not 0.0 < self.split_fraction < 1.0:
            raise DatasetError(f"split_fraction must lie in (0, 1), got {self.split_fraction}")
        if self.epochs < 1:
            raise DatasetError(f"epochs must be >= 1, got {self.epochs}")


@dataclass
class Stream:
    train: Dataset
    test: Dataset
    epochs: int

    def __iter__(self) -> Iterator[DataPoint]:
        pts = self.train.points
        for _ in range(self.epochs):
            yield from pts

    def __len__(self):
        return len(self.train) * self.epochs


def stream(ds: Dataset, cfg: StreamConfig, scale=True) -> Stream:
    """Split ``ds`` and deliver the (normalized) training points one at a time.

    The order is fixed by ``cfg.shuffle_seed`` and repeats identically each
    epoch; the test split never enters the stream.
    """
    train, test = split(ds, cfg.split_fraction, cfg.shuffle_seed)
    if scale:
        train, test = normalize(train), normalize(test)
    return Stream(train, test, cfg.epochs)
