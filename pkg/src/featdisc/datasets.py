"""Numeric datasets: CSV ingest, stratified splits and synthetic generators.

Rows are stored column-wise in numpy arrays.  Every dataset carries the
original ``row_ids`` so that partitions can be audited after splitting and
subsampling.

Synthetic generators
--------------------
All generators draw ``field_count`` independent features and define a
ground-truth function ``truth = sum_f amp_f * shape_f(v_f)``.  Observations are
``truth + N(0, noise_sigma**2)`` and binary labels are ``observation >
median(truth)``; with ``noise_sigma == 0`` the labels threshold the truth
itself.

``linear``
    ``v_f ~ U(-1, 1)``, ``shape_f(v) = v``, ``amp_f = 1 / (f + 1)``.
``piecewise``
    ``v_f ~ U(-1, 1)``; ``shape_f`` is a step function with three random
    breakpoints in (-1, 1) and step heights drawn from ``U(-1, 1)``;
    ``amp_f = 1 / (f + 1)``.
``smooth-nonlinear``
    even fields ``v_f ~ N(0, 1)``, odd fields ``v_f ~ Exp(1)`` (skewed, like
    particle momenta); ``u`` is the standardized value and ``shape_f`` cycles
    through ``sin(2u)``, ``u**2 / 2``, ``tanh(3u)``, ``cos(3u)``,
    ``|u| - 0.8``; ``amp_f = 1.5 * 0.85**f`` so informativeness decays with
    the field index.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from featdisc.errors import ConfigurationError, EmptyInputError, ParseError, StructureError

GENERATORS = ("linear", "piecewise", "smooth-nonlinear")


@dataclass(frozen=True, eq=False)
class NumericDataset:
    features: np.ndarray
    labels: np.ndarray
    name: str = "dataset"
    row_ids: np.ndarray | None = None
    observations: np.ndarray | None = None

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64, ndmin=2)
        labels = np.asarray(self.labels)
        if features.shape[0] == 0 or features.shape[1] == 0:
            raise EmptyInputError(f"{self.name}: dataset needs at least one row and one field")
        if labels.shape != (features.shape[0],):
            raise StructureError(f"{self.name}: {labels.shape[0]} labels for {features.shape[0]} rows")
        if not np.all((labels == 0) | (labels == 1)):
            raise StructureError(f"{self.name}: labels must be 0 or 1")
        row_ids = self.row_ids
        row_ids = np.arange(features.shape[0]) if row_ids is None else np.asarray(row_ids, dtype=np.int64)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels.astype(np.int8))
        object.__setattr__(self, "row_ids", row_ids)
        for arr in (features, self.labels, row_ids):
            arr.setflags(write=False)
        if self.observations is not None:
            obs = np.asarray(self.observations, dtype=np.float64)
            obs.setflags(write=False)
            object.__setattr__(self, "observations", obs)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def field_count(self) -> int:
        return self.features.shape[1]

    @property
    def prevalence(self) -> float:
        return float(self.labels.mean())

    def take(self, idx: np.ndarray, name: str | None = None) -> "NumericDataset":
        """Subset rows by position, keeping row ids."""
        return NumericDataset(
            features=self.features[idx],
            labels=self.labels[idx],
            name=name or self.name,
            row_ids=self.row_ids[idx],
            observations=None if self.observations is None else self.observations[idx],
        )


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    valid_fraction: float = 0.1
    test_fraction: float = 0.1
    sample_ratio: float = 1.0
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_fraction, self.valid_fraction, self.test_fraction)
        if any(f <= 0 for f in fracs) or abs(sum(fracs) - 1.0) > 1e-9:
            raise ConfigurationError(f"split fractions must be positive and sum to 1, got {fracs}")
        if not 0 < self.sample_ratio <= 1:
            raise ConfigurationError(f"sample_ratio must be in (0, 1], got {self.sample_ratio}")


@dataclass(frozen=True)
class SyntheticSpec:
    generator_id: str = "smooth-nonlinear"
    field_count: int = 8
    row_count: int = 10_000
    noise_sigma: float = 1.0
    seed: int = 0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.generator_id not in GENERATORS:
            raise ConfigurationError(f"unknown generator {self.generator_id!r}; expected one of {GENERATORS}")
        if self.field_count < 1 or self.row_count < 1:
            raise ConfigurationError("field_count and row_count must be positive")
        if self.noise_sigma < 0:
            raise ConfigurationError("noise_sigma must be non-negative")


def _parse_label(text: str, line: int) -> int:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"label {text!r} is not a number", line) from None
    if value not in (0.0, 1.0):
        raise ParseError(f"label {text!r} is not 0 or 1", line)
    return int(value)


def _scan_csv(path: Path, max_rows: int | None):
    """Slow line-by-line reader that reports the first offending line."""
    labels, rows = [], []
    width = None
    opener = _open_text(path)
    with opener as fh:
        for lineno, parts in enumerate(csv.reader(fh), start=1):
            if max_rows is not None and len(rows) >= max_rows:
                break
            if not parts:
                continue
            if width is None:
                width = len(parts)
                if width < 2:
                    raise StructureError(f"line {lineno}: need a label and at least one feature")
            elif len(parts) != width:
                raise StructureError(f"line {lineno}: expected {width} columns, found {len(parts)}")
            labels.append(_parse_label(parts[0].strip(), lineno))
            try:
                rows.append([float(p) for p in parts[1:]])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
    return labels, rows


def _open_text(path: Path):
    if path.suffix == ".gz":
        import gzip

        return gzip.open(path, "rt", newline="")
    return open(path, newline="")


def load_csv(path, layout: str = "label_first", max_rows: int | None = None, name: str | None = None) -> NumericDataset:
    """Read a headerless comma-separated file with the binary label in column 0.

    ``max_rows`` reads only a prefix (HIGGS ships 11M rows). Gzip files are
    accepted.
    """
    if layout != "label_first":
        raise ConfigurationError(f"unsupported layout {layout!r}")
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)  # empty input is diagnosed below
            data = np.loadtxt(path, delimiter=",", ndmin=2, max_rows=max_rows, dtype=np.float64)
    except ValueError:
        data = None
    if data is None or data.size == 0 or data.shape[1] < 2 or not np.all(np.isin(data[:, 0], (0.0, 1.0))):
        # the fast path failed or cannot name the bad line; rescan for diagnostics
        labels, rows = _scan_csv(path, max_rows)
        if not rows:
            raise EmptyInputError(f"{path}: no rows")
        features = np.asarray(rows, dtype=np.float64)
        label_arr = np.asarray(labels)
    else:
        features, label_arr = data[:, 1:], data[:, 0]
    return NumericDataset(features=features, labels=label_arr.astype(np.int8), name=name or path.stem)


def _largest_remainder(total: int, weights: np.ndarray) -> np.ndarray:
    raw = total * weights / weights.sum()
    out = np.floor(raw).astype(np.int64)
    short = total - out.sum()
    order = np.argsort(-(raw - out), kind="stable")
    out[order[:short]] += 1
    return out


def split(dataset: NumericDataset, spec: SplitSpec):
    """Stratified train/valid/test partition; the train part is then subsampled.

    Partition sizes are fixed globally (valid and test get ``round(frac*n)``
    rows, train the rest) and distributed across the two classes by largest
    remainder.  Subsampling keeps a per-class prefix of the shuffled train
    rows, so smaller ratios give nested subsets and never touch valid/test.
    """
    n = len(dataset)
    n_valid = int(round(spec.valid_fraction * n))
    n_test = int(round(spec.test_fraction * n))
    n_train = n - n_valid - n_test
    if min(n_train, n_valid, n_test) <= 0:
        raise ConfigurationError(f"split of {n} rows leaves an empty partition ({n_train}/{n_valid}/{n_test})")

    rng = np.random.default_rng(spec.seed)
    classes = [np.flatnonzero(dataset.labels == c) for c in (0, 1)]
    classes = [rng.permutation(idx) for idx in classes]
    counts = np.array([len(idx) for idx in classes], dtype=float)
    valid_per = _largest_remainder(n_valid, counts)
    test_per = _largest_remainder(n_test, counts)

    parts = {"train": [], "valid": [], "test": []}
    for idx, nv, nt in zip(classes, valid_per, test_per):
        parts["valid"].append(idx[:nv])
        parts["test"].append(idx[nv : nv + nt])
        parts["train"].append(idx[nv + nt :])

    train_size = sum(len(p) for p in parts["train"])
    keep = math.ceil(round(spec.sample_ratio * train_size, 9))
    keep_per = _largest_remainder(keep, np.array([len(p) for p in parts["train"]], dtype=float))
    train_idx = np.sort(np.concatenate([p[:k] for p, k in zip(parts["train"], keep_per)]))
    valid_idx = np.sort(np.concatenate(parts["valid"]))
    test_idx = np.sort(np.concatenate(parts["test"]))
    if len(train_idx) == 0:
        raise ConfigurationError("subsampled train partition is empty")
    return (
        dataset.take(train_idx, f"{dataset.name}/train"),
        dataset.take(valid_idx, f"{dataset.name}/valid"),
        dataset.take(test_idx, f"{dataset.name}/test"),
    )


def _smooth_shapes():
    return (
        lambda u: np.sin(2.0 * u),
        lambda u: u**2 / 2.0,
        lambda u: np.tanh(3.0 * u),
        lambda u: np.cos(3.0 * u),
        lambda u: np.abs(u) - 0.8,
    )


def synthetic_truth(spec: SyntheticSpec, features: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
    """Ground-truth function for the generator; ``rng`` draws step layouts."""
    n, F = features.shape
    truth = np.zeros(n)
    if spec.generator_id == "linear":
        for f in range(F):
            truth += features[:, f] / (f + 1)
    elif spec.generator_id == "piecewise":
        rng = rng or np.random.default_rng(spec.seed)
        for f in range(F):
            breaks = np.sort(rng.uniform(-1, 1, size=3))
            heights = rng.uniform(-1, 1, size=4)
            truth += heights[np.searchsorted(breaks, features[:, f], side="right")] / (f + 1)
    else:
        shapes = _smooth_shapes()
        for f in range(F):
            col = features[:, f]
            u = (col - (1.0 if f % 2 else 0.0))
            truth += 1.5 * 0.85**f * shapes[f % len(shapes)](u)
    return truth


def generate_synthetic(spec: SyntheticSpec):
    """Draw a synthetic dataset; returns ``(dataset, truth)``."""
    rng = np.random.default_rng(spec.seed)
    n, F = spec.row_count, spec.field_count
    if spec.generator_id == "smooth-nonlinear":
        features = np.empty((n, F))
        for f in range(F):
            features[:, f] = rng.exponential(1.0, n) if f % 2 else rng.standard_normal(n)
    else:
        features = rng.uniform(-1.0, 1.0, size=(n, F))
    truth = synthetic_truth(spec, features, np.random.default_rng([spec.seed, 1]))
    noise = rng.standard_normal(n) * spec.noise_sigma if spec.noise_sigma > 0 else np.zeros(n)
    observations = truth + noise
    labels = (observations > np.median(truth)).astype(np.int8)
    name = spec.name or f"synthetic-{spec.generator_id}"
    truth.setflags(write=False)
    return NumericDataset(features, labels, name=name, observations=observations), truth


def with_name(dataset: NumericDataset, name: str) -> NumericDataset:
    return replace(dataset, name=name)
