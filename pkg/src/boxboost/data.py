"""Tabular datasets: CSV ingestion, synthetic generators, splitting, metrics.

All features and targets are dense float64 arrays with no missing values.
Categorical encoding is deliberately out of scope; feed numeric columns only.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _scipy_stats

TASK_REGRESSION = "regression"
TASK_BINARY = "binary-classification"
TASK_MULTICLASS = "multiclass-classification"

_VALID_TASKS = (TASK_REGRESSION, TASK_BINARY, TASK_MULTICLASS)


class CsvFormatError(ValueError):
    """Raised when a CSV file cannot be parsed into a numeric dataset."""


@dataclass
class Dataset:
    """Immutable in-memory table of features and targets.

    features : (N, d) float64 matrix, all finite
    targets  : (N,) float64 vector, all finite
    feature_names : d column labels
    task : "regression", "binary-classification" or "multiclass-classification"
    """

    features: np.ndarray
    targets: np.ndarray
    feature_names: list[str]
    task: str = TASK_REGRESSION

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.targets = np.ascontiguousarray(self.targets, dtype=np.float64)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        n, d = self.features.shape
        if n < 1 or d < 1:
            raise ValueError("dataset needs at least one row and one column")
        if self.targets.shape != (n,):
            raise ValueError(
                f"targets length {self.targets.shape} does not match {n} rows"
            )
        if len(self.feature_names) != d:
            raise ValueError("feature_names length must equal feature count")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain NaN or infinite values")
        if not np.all(np.isfinite(self.targets)):
            raise ValueError("targets contain NaN or infinite values")
        if self.task not in _VALID_TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.task == TASK_BINARY and not np.all(np.isin(self.targets, (0.0, 1.0))):
            raise ValueError("binary-classification targets must be 0 or 1")
        if self.task == TASK_MULTICLASS:
            if np.any(self.targets < 0) or np.any(self.targets != np.round(self.targets)):
                raise ValueError("multiclass targets must be non-negative integers")
        # Guards against accidental mutation; reads stay cheap and thread-safe.
        self.features.flags.writeable = False
        self.targets.flags.writeable = False

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass
class SplitPair:
    """Index-based train/validation split.

    Indices are disjoint and together cover every row exactly once.
    ``seed_state`` is the generator after drawing this split, so passing it
    back to :func:`split` produces a fresh, reproducible re-split.
    """

    train_indices: np.ndarray
    val_indices: np.ndarray
    seed_state: np.random.Generator = field(repr=False)


def read_table(path) -> tuple[list[str], np.ndarray]:
    """Read a headered numeric CSV into (column names, float matrix).

    Parse failures name the offending row (1-based file line) and column.
    """
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except FileNotFoundError:
        raise CsvFormatError(f"no such file: {path}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: file is empty") from None
        header = [name.strip() for name in header]

        rows: list[list[float]] = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CsvFormatError(
                    f"{path}: row {line_no} has {len(row)} cells, expected {len(header)}"
                )
            parsed = []
            for col_idx, cell in enumerate(row):
                try:
                    value = float(cell)
                except ValueError:
                    raise CsvFormatError(
                        f"{path}: non-numeric cell {cell!r} at row {line_no}, "
                        f"column {header[col_idx]!r}"
                    ) from None
                parsed.append(value)
            rows.append(parsed)

    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    return header, np.asarray(rows, dtype=np.float64)


def load_csv(path, target_column) -> Dataset:
    """Load a numeric CSV (header row, '.' decimals) into a :class:`Dataset`.

    ``target_column`` selects the target by header label or 0-based column
    index; the remaining columns become features in header order.
    """
    header, table = read_table(path)
    if isinstance(target_column, int) and not isinstance(target_column, bool):
        if not 0 <= target_column < len(header):
            raise CsvFormatError(
                f"target column index {target_column} out of range (file has "
                f"{len(header)} columns)"
            )
        target_idx = target_column
    else:
        try:
            target_idx = header.index(str(target_column))
        except ValueError:
            raise CsvFormatError(
                f"target column {target_column!r} not found in header {header}"
            ) from None
    targets = table[:, target_idx]
    features = np.delete(table, target_idx, axis=1)
    names = [name for i, name in enumerate(header) if i != target_idx]
    task = TASK_BINARY if np.all(np.isin(targets, (0.0, 1.0))) else TASK_REGRESSION
    return Dataset(features, targets, names, task)


def friedman1_signal(X: np.ndarray) -> np.ndarray:
    """Noise-free Friedman #1 response for features in [0, 1]."""
    X = np.asarray(X, dtype=np.float64)
    return (
        10.0 * np.sin(np.pi * X[:, 0] * X[:, 1])
        + 20.0 * (X[:, 2] - 0.5) ** 2
        + 10.0 * X[:, 3]
        + 5.0 * X[:, 4]
    )


def gen_friedman1(n: int, seed: int, noise: float = 1.0) -> Dataset:
    """Friedman #1 regression data: 10 uniform features, 5 informative.

    Target is ``10 sin(pi x1 x2) + 20 (x3 - 0.5)^2 + 10 x4 + 5 x5`` plus
    Gaussian noise with standard deviation ``noise``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, size=(n, 10))
    y = friedman1_signal(X)
    if noise > 0:
        y = y + noise * rng.standard_normal(n)
    names = [f"x{j + 1}" for j in range(10)]
    return Dataset(X, y, names, TASK_REGRESSION)


def gen_two_moons(n: int, noise: float, seed: int) -> Dataset:
    """Two interleaving half-circles, the usual 2-D binary benchmark.

    Class 0 sits on the upper half-circle of radius 1 around the origin,
    class 1 on a lower half-circle shifted to interleave. Class counts
    differ by at most one.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if noise < 0:
        raise ValueError("noise must be non-negative")
    n_outer = n // 2
    n_inner = n - n_outer
    t_outer = np.linspace(0.0, np.pi, n_outer)
    t_inner = np.linspace(0.0, np.pi, n_inner)
    X = np.empty((n, 2))
    X[:n_outer, 0] = np.cos(t_outer)
    X[:n_outer, 1] = np.sin(t_outer)
    X[n_outer:, 0] = 1.0 - np.cos(t_inner)
    X[n_outer:, 1] = 0.5 - np.sin(t_inner)
    y = np.concatenate([np.zeros(n_outer), np.ones(n_inner)])
    if noise > 0:
        rng = np.random.default_rng(seed)
        X = X + rng.normal(0.0, noise, size=X.shape)
    return Dataset(X, y, ["x1", "x2"], TASK_BINARY)


def gen_blobs(n: int, n_classes: int, seed: int, spread: float = 0.5) -> Dataset:
    """Gaussian blobs on a circle, one per class; used for multi-class runs."""
    if n < n_classes or n_classes < 2:
        raise ValueError("need n >= n_classes >= 2")
    rng = np.random.default_rng(seed)
    angles = 2.0 * np.pi * np.arange(n_classes) / n_classes
    centers = 3.0 * np.column_stack([np.cos(angles), np.sin(angles)])
    labels = np.arange(n) % n_classes
    X = centers[labels] + rng.normal(0.0, spread, size=(n, 2))
    return Dataset(X, labels.astype(np.float64), ["x1", "x2"], TASK_MULTICLASS)


def split(ds: Dataset, val_fraction: float, seed) -> SplitPair:
    """Shuffle rows into disjoint train/validation index sets.

    ``seed`` is an integer or a ``numpy.random.Generator``; passing the
    returned ``seed_state`` back in advances the stream for a fresh split.
    Validation size is ``max(1, round(val_fraction * N))``, capped so the
    training side keeps at least one row.
    """
    if ds.n_rows < 2:
        raise ValueError("cannot split a dataset with fewer than 2 rows")
    if not 0.0 < val_fraction < 1.0:
        raise ValueError("val_fraction must be strictly between 0 and 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = ds.n_rows
    n_val = int(math.floor(val_fraction * n + 0.5))
    n_val = min(max(1, n_val), n - 1)
    order = rng.permutation(n)
    return SplitPair(
        train_indices=order[n_val:],
        val_indices=order[:n_val],
        seed_state=rng,
    )


def r2_score(y_true, y_pred) -> float:
    """Coefficient of determination, 1 - SS_res / SS_tot (may be negative)."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred must have the same length")
    if y_true.size < 2:
        raise ValueError("need at least 2 observations")
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("y_true is constant; R^2 is undefined")
    ss_res = float(np.sum((y_true - y_pred) ** 2))
    return 1.0 - ss_res / ss_tot


def _binary_f1(y_true: np.ndarray, y_pred: np.ndarray, positive: float) -> float:
    tp = float(np.sum((y_pred == positive) & (y_true == positive)))
    fp = float(np.sum((y_pred == positive) & (y_true != positive)))
    fn = float(np.sum((y_pred != positive) & (y_true == positive)))
    if tp == 0.0 and fp == 0.0 and fn == 0.0:
        warnings.warn(
            f"class {positive}: no positive predictions and no positive truths; F1 set to 0",
            RuntimeWarning,
            stacklevel=3,
        )
        return 0.0
    if tp == 0.0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2.0 * precision * recall / (precision + recall)


def f1_score(y_true, y_pred, averaging: str = "binary") -> float:
    """F1 score; ``binary`` scores class 1, ``macro`` averages per-class F1."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred must have the same length")
    if averaging == "binary":
        if not np.all(np.isin(y_true, (0.0, 1.0))) or not np.all(
            np.isin(y_pred, (0.0, 1.0))
        ):
            raise ValueError("binary F1 requires labels in {0, 1}")
        return _binary_f1(y_true, y_pred, 1.0)
    if averaging == "macro":
        classes = np.unique(np.concatenate([y_true, y_pred]))
        return float(np.mean([_binary_f1(y_true, y_pred, c) for c in classes]))
    raise ValueError("averaging must be 'binary' or 'macro'")


def paired_t_test(a, b) -> tuple[float, float]:
    """Two-sided paired t-test on score vectors; returns (t, p).

    Raises on zero-variance differences, where the statistic is undefined.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("score vectors must have the same length")
    n = a.size
    if n < 2:
        raise ValueError("need at least 2 paired scores")
    d = a - b
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        raise ValueError("differences have zero variance; t statistic undefined")
    t = float(np.mean(d)) / (sd / math.sqrt(n))
    p = 2.0 * float(_scipy_stats.t.sf(abs(t), df=n - 1))
    return t, p
