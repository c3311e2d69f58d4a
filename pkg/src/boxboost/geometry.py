"""Axis-aligned boxes: membership tests and random generation.

Two region kinds are supported. A *closed* box has finite bounds on every
feature. A *corner* is unbounded on exactly one side per feature, so its
membership test reduces to d one-sided thresholds. Unbounded sides are
stored as genuine +/-inf, which keeps the membership test uniform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KIND_CLOSED = "closed"
KIND_CORNER = "corner"


@dataclass(frozen=True)
class Rectangle:
    """Per-feature closed interval [lower_j, upper_j], possibly unbounded."""

    lower: np.ndarray
    upper: np.ndarray
    kind: str = KIND_CLOSED

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=np.float64)
        upper = np.asarray(self.upper, dtype=np.float64)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if lower.ndim != 1 or lower.shape != upper.shape:
            raise ValueError("lower and upper must be 1-D vectors of equal length")
        if np.any(lower > upper):
            raise ValueError("every lower bound must not exceed its upper bound")
        if self.kind == KIND_CLOSED:
            if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
                raise ValueError("closed rectangles require finite bounds")
        elif self.kind == KIND_CORNER:
            one_sided = np.isneginf(lower) ^ np.isposinf(upper)
            if not np.all(one_sided):
                raise ValueError(
                    "corners must be unbounded on exactly one side per feature"
                )
        else:
            raise ValueError(f"unknown rectangle kind {self.kind!r}")
        lower.flags.writeable = False
        upper.flags.writeable = False

    @property
    def dim(self) -> int:
        return self.lower.shape[0]


def contains(rect: Rectangle, x) -> bool:
    """True iff x lies inside the box on every feature (bounds inclusive)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (rect.dim,):
        raise ValueError(f"point has dimension {x.shape}, box has {rect.dim}")
    return bool(np.all((x >= rect.lower) & (x <= rect.upper)))


def contains_batch(rect: Rectangle, X: np.ndarray) -> np.ndarray:
    """Vectorized membership over the rows of an (n, d) matrix."""
    if X.ndim != 2 or X.shape[1] != rect.dim:
        raise ValueError(f"matrix columns {X.shape} do not match box dimension {rect.dim}")
    return np.all((X >= rect.lower) & (X <= rect.upper), axis=1)


def _features_of(ds) -> np.ndarray:
    return ds if isinstance(ds, np.ndarray) else ds.features


def generate_random_rectangle(ds, rng: np.random.Generator) -> Rectangle:
    """Draw a closed box from the data-driven distribution.

    Per feature: the center is uniform over the observed feature range; the
    width is uniform between the nearest and farthest absolute distance from
    the center to any data point. Deterministic given the generator state.
    """
    X = _features_of(ds)
    if X.shape[0] < 1:
        raise ValueError("need at least one data point")
    mins = X.min(axis=0)
    maxs = X.max(axis=0)
    center = rng.uniform(mins, maxs)
    dist = np.abs(X - center)
    width = rng.uniform(dist.min(axis=0), dist.max(axis=0))
    return Rectangle(center - width / 2.0, center + width / 2.0, KIND_CLOSED)


def generate_random_corner(ds, rng: np.random.Generator) -> Rectangle:
    """Draw a corner: uniform threshold per feature, fair coin for the side."""
    X = _features_of(ds)
    if X.shape[0] < 1:
        raise ValueError("need at least one data point")
    mins = X.min(axis=0)
    maxs = X.max(axis=0)
    center = rng.uniform(mins, maxs)
    keep_upper = rng.integers(0, 2, size=center.shape[0]).astype(bool)
    lower = np.where(keep_upper, center, -np.inf)
    upper = np.where(keep_upper, np.inf, center)
    return Rectangle(lower, upper, KIND_CORNER)


def generate(ds, kind: str, rng: np.random.Generator) -> Rectangle:
    """Dispatch on region kind; see the two generators above."""
    if kind == KIND_CLOSED:
        return generate_random_rectangle(ds, rng)
    if kind == KIND_CORNER:
        return generate_random_corner(ds, rng)
    raise ValueError(f"unknown rectangle kind {kind!r}")


# Average number of actively constrained features per training candidate.
# Constraining every feature makes a candidate's coverage shrink like
# 2^-d, so that past a handful of dimensions virtually no candidate
# contains a training point and the survivors contain exactly one; boxes
# then memorize instead of generalizing. Candidates therefore constrain a
# random subset of features (about this many on average) and keep the
# rest slack, which leaves per-box coverage roughly dimension-free. For
# d <= 2 every feature is active and the batch law coincides with the
# single-box generators above.
ACTIVE_FEATURES_PER_BOX = 2.0


def generate_batch(
    ds,
    kind: str,
    count: int,
    rng: np.random.Generator,
    active_prob: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Bounds of ``count`` random training candidates as (count, d) arrays.

    Per-feature law as in :func:`generate`, except that each feature is
    only *actively* constrained with probability ``active_prob`` (default
    ``ACTIVE_FEATURES_PER_BOX / d``). A slack feature keeps a bound past
    the observed data range, so every training row passes it; a candidate
    with no active feature covers all rows and is discarded by the fitting
    stage. With ``active_prob`` = 1 the stream and distribution match
    ``count`` single-box draws of :func:`generate`.
    """
    X = _features_of(ds)
    if X.shape[0] < 1:
        raise ValueError("need at least one data point")
    d = X.shape[1]
    if active_prob is None:
        active_prob = min(1.0, ACTIVE_FEATURES_PER_BOX / d)
    if not 0.0 < active_prob <= 1.0:
        raise ValueError("active_prob must be in (0, 1]")
    mins = X.min(axis=0)
    maxs = X.max(axis=0)
    slack = (maxs - mins) + 1.0
    centers = rng.uniform(mins, maxs, size=(count, d))
    if active_prob < 1.0:
        active = rng.random(size=centers.shape) < active_prob
    else:
        active = np.ones(centers.shape, dtype=bool)
    if kind == KIND_CORNER:
        keep_upper = rng.integers(0, 2, size=centers.shape).astype(bool)
        thresholds = np.where(
            active, centers, np.where(keep_upper, mins - slack, maxs + slack)
        )
        lower = np.where(keep_upper, thresholds, -np.inf)
        upper = np.where(keep_upper, np.inf, thresholds)
        return lower, upper
    if kind != KIND_CLOSED:
        raise ValueError(f"unknown rectangle kind {kind!r}")
    dist = np.abs(X[None, :, :] - centers[:, None, :])
    widths = rng.uniform(dist.min(axis=1), dist.max(axis=1), size=centers.shape)
    lower = np.where(active, centers - widths / 2.0, mins - slack)
    upper = np.where(active, centers + widths / 2.0, maxs + slack)
    return lower, upper
