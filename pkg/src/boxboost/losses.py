"""Twice-differentiable losses and their per-example derivative pairs.

Squared error carries a 1/2 factor so that g = z - y and h = 1 exactly;
the optimal constants -G/H are unchanged by the factor. Binary cross
entropy is the negative log-likelihood of a sigmoid over the raw score,
with a small floor on the second derivative to keep divisions stable at
saturated scores.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit as sigmoid  # noqa: F401  (re-exported)

HESSIAN_FLOOR = 1e-12
_PROB_CLAMP = 1e-6


class LossKind(enum.Enum):
    """Supported losses, serialized as the short tokens "l2" / "bce"."""

    SQUARED_ERROR = "l2"
    BINARY_CROSS_ENTROPY = "bce"

    @classmethod
    def from_token(cls, token: str) -> "LossKind":
        for kind in cls:
            if kind.value == token:
                return kind
        raise ValueError(f"unknown loss token {token!r}")


@dataclass(frozen=True)
class DerivPair:
    """First and second derivative of the loss at the current raw score."""

    g: np.ndarray | float
    h: np.ndarray | float


def _check_finite(y, z):
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(z))):
        raise ValueError("loss inputs must be finite")


def _loss_value_raw(kind: LossKind, y: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Loss without input validation; training-loop hot path."""
    if kind is LossKind.SQUARED_ERROR:
        diff = y - z
        return 0.5 * diff * diff
    # -[y log sigma(z) + (1-y) log(1 - sigma(z))] = softplus(z) - y*z
    return np.logaddexp(0.0, z) - y * z


def _derivatives_raw(kind: LossKind, y: np.ndarray, z: np.ndarray):
    """(g, h) arrays without validation or wrapping; hot path."""
    if kind is LossKind.SQUARED_ERROR:
        return z - y, np.ones_like(z)
    p = sigmoid(z)
    return p - y, np.maximum(p * (1.0 - p), HESSIAN_FLOOR)


def loss_value(kind: LossKind, y, z):
    """Pointwise loss at target ``y`` and raw score ``z`` (both may be arrays)."""
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    _check_finite(y, z)
    out = _loss_value_raw(kind, y, z)
    return out if out.ndim else float(out)


def derivatives(kind: LossKind, y, z) -> DerivPair:
    """Derivative pair (g, h) of :func:`loss_value` with respect to ``z``."""
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    _check_finite(y, z)
    g, h = _derivatives_raw(kind, y, z)
    if g.ndim:
        return DerivPair(g, h)
    return DerivPair(float(g), float(h))


def init_bias(kind: LossKind, ds) -> float:
    """Optimal constant prediction for a whole dataset.

    Squared error: the target mean. Cross entropy: the log-odds of the
    positive rate, clamped away from 0/1 when a class is missing.
    """
    y = ds.targets
    if kind is LossKind.SQUARED_ERROR:
        return float(np.mean(y))
    rate = float(np.mean(y))
    if rate <= 0.0 or rate >= 1.0:
        warnings.warn(
            f"positive rate {rate} leaves the open interval (0, 1); "
            f"clamping before taking log-odds",
            RuntimeWarning,
            stacklevel=2,
        )
        rate = min(max(rate, _PROB_CLAMP), 1.0 - _PROB_CLAMP)
    return float(np.log(rate / (1.0 - rate)))
