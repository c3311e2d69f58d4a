"""Boosted ensembles of boxes: training loop, prediction, serialization.

Training alternates four steps per iteration: compute per-example
gradients/hessians at the current scores, fit the best of K random box
candidates on the training subset, gate the candidate on a held-out
validation subset, and on acceptance fold its outside value into the
global bias so that stored boxes act only where they contain the point.
The dataset is re-split after every accepted box.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numba import njit

from . import losses
from .data import Dataset, split
from .fitting import draw_fitted_candidates
from .geometry import KIND_CLOSED, KIND_CORNER, Rectangle
from .losses import LossKind
from .regularization import RegSpec

MODEL_FORMAT_VERSION = 1

_PREDICT_CHUNK = 256


class ModelFormatError(ValueError):
    """Raised when a model file cannot be decoded into an ensemble."""


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for the boosting loop; see the CLI for the matching flags."""

    iterations: int = 1000
    candidates: int = 10
    attempts: int = 5
    learning_rate: float = 0.1
    val_fraction: float = 0.2
    rect_kind: str = KIND_CORNER
    loss: LossKind = LossKind.SQUARED_ERROR
    reg: RegSpec = field(default_factory=lambda: RegSpec("l2", beta=1.0))
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.candidates < 1:
            raise ValueError("candidates must be at least 1")
        if self.attempts < 1:
            raise ValueError("attempts must be at least 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in (0, 1)")
        if self.rect_kind not in (KIND_CLOSED, KIND_CORNER):
            raise ValueError("rect_kind must be 'closed' or 'corner'")

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "candidates": self.candidates,
            "attempts": self.attempts,
            "learning_rate": self.learning_rate,
            "val_fraction": self.val_fraction,
            "rect_kind": self.rect_kind,
            "loss": self.loss.value,
            "reg": {
                "scheme": self.reg.scheme,
                "beta": self.reg.beta,
                "lam1": self.reg.lam1,
                "lam2": self.reg.lam2,
                "eta2": self.reg.eta2,
            },
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "TrainConfig":
        reg = payload.get("reg", {})
        return cls(
            iterations=payload["iterations"],
            candidates=payload["candidates"],
            attempts=payload["attempts"],
            learning_rate=payload["learning_rate"],
            val_fraction=payload["val_fraction"],
            rect_kind=payload["rect_kind"],
            loss=LossKind.from_token(payload["loss"]),
            reg=RegSpec(
                scheme=reg.get("scheme", "none"),
                beta=reg.get("beta"),
                lam1=reg.get("lam1"),
                lam2=reg.get("lam2"),
                eta2=reg.get("eta2"),
            ),
            seed=payload["seed"],
        )


@dataclass(frozen=True)
class FoldedBox:
    """A box whose outside value has been absorbed into the ensemble bias."""

    rect: Rectangle
    value: float

    @property
    def v_in(self) -> float:
        return self.value

    @property
    def v_out(self) -> float:
        return 0.0


@dataclass
class Ensemble:
    """Bias plus an ordered list of folded boxes.

    A prediction is the bias plus the values of every box containing the
    point. For cross-entropy models the raw score is a logit.
    """

    bias: float
    boxes: list[FoldedBox]
    loss: LossKind
    n_features: int
    feature_names: list[str]
    train_meta: dict | None = None

    @cached_property
    def _bounds(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Stacked (B, d) lower/upper bounds and (B,) values."""
        if not self.boxes:
            d = self.n_features
            return (np.empty((0, d)), np.empty((0, d)), np.empty(0))
        lower = np.stack([b.rect.lower for b in self.boxes])
        upper = np.stack([b.rect.upper for b in self.boxes])
        values = np.array([b.value for b in self.boxes])
        return lower, upper, values

    def predict(self, x) -> float | np.ndarray:
        """Raw score for a single vector (float) or a matrix (array)."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            if x.shape[0] != self.n_features:
                raise ValueError(
                    f"point has {x.shape[0]} features, model expects {self.n_features}"
                )
            lower, upper, values = self._bounds
            inside = np.all((x >= lower) & (x <= upper), axis=1)
            return float(self.bias + values @ inside)
        if x.ndim != 2 or x.shape[1] != self.n_features:
            raise ValueError(f"matrix shape {x.shape} does not match d={self.n_features}")
        lower, upper, values = self._bounds
        scores = np.full(x.shape[0], self.bias)
        for start in range(0, len(self.boxes), _PREDICT_CHUNK):
            sl = slice(start, start + _PREDICT_CHUNK)
            inside = np.all(
                (x[:, None, :] >= lower[sl]) & (x[:, None, :] <= upper[sl]), axis=2
            )
            scores += inside @ values[sl]
        return scores

    def predict_proba(self, x) -> float | np.ndarray:
        """Probability of class 1; only defined for cross-entropy models."""
        if self.loss is not LossKind.BINARY_CROSS_ENTROPY:
            raise ValueError("predict_proba requires a model trained with bce loss")
        raw = self.predict(x)
        out = losses.sigmoid(raw)
        return float(out) if np.ndim(raw) == 0 else out

    def save(self, path) -> None:
        save_model(self, path)


def _validate_targets(ds: Dataset, kind: LossKind) -> None:
    if kind is LossKind.BINARY_CROSS_ENTROPY and not np.all(
        np.isin(ds.targets, (0.0, 1.0))
    ):
        raise ValueError("bce loss requires 0/1 targets")


@njit(cache=True)
def _gate_losses(X_va, y_va, s_va, lower, upper, step_in, step_out, squared):
    """Mean validation loss before and after applying one candidate.

    Both sums run in the same order so the acceptance comparison is not
    at the mercy of summation differences.
    """
    n, d = X_va.shape
    before = 0.0
    after = 0.0
    for i in range(n):
        inside = True
        for j in range(d):
            v = X_va[i, j]
            if v < lower[j] or v > upper[j]:
                inside = False
                break
        step = step_in if inside else step_out
        z0 = s_va[i]
        z1 = z0 + step
        if squared:
            e0 = y_va[i] - z0
            e1 = y_va[i] - z1
            before += 0.5 * e0 * e0
            after += 0.5 * e1 * e1
        else:
            before += np.logaddexp(0.0, z0) - y_va[i] * z0
            after += np.logaddexp(0.0, z1) - y_va[i] * z1
    return before / n, after / n


@njit(cache=True)
def _apply_step(X, scores, lower, upper, step_in, step_out):
    """Add the accepted box's scaled step to every score; returns #inside."""
    n, d = X.shape
    count = 0
    for i in range(n):
        inside = True
        for j in range(d):
            v = X[i, j]
            if v < lower[j] or v > upper[j]:
                inside = False
                break
        if inside:
            scores[i] += step_in
            count += 1
        else:
            scores[i] += step_out
    return count


def train(ds: Dataset, cfg: TrainConfig) -> Ensemble:
    """Run the boosting loop; deterministic for a fixed (dataset, config)."""
    if ds.n_rows < 2:
        raise ValueError("training needs at least 2 rows")
    _validate_targets(ds, cfg.loss)

    X, y = ds.features, ds.targets
    gamma = cfg.learning_rate
    rng = np.random.default_rng(cfg.seed)

    bias = losses.init_bias(cfg.loss, ds)
    initial_bias = bias
    scores = np.full(ds.n_rows, bias)
    pair = split(ds, cfg.val_fraction, rng)

    boxes: list[FoldedBox] = []
    history: list[dict] = []
    squared = cfg.loss is LossKind.SQUARED_ERROR
    for iteration in range(cfg.iterations):
        tr, va = pair.train_indices, pair.val_indices
        X_va, y_va, s_va = X[va], y[va], scores[va]
        g, h = losses._derivatives_raw(cfg.loss, y[tr], scores[tr])
        record = {"iteration": iteration, "accepted": False, "attempts": 0}
        X_tr = X[tr] if tr.size >= 2 else None
        batch = None
        for attempt in range(cfg.attempts):
            record["attempts"] = attempt + 1
            if X_tr is None:
                continue
            if attempt == 0:
                # Attempts reuse the same g/h, so later attempts' candidates
                # could be drawn up front; drawing the first attempt alone,
                # then the rest lazily, skips the batch work entirely for
                # the common first-attempt acceptance.
                batch = draw_fitted_candidates(
                    X_tr, g, h, cfg.candidates, cfg.rect_kind, cfg.reg, rng
                )
                start = 0
            elif attempt == 1:
                batch = draw_fitted_candidates(
                    X_tr,
                    g,
                    h,
                    cfg.candidates * (cfg.attempts - 1),
                    cfg.rect_kind,
                    cfg.reg,
                    rng,
                )
                start = 0
            else:
                start = (attempt - 1) * cfg.candidates
            best = batch.best_in(start, start + cfg.candidates)
            if best is None:
                continue
            lo, hi = batch.lower[best], batch.upper[best]
            v_in, v_out = float(batch.v_in[best]), float(batch.v_out[best])
            step_in = gamma * (v_in - v_out) + gamma * v_out
            step_out = gamma * v_out
            val_before, val_after = _gate_losses(
                X_va, y_va, s_va, lo, hi, step_in, step_out, squared
            )
            if val_after <= val_before:
                box = batch.box(best)
                n_inside = _apply_step(X, scores, lo, hi, step_in, step_out)
                bias += step_out
                boxes.append(FoldedBox(box.rect, gamma * (v_in - v_out)))
                pair = split(ds, cfg.val_fraction, pair.seed_state)
                record.update(
                    accepted=True,
                    val_loss_before=val_before,
                    val_loss_after=val_after,
                    value=boxes[-1].value,
                    v_in=v_in,
                    v_out=v_out,
                    n_inside=n_inside,
                )
                break
        history.append(record)

    if not boxes:
        warnings.warn(
            "no box passed validation; the model is the constant bias",
            RuntimeWarning,
            stacklevel=2,
        )
    meta = {
        "config": cfg.to_dict(),
        "initial_bias": initial_bias,
        "history": history,
        "final_scores": scores,
    }
    return Ensemble(
        bias=bias,
        boxes=boxes,
        loss=cfg.loss,
        n_features=ds.n_features,
        feature_names=list(ds.feature_names),
        train_meta=meta,
    )


def train_one_vs_rest(ds: Dataset, cfg: TrainConfig) -> list[Ensemble]:
    """One cross-entropy model per class; predicted class is the raw argmax.

    Classes must be the integers 0..C-1 and every class must appear.
    """
    labels = ds.targets.astype(int)
    n_classes = int(labels.max()) + 1
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    present = np.unique(labels)
    missing = sorted(set(range(n_classes)) - set(present.tolist()))
    if missing:
        raise ValueError(f"classes absent from training data: {missing}")
    models = []
    for c in range(n_classes):
        binary = Dataset(
            ds.features,
            (labels == c).astype(np.float64),
            list(ds.feature_names),
            task="binary-classification",
        )
        cfg_c = TrainConfig(
            iterations=cfg.iterations,
            candidates=cfg.candidates,
            attempts=cfg.attempts,
            learning_rate=cfg.learning_rate,
            val_fraction=cfg.val_fraction,
            rect_kind=cfg.rect_kind,
            loss=LossKind.BINARY_CROSS_ENTROPY,
            reg=cfg.reg,
            seed=cfg.seed + c,
        )
        models.append(train(binary, cfg_c))
    return models


def predict_one_vs_rest(models: list[Ensemble], x) -> int | np.ndarray:
    """Class with the largest raw score."""
    x = np.asarray(x, dtype=np.float64)
    scores = np.stack([np.atleast_1d(m.predict(x)) for m in models])
    winners = np.argmax(scores, axis=0)
    return int(winners[0]) if x.ndim == 1 else winners


def _bound_to_json(value: float) -> float | None:
    return None if np.isinf(value) else float(value)


def _bound_from_json(value, line: str) -> float:
    if value is None:
        return np.nan  # placeholder, sign fixed by caller
    if not isinstance(value, (int, float)):
        raise ModelFormatError(f"non-numeric bound in {line}")
    return float(value)


def save_model(model: Ensemble, path) -> None:
    """Write the ensemble as JSON; unbounded sides are encoded as null."""
    payload = {
        "version": MODEL_FORMAT_VERSION,
        "loss": model.loss.value,
        "bias": model.bias,
        "d": model.n_features,
        "feature_names": list(model.feature_names),
        "boxes": [
            {
                "lower": [_bound_to_json(v) for v in box.rect.lower],
                "upper": [_bound_to_json(v) for v in box.rect.upper],
                "value": box.value,
            }
            for box in model.boxes
        ],
    }
    if model.train_meta is not None:
        payload["train_meta"] = {"config": model.train_meta["config"]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_model(path) -> Ensemble:
    """Read a model file written by :func:`save_model`."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: not valid JSON ({exc})") from None
    if payload.get("version") != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported model version {payload.get('version')!r}"
        )
    try:
        loss = LossKind.from_token(payload["loss"])
        d = int(payload["d"])
        names = list(payload["feature_names"])
        raw_boxes = payload["boxes"]
        bias = float(payload["bias"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed model file ({exc})") from None
    if len(names) != d:
        raise ModelFormatError(f"{path}: {len(names)} feature names but d={d}")

    boxes = []
    for i, entry in enumerate(raw_boxes):
        where = f"box {i}"
        lower = [_bound_from_json(v, where) for v in entry["lower"]]
        upper = [_bound_from_json(v, where) for v in entry["upper"]]
        if len(lower) != d or len(upper) != d:
            raise ModelFormatError(
                f"{path}: {where} has dimension {len(lower)}x{len(upper)}, expected {d}"
            )
        lower = np.array(
            [-np.inf if np.isnan(v) else v for v in lower], dtype=np.float64
        )
        upper = np.array(
            [np.inf if np.isnan(v) else v for v in upper], dtype=np.float64
        )
        finite = np.isfinite(lower) & np.isfinite(upper)
        if finite.all():
            kind = KIND_CLOSED
        elif np.all(np.isneginf(lower) ^ np.isposinf(upper)):
            kind = KIND_CORNER
        else:
            raise ModelFormatError(
                f"{path}: {where} mixes bounded and unbounded sides inconsistently"
            )
        value = entry["value"]
        if not isinstance(value, (int, float)) or not np.isfinite(value):
            raise ModelFormatError(f"{path}: {where} has a non-finite value")
        try:
            boxes.append(FoldedBox(Rectangle(lower, upper, kind), float(value)))
        except ValueError as exc:
            raise ModelFormatError(f"{path}: {where}: {exc}") from None

    meta = payload.get("train_meta")
    return Ensemble(
        bias=bias,
        boxes=boxes,
        loss=loss,
        n_features=d,
        feature_names=names,
        train_meta=meta,
    )
