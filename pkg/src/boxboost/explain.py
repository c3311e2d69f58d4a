"""Exact Shapley attributions for box models.

Three routes to the same game-theoretic quantity:

* ``shap_brute_force`` enumerates every feature coalition and works for any
  coalition value function; it is the oracle the fast paths are tested
  against.
* ``shap_model_based`` uses only the box structure: a feature that places
  the point inside its interval contributes nothing, and the remaining
  features share the inside/outside jump equally. O(d) per box.
* ``shap_data_based`` evaluates the conditional-expectation game estimated
  from a training sample under feature-block independence. Enumeration is
  needed only over the features whose intervals contain the point, so
  corners stay cheap for typical points.

Ensemble attributions are sums of per-box attributions (Shapley values are
linear in the game); the global bias is a constant game and lands in the
base value. The two explainer classes amortize per-model precomputation so
that explaining many points costs little more than explaining one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

BRUTE_FORCE_MAX_DIM = 20
DATA_INSIDE_MAX = 20
_TABLE_MAX_DIM = 12


@dataclass
class Attribution:
    """Per-feature Shapley values and the no-feature base value."""

    phi: np.ndarray
    base_value: float
    method: str

    @property
    def total(self) -> float:
        """Base value plus all contributions; equals the full-coalition value."""
        return self.base_value + float(np.sum(self.phi))


@lru_cache(maxsize=32)
def _popcounts(n_bits: int) -> np.ndarray:
    masks = np.arange(1 << n_bits, dtype=np.int64)
    counts = np.zeros(masks.shape[0], dtype=np.int64)
    for b in range(n_bits):
        counts += (masks >> b) & 1
    counts.flags.writeable = False
    return counts

@lru_cache(maxsize=32)
def _coalition_weights(d: int) -> np.ndarray:
    """w[s] = s! (d-s-1)! / d! = 1 / (d * C(d-1, s)) for s = 0..d-1."""
    w = np.array([1.0 / (d * math.comb(d - 1, s)) for s in range(d)])
    w.flags.writeable = False
    return w


def _phi_from_table(table: np.ndarray, d: int) -> tuple[np.ndarray, float]:
    """Exact Shapley values of a game given its full 2^d value table."""
    weights = _coalition_weights(d)
    pop = _popcounts(d)
    masks = np.arange(1 << d, dtype=np.int64)
    phi = np.empty(d)
    for i in range(d):
        bit = 1 << i
        without = masks[(masks & bit) == 0]
        diffs = table[without | bit] - table[without]
        phi[i] = float(weights[pop[without]] @ diffs)
    return phi, float(table[0])


def _inside_per_feature(box, x: np.ndarray) -> np.ndarray:
    rect = box.rect
    return (x >= rect.lower) & (x <= rect.upper)


def coalition_value_model(box, x, S) -> float:
    """Structural coalition value: v_in if x fits the box on all of S.

    The empty coalition counts as fitting, so its value is v_in.
    """
    x = np.asarray(x, dtype=np.float64)
    inside = _inside_per_feature(box, x)
    if all(inside[j] for j in S):
        return box.v_in
    return box.v_out


def data_coalition_value(box, x, S, ds) -> float:
    """Expected box output given the coalition's features pinned to x.

    Estimated from the sample under independence of the pinned and free
    feature blocks: the free block's chance of landing inside the box is
    the fraction of training points inside it on those features.
    """
    X = ds if isinstance(ds, np.ndarray) else ds.features
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[0]
    inside_x = _inside_per_feature(box, x)
    if not all(inside_x[j] for j in S):
        return box.v_out
    rest = np.setdiff1d(np.arange(d), np.fromiter(S, dtype=np.int64, count=len(S)))
    if rest.size == 0:
        coverage = 1.0
    else:
        rect = box.rect
        inside_rest = (X[:, rest] >= rect.lower[rest]) & (X[:, rest] <= rect.upper[rest])
        coverage = float(np.mean(np.all(inside_rest, axis=1)))
    return box.v_out + (box.v_in - box.v_out) * coverage


def shap_brute_force(valuefn, d: int, method: str = "brute_force_model") -> Attribution:
    """Exact Shapley values by full coalition enumeration (2^d calls).

    ``valuefn`` maps a tuple of feature indices to the coalition's value.
    """
    if d > BRUTE_FORCE_MAX_DIM:
        raise ValueError(
            f"brute force enumerates 2^{d} coalitions; limit is d <= {BRUTE_FORCE_MAX_DIM}"
        )
    n_masks = 1 << d
    table = np.empty(n_masks)
    for mask in range(n_masks):
        members = tuple(j for j in range(d) if mask >> j & 1)
        table[mask] = valuefn(members)
    phi, base = _phi_from_table(table, d)
    return Attribution(phi=phi, base_value=base, method=method)


def shap_model_based(box, x) -> Attribution:
    """Structure-only attribution, no data needed.

    Features whose interval contains the point get zero; the others split
    (v_out - v_in) equally. Matches brute force on the structural game
    exactly.
    """
    x = np.asarray(x, dtype=np.float64)
    inside = _inside_per_feature(box, x)
    phi = np.zeros(x.shape[0])
    outside = ~inside
    u = int(np.count_nonzero(outside))
    if u > 0:
        phi[outside] = (box.v_out - box.v_in) / u
    return Attribution(phi=phi, base_value=box.v_in, method="model_based")


def shap_data_based(box, x, ds) -> Attribution:
    """Exact attribution for the expectation game of a single box.

    Enumerates coalitions only within the inside-feature set of x (all
    other coalition differences vanish); every outside feature receives the
    common remainder dictated by efficiency and symmetry.
    """
    X = ds if isinstance(ds, np.ndarray) else ds.features
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[0]
    if X.ndim != 2 or X.shape[1] != d:
        raise ValueError("dataset dimension does not match the explained point")
    rect = box.rect
    delta = box.v_in - box.v_out
    n = X.shape[0]

    inside_x = _inside_per_feature(box, x)
    in_idx = np.flatnonzero(inside_x)
    out_idx = np.flatnonzero(~inside_x)
    m, u = in_idx.size, out_idx.size
    if m > DATA_INSIDE_MAX:
        raise ValueError(
            f"point is inside on {m} features; the data-based method enumerates "
            f"2^{m} coalitions (limit {DATA_INSIDE_MAX}). Use the model-based method."
        )

    inside_pts = (X >= rect.lower) & (X <= rect.upper)
    coverage = float(np.mean(np.all(inside_pts, axis=1)))
    base = box.v_out + delta * coverage
    full = box.v_out + delta * (1.0 if u == 0 else 0.0)

    phi = np.zeros(d)
    weights = _coalition_weights(d)
    if m > 0:
        # Points bucketed by their membership pattern on the inside features;
        # superset sums over those patterns give every coalition's count at
        # once instead of one pass per coalition.
        pts_in = inside_pts[:, in_idx]
        bits = (1 << np.arange(m, dtype=np.int64))
        pt_masks = pts_in @ bits
        out_base = (
            np.all(inside_pts[:, out_idx], axis=1).astype(np.float64)
            if u > 0
            else np.ones(n)
        )
        masks = np.arange(1 << m, dtype=np.int64)
        pop = _popcounts(m)
        for i in range(m):
            bit = 1 << i
            w_pts = out_base * (1.0 - pts_in[:, i])
            counts = np.bincount(pt_masks, weights=w_pts, minlength=1 << m)
            for b in range(m):
                if b == i:
                    continue
                other = 1 << b
                low = masks[(masks & other) == 0]
                counts[low] += counts[low | other]
            # T below is the complement of the coalition S within the other
            # inside features, so |S| = (m - 1) - |T|.
            t_masks = masks[(masks & bit) == 0]
            s_sizes = (m - 1) - pop[t_masks]
            phi[in_idx[i]] = delta / n * float(weights[s_sizes] @ counts[t_masks])

    if u > 0:
        phi[out_idx] = (full - base - float(np.sum(phi[in_idx]))) / u
    return Attribution(phi=phi, base_value=base, method="data_based")


def ensemble_coalition_value(model, x, S) -> float:
    """Structural game of a whole ensemble: bias plus per-box values."""
    return model.bias + sum(coalition_value_model(box, x, S) for box in model.boxes)


def ensemble_data_coalition_value(model, x, S, ds) -> float:
    """Expectation game of a whole ensemble, estimated from the sample."""
    return model.bias + sum(
        data_coalition_value(box, x, S, ds) for box in model.boxes
    )


class ModelShapExplainer:
    """Amortized structure-only attributions for a folded ensemble."""

    def __init__(self, model):
        self.bias = model.bias
        self.d = model.n_features
        if model.boxes:
            self.lower = np.stack([b.rect.lower for b in model.boxes])
            self.upper = np.stack([b.rect.upper for b in model.boxes])
            self.values = np.array([b.value for b in model.boxes])
        else:
            self.lower = np.empty((0, self.d))
            self.upper = np.empty((0, self.d))
            self.values = np.empty(0)
        self.base_value = self.bias + float(np.sum(self.values))

    def explain(self, x) -> Attribution:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d,):
            raise ValueError(f"point shape {x.shape} does not match d={self.d}")
        outside = (x < self.lower) | (x > self.upper)
        u = outside.sum(axis=1)
        active = u > 0
        share = np.zeros(self.values.shape[0])
        share[active] = -self.values[active] / u[active]
        phi = share @ outside
        return Attribution(phi=phi, base_value=self.base_value, method="model_based")


class DataShapExplainer:
    """Amortized expectation-game attributions for a folded ensemble.

    Setup builds, per box, the superset-sum table of training-point
    membership patterns; each explained point then costs a handful of
    vectorized passes over those tables. Falls back to the per-box
    routine when 2^d tables would be too large.
    """

    def __init__(self, model, ds):
        X = ds if isinstance(ds, np.ndarray) else ds.features
        if X.shape[1] != model.n_features:
            raise ValueError("dataset dimension does not match the model")
        self.bias = model.bias
        self.d = model.n_features
        self.boxes = model.boxes
        self._X = X
        self._tables = None
        if not model.boxes or self.d > _TABLE_MAX_DIM:
            return

        d, n = self.d, X.shape[0]
        lower = np.stack([b.rect.lower for b in model.boxes])
        upper = np.stack([b.rect.upper for b in model.boxes])
        self.lower, self.upper = lower, upper
        self.values = np.array([b.value for b in model.boxes])
        n_boxes = len(model.boxes)
        n_masks = 1 << d

        # (B, N) membership-pattern ints, then per-box pattern counts.
        bits = (1 << np.arange(d, dtype=np.int64))
        pt_masks = np.empty((n_boxes, n), dtype=np.int64)
        for start in range(0, n_boxes, 64):
            sl = slice(start, start + 64)
            inside = (X[None, :, :] >= lower[sl, None, :]) & (
                X[None, :, :] <= upper[sl, None, :]
            )
            pt_masks[sl] = inside @ bits
        offsets = (np.arange(n_boxes, dtype=np.int64) * n_masks)[:, None]
        flat = np.bincount(
            (pt_masks + offsets).ravel(), minlength=n_boxes * n_masks
        )
        tables = flat.reshape(n_boxes, n_masks).astype(np.float64)

        # Superset sums: tables[b, T] = #points whose pattern contains T.
        masks = np.arange(n_masks, dtype=np.int64)
        for b in range(d):
            bit = 1 << b
            low = masks[(masks & bit) == 0]
            tables[:, low] += tables[:, low | bit]
        self._tables = tables / n
        self._comp = (n_masks - 1) ^ masks
        self._masks = masks

    def explain(self, x) -> Attribution:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d,):
            raise ValueError(f"point shape {x.shape} does not match d={self.d}")
        if self._tables is None:
            return self._explain_per_box(x)
        inside_x = (x >= self.lower) & (x <= self.upper)
        in_masks = inside_x @ (1 << np.arange(self.d, dtype=np.int64))
        full = (1 << self.d) - 1
        # Game table of the whole ensemble: coalitions allowed by each box
        # contribute value * coverage-of-the-complement.
        allowed = (self._masks[None, :] & (in_masks[:, None] ^ full)) == 0
        per_box = allowed * self._tables[:, self._comp]
        table = self.values @ per_box
        phi, base = _phi_from_table(table, self.d)
        return Attribution(
            phi=phi, base_value=self.bias + base, method="data_based"
        )

    def _explain_per_box(self, x) -> Attribution:
        phi = np.zeros(self.d)
        base = self.bias
        for box in self.boxes:
            attr = shap_data_based(box, x, self._X)
            phi += attr.phi
            base += attr.base_value
        return Attribution(phi=phi, base_value=base, method="data_based")


def explain_ensemble(model, x, method: str, ds=None) -> Attribution:
    """Attribution of a whole ensemble at one point.

    ``method`` is "model_based" or "data_based"; the latter needs the
    training dataset. Repeated explanations of the same model are cheaper
    through :class:`ModelShapExplainer` / :class:`DataShapExplainer`.
    """
    if method == "model_based":
        return ModelShapExplainer(model).explain(x)
    if method == "data_based":
        if ds is None:
            raise ValueError("data_based explanations require the training dataset")
        return DataShapExplainer(model, ds).explain(x)
    raise ValueError(f"unknown method {method!r}")
