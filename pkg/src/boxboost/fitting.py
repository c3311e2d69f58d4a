"""Fitting a single box to per-example gradients and hessians.

One candidate box splits the data into an inside and an outside group; the
optimal constant for each group minimizes the second-order surrogate of the
loss and has the closed form -G/H from the group's gradient/hessian sums.
``make_rectangle`` draws K random candidates, fits each, and keeps the one
with the lowest surrogate cost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import geometry
from .geometry import Rectangle
from .regularization import RegSpec, regularized_values


class NoValidCandidateError(RuntimeError):
    """Every generated candidate left one side of the split empty."""


@dataclass(frozen=True)
class GradHessStats:
    """Gradient/hessian sums split by box membership."""

    g_in: float
    g_out: float
    h_in: float
    h_out: float
    n_in: int
    n_out: int

    @property
    def g_total(self) -> float:
        return self.g_in + self.g_out

    @property
    def h_total(self) -> float:
        return self.h_in + self.h_out

    @property
    def n_total(self) -> int:
        return self.n_in + self.n_out

    def __add__(self, other: "GradHessStats") -> "GradHessStats":
        return GradHessStats(
            self.g_in + other.g_in,
            self.g_out + other.g_out,
            self.h_in + other.h_in,
            self.h_out + other.h_out,
            self.n_in + other.n_in,
            self.n_out + other.n_out,
        )


@dataclass(frozen=True)
class FittedBox:
    """A box with its fitted inside/outside values and surrogate cost."""

    rect: Rectangle
    v_in: float
    v_out: float
    surrogate_cost: float


def _stats_from_mask(inside: np.ndarray, g: np.ndarray, h: np.ndarray) -> GradHessStats:
    g_in = float(g @ inside)
    h_in = float(h @ inside)
    n_in = int(np.count_nonzero(inside))
    return GradHessStats(
        g_in=g_in,
        g_out=float(np.sum(g)) - g_in,
        h_in=h_in,
        h_out=float(np.sum(h)) - h_in,
        n_in=n_in,
        n_out=g.shape[0] - n_in,
    )


def accumulate_stats(rect: Rectangle, ds, g, h) -> GradHessStats:
    """Sum g and h inside and outside the box in a single pass."""
    X = ds if isinstance(ds, np.ndarray) else ds.features
    g = np.asarray(g, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if g.shape != (X.shape[0],) or h.shape != (X.shape[0],):
        raise ValueError("g and h must have one entry per data row")
    inside = geometry.contains_batch(rect, X).astype(np.float64)
    return _stats_from_mask(inside, g, h)


def optimal_values(stats: GradHessStats, reg: RegSpec | None = None) -> tuple[float, float]:
    """Minimizing (v_in, v_out) for the surrogate, optionally penalized.

    Without regularization this is (-G_in/H_in, -G_out/H_out); with a
    :class:`RegSpec` the matching closed form applies.
    """
    if reg is None:
        reg = RegSpec()
    return regularized_values(stats, reg)


def model_agnostic_values(rect: Rectangle, ds, g, h) -> tuple[float, float]:
    """Mean of the pseudo-residuals -g/h per side.

    This is the generic gradient-boosting fit that ignores the box structure;
    it coincides with :func:`optimal_values` exactly when h is constant and
    differs otherwise (the -G/H form weights examples by h).
    """
    X = ds if isinstance(ds, np.ndarray) else ds.features
    g = np.asarray(g, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if np.any(h <= 0):
        raise ValueError("all h must be positive for pseudo-residuals")
    inside = geometry.contains_batch(rect, X)
    if not inside.any() or inside.all():
        raise ValueError("both sides of the box must contain at least one point")
    rho = -g / h
    return float(rho[inside].mean()), float(rho[~inside].mean())


def surrogate_cost(stats: GradHessStats, v_in: float, v_out: float) -> float:
    """Second-order surrogate loss of the box at the given value pair."""
    return (
        stats.g_in * v_in
        + 0.5 * stats.h_in * v_in * v_in
        + stats.g_out * v_out
        + 0.5 * stats.h_out * v_out * v_out
    ) / stats.n_total


class CandidateBatch:
    """Fitted random candidates as flat arrays, pre gate and selection.

    ``costs`` is +inf for discarded candidates (empty side or infeasible
    bound). ``box(i)`` materializes one candidate as a :class:`FittedBox`.
    """

    __slots__ = ("lower", "upper", "v_in", "v_out", "costs", "kind")

    def __init__(self, lower, upper, v_in, v_out, costs, kind):
        self.lower = lower
        self.upper = upper
        self.v_in = v_in
        self.v_out = v_out
        self.costs = costs
        self.kind = kind

    def best_in(self, start: int, stop: int) -> int | None:
        """Index of the cheapest valid candidate in [start, stop), if any."""
        segment = self.costs[start:stop]
        i = int(np.argmin(segment))  # first minimum wins ties
        if not np.isfinite(segment[i]):
            return None
        return start + i

    def box(self, i: int) -> FittedBox:
        return FittedBox(
            Rectangle(self.lower[i], self.upper[i], self.kind),
            float(self.v_in[i]),
            float(self.v_out[i]),
            float(self.costs[i]),
        )


# Scheme codes for the compiled kernel; -1.0 encodes an unset strength.
_SCHEME_CODES = {"none": 0, "l2": 1, "l1": 2, "step-l2": 3}


@njit(cache=True)
def _soft_shift(g: float, threshold: float) -> float:
    if g < -threshold:
        return g + threshold
    if g > threshold:
        return g - threshold
    return 0.0


@njit(cache=True)
def _fit_candidates(X, lower, upper, g, h, scheme, beta, lam1, lam2, eta2):
    """Membership sums, regularized values and surrogate costs per candidate.

    Mirrors the scalar closed forms in ``regularization``; discarded
    candidates (empty side, infeasible bound) get +inf cost.
    """
    count = lower.shape[0]
    n, d = X.shape
    g_sum = 0.0
    h_sum = 0.0
    for i in range(n):
        g_sum += g[i]
        h_sum += h[i]
    v_in_arr = np.zeros(count)
    v_out_arr = np.zeros(count)
    costs = np.full(count, np.inf)
    nf = float(n)
    for c in range(count):
        gi = 0.0
        hi = 0.0
        ni = 0
        for i in range(n):
            ok = True
            for j in range(d):
                v = X[i, j]
                if v < lower[c, j] or v > upper[c, j]:
                    ok = False
                    break
            if ok:
                gi += g[i]
                hi += h[i]
                ni += 1
        if ni == 0 or ni == n:
            continue
        go = g_sum - gi
        ho = h_sum - hi

        if scheme == 0:  # none
            if hi <= 0.0 or ho <= 0.0:
                continue
            vi = -gi / hi
            vo = -go / ho
        elif scheme == 1:  # l2
            strength = lam2
            if strength < 0.0:
                strength = max(
                    (abs(gi) / beta - hi) / nf, (abs(go) / beta - ho) / nf, 0.0
                )
            di = nf * strength + hi
            do = nf * strength + ho
            if di <= 0.0 or do <= 0.0:
                continue
            vi = -gi / di
            vo = -go / do
        elif scheme == 2:  # l1 (optionally plus l2)
            s1 = lam1
            if s1 < 0.0:
                s1 = max((abs(gi) - beta * hi) / nf, (abs(go) - beta * ho) / nf, 0.0)
            s2 = lam2 if lam2 >= 0.0 else 0.0
            di = nf * s2 + hi
            do = nf * s2 + ho
            if di <= 0.0 or do <= 0.0:
                continue
            vi = -_soft_shift(gi, nf * s1) / di
            vo = -_soft_shift(go, nf * s1) / do
        else:  # step-l2
            if hi <= 0.0 or ho <= 0.0:
                continue
            gt = gi + go
            ht = hi + ho
            strength = eta2
            if strength < 0.0:
                if abs(gt) > beta * ht:
                    continue
                coef_a = gt + beta * ht
                coef_b = beta * ht - gt
                t = 0.0
                feasible = True
                for k in range(4):
                    if k == 0:
                        coef, rhs = coef_a, -ho * (gi + beta * hi)
                    elif k == 1:
                        coef, rhs = coef_b, ho * (gi - beta * hi)
                    elif k == 2:
                        coef, rhs = coef_a, -hi * (go + beta * ho)
                    else:
                        coef, rhs = coef_b, hi * (go - beta * ho)
                    if coef > 0.0:
                        bound = rhs / coef
                        if bound > t:
                            t = bound
                    elif rhs > 0.0:
                        feasible = False
                        break
                if not feasible:
                    continue
                strength = t / nf
            vi = -(gi + nf * strength * gt / ho) / (hi + nf * strength * ht / ho)
            vo = -(go + nf * strength * gt / hi) / (ho + nf * strength * ht / hi)

        v_in_arr[c] = vi
        v_out_arr[c] = vo
        costs[c] = (gi * vi + 0.5 * hi * vi * vi + go * vo + 0.5 * ho * vo * vo) / nf
    return v_in_arr, v_out_arr, costs


def _scheme_params(reg: RegSpec) -> tuple[int, float, float, float, float]:
    def opt(value):
        return -1.0 if value is None else float(value)

    return (
        _SCHEME_CODES[reg.scheme],
        float(reg.beta) if reg.beta is not None else -1.0,
        opt(reg.lam1),
        opt(reg.lam2),
        opt(reg.eta2),
    )


def draw_fitted_candidates(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    count: int,
    kind: str,
    reg: RegSpec,
    rng: np.random.Generator,
) -> CandidateBatch:
    """Generate and fit ``count`` random candidates in one compiled pass."""
    lower, upper = geometry.generate_batch(X, kind, count, rng)
    scheme, beta, lam1, lam2, eta2 = _scheme_params(reg)
    v_in, v_out, costs = _fit_candidates(
        np.ascontiguousarray(X),
        lower,
        upper,
        np.ascontiguousarray(g),
        np.ascontiguousarray(h),
        scheme,
        beta,
        lam1,
        lam2,
        eta2,
    )
    return CandidateBatch(lower, upper, v_in, v_out, costs, kind)


def make_rectangle(
    ds,
    g,
    h,
    n_candidates: int,
    kind: str,
    reg: RegSpec,
    rng: np.random.Generator,
) -> FittedBox:
    """Best of ``n_candidates`` random boxes by surrogate cost.

    Candidates whose inside or outside is empty are discarded (their value
    equations are undefined), as are candidates whose regularization bound
    is infeasible. Ties keep the earliest candidate. Raises
    :class:`NoValidCandidateError` when nothing survives, which callers
    treat as one failed attempt.
    """
    if n_candidates < 1:
        raise ValueError("need at least one candidate")
    X = ds if isinstance(ds, np.ndarray) else ds.features
    if X.shape[0] < 2:
        # One row cannot be split into a non-empty inside and outside.
        raise NoValidCandidateError("need at least 2 rows to fit a box")
    g = np.asarray(g, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    batch = draw_fitted_candidates(X, g, h, n_candidates, kind, reg, rng)
    best = batch.best_in(0, n_candidates)
    if best is None:
        raise NoValidCandidateError(
            f"all {n_candidates} candidates were discarded (empty side or "
            f"infeasible bound)"
        )
    return batch.box(best)
