"""Closed-form regularized box values and per-iteration penalty strengths.

The quadratic surrogate over one candidate box is

    L(v_in, v_out) = (1/N) * (G_in v_in + H_in v_in^2 / 2
                              + G_out v_out + H_out v_out^2 / 2)

and three penalty schemes are supported on top of it:

* ``l2``      adds (lam2 / 2) (v_in^2 + v_out^2),
* ``l1``      adds lam1 (|v_in| + |v_out|) (optionally plus the l2 term),
* ``step-l2`` adds (eta2 / 2) (v_in - v_out)^2, shrinking the jump between
  the inside and outside values rather than the values themselves.

Each scheme has an exact minimizer, and each penalty strength has a closed
form in terms of a single bound ``beta`` on the box's absolute output. The
bound is the knob a user tunes; the per-iteration strengths are derived
from it and from the current gradient statistics. ``bisect_eta2`` is an
independent numeric cross-check for the step-penalty derivation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SCHEMES = ("none", "l2", "l1", "step-l2")

ETA2_SEARCH_CAP = 1e12


class InfeasibleBoundError(ValueError):
    """The requested output bound cannot be met by the step-height penalty."""


@dataclass(frozen=True)
class RegSpec:
    """Penalty scheme selection.

    ``beta`` drives the per-iteration strengths; explicit ``lam1`` /
    ``lam2`` / ``eta2`` values bypass it (useful for ablations).
    """

    scheme: str = "none"
    beta: float | None = None
    lam1: float | None = None
    lam2: float | None = None
    eta2: float | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        for name in ("lam1", "lam2", "eta2"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.scheme != "none" and not self._has_fixed_params():
            if self.beta is None or self.beta <= 0:
                raise ValueError(
                    f"scheme {self.scheme!r} needs beta > 0 or explicit strengths"
                )

    def _has_fixed_params(self) -> bool:
        if self.scheme == "l2":
            return self.lam2 is not None
        if self.scheme == "l1":
            return self.lam1 is not None
        if self.scheme == "step-l2":
            return self.eta2 is not None
        return True


def _soft_value(g: float, h: float, n: int, lam1: float, lam2: float) -> float:
    """Minimizer of (1/N)(g v + h v^2/2) + lam1 |v| + lam2 v^2 / 2."""
    denom = n * lam2 + h
    if denom <= 0:
        raise ZeroDivisionError("regularized denominator must be positive")
    if lam1 == 0.0:
        return -g / denom
    if g < -n * lam1:
        return -(g + n * lam1) / denom
    if g > n * lam1:
        return -(g - n * lam1) / denom
    return 0.0


def values_standard(stats, lam1: float, lam2: float) -> tuple[float, float]:
    """Optimal (v_in, v_out) under the separable l1/l2 penalty."""
    if lam1 < 0 or lam2 < 0:
        raise ValueError("penalty strengths must be non-negative")
    n = stats.n_total
    v_in = _soft_value(stats.g_in, stats.h_in, n, lam1, lam2)
    v_out = _soft_value(stats.g_out, stats.h_out, n, lam1, lam2)
    return v_in, v_out


def values_step_height(stats, eta2: float) -> tuple[float, float]:
    """Optimal (v_in, v_out) under the squared step-height penalty.

    With eta2 = 0 this reduces to the unregularized pair (-G_in/H_in,
    -G_out/H_out); as eta2 grows both values are pulled together toward
    -G/H, the optimum of a single shared constant.
    """
    if eta2 < 0:
        raise ValueError("eta2 must be non-negative")
    h_in, h_out = stats.h_in, stats.h_out
    if h_in <= 0 or h_out <= 0:
        raise ZeroDivisionError("step-height values need positive H_in and H_out")
    n = stats.n_total
    g, h = stats.g_total, stats.h_total
    v_in = -(stats.g_in + n * eta2 * g / h_out) / (h_in + n * eta2 * h / h_out)
    v_out = -(stats.g_out + n * eta2 * g / h_in) / (h_out + n * eta2 * h / h_in)
    return v_in, v_out


def lambda2_from_beta(stats, beta: float) -> float:
    """Smallest lam2 >= 0 keeping both values within [-beta, beta].

    Whenever a side's unregularized value exceeds the bound, that side lands
    exactly on it: |v| = |G| / (N lam2 + H) = beta at the returned strength.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    n = stats.n_total
    l_in = (abs(stats.g_in) / beta - stats.h_in) / n
    l_out = (abs(stats.g_out) / beta - stats.h_out) / n
    return max(l_in, l_out, 0.0)


def lambda1_from_beta(stats, beta: float) -> float:
    """Smallest lam1 >= 0 keeping both soft-thresholded values within the bound.

    The requirement per side is |v| = (|G| - N lam1) / H <= beta once the
    threshold is active, i.e. lam1 >= (|G| - beta H) / N; sides already
    within the bound contribute nothing.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    n = stats.n_total
    l_in = (abs(stats.g_in) - beta * stats.h_in) / n
    l_out = (abs(stats.g_out) - beta * stats.h_out) / n
    return max(l_in, l_out, 0.0)


def _check_step_feasible(stats, beta: float):
    if beta <= 0:
        raise ValueError("beta must be positive")
    if stats.h_in <= 0 or stats.h_out <= 0:
        raise ZeroDivisionError("step-height bound needs positive H_in and H_out")
    if abs(stats.g_total) > beta * stats.h_total:
        raise InfeasibleBoundError(
            f"|G|/H = {abs(stats.g_total) / stats.h_total:.6g} exceeds beta = "
            f"{beta:.6g}; even the eta2 -> inf limit -G/H violates the bound. "
            f"Increase beta."
        )


def eta2_from_beta(stats, beta: float) -> float:
    """Smallest eta2 >= 0 with both step-penalized values within [-beta, beta].

    Both values are ratios that are linear in t = N eta2, so each of the four
    one-sided bound conditions is a linear inequality in t. Under the
    feasibility gate |G| <= beta H both coefficients (G + beta H) and
    (beta H - G) are non-negative, every condition is a lower bound on t,
    and the answer is their maximum clipped at zero.
    """
    _check_step_feasible(stats, beta)
    g, h = stats.g_total, stats.h_total
    constraints = (
        # |v_in| <= beta, the two sides of the absolute value
        (g + beta * h, -stats.h_out * (stats.g_in + beta * stats.h_in)),
        (beta * h - g, stats.h_out * (stats.g_in - beta * stats.h_in)),
        # |v_out| <= beta
        (g + beta * h, -stats.h_in * (stats.g_out + beta * stats.h_out)),
        (beta * h - g, stats.h_in * (stats.g_out - beta * stats.h_out)),
    )
    t = 0.0
    for coef, rhs in constraints:
        if coef > 0:
            t = max(t, rhs / coef)
        elif rhs > 0:
            # Degenerate |G| = beta H edge: the condition no longer depends
            # on t and simply fails.
            raise InfeasibleBoundError(
                "bound not attainable at any finite eta2; increase beta"
            )
    return t / stats.n_total


def bisect_eta2(stats, beta: float, tol: float = 1e-10) -> float:
    """Numeric cross-check for :func:`eta2_from_beta` by pure bisection.

    Searches the smallest eta2 in [0, 1e12] whose value pair satisfies the
    bound; independent of the closed-form case analysis.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    _check_step_feasible(stats, beta)

    def within(eta2: float) -> bool:
        v_in, v_out = values_step_height(stats, eta2)
        return max(abs(v_in), abs(v_out)) <= beta

    if within(0.0):
        return 0.0
    hi = 1.0
    while not within(hi):
        hi *= 2.0
        if hi > ETA2_SEARCH_CAP:
            raise InfeasibleBoundError(
                f"no eta2 below {ETA2_SEARCH_CAP:g} satisfies the bound"
            )
    lo = 0.0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if within(mid):
            hi = mid
        else:
            lo = mid
    return hi


def regularized_values(stats, spec: RegSpec) -> tuple[float, float]:
    """Dispatch to the scheme's closed form, deriving strengths from beta."""
    if spec.scheme == "none":
        return values_standard(stats, 0.0, 0.0)
    if spec.scheme == "l2":
        lam2 = spec.lam2 if spec.lam2 is not None else lambda2_from_beta(stats, spec.beta)
        return values_standard(stats, 0.0, lam2)
    if spec.scheme == "l1":
        lam1 = spec.lam1 if spec.lam1 is not None else lambda1_from_beta(stats, spec.beta)
        lam2 = spec.lam2 if spec.lam2 is not None else 0.0
        return values_standard(stats, lam1, lam2)
    eta2 = spec.eta2 if spec.eta2 is not None else eta2_from_beta(stats, spec.beta)
    return values_step_height(stats, eta2)


def beta_lower_bound(model, ds) -> float:
    """Diagnostic floor for beta: max |prediction| / box count over a dataset.

    A model whose every base value was capped at beta can reach at most
    T * gamma * beta away from its starting bias, so the observed prediction
    range divided by the box count says how small beta could possibly have
    been. Reported by the CLI; never enforced.
    """
    X = ds if isinstance(ds, np.ndarray) else ds.features
    scores = model.predict(X)
    t = max(1, len(model.boxes))
    return float(np.max(np.abs(scores))) / t
