"""Figure rendering for the benchmark report path.

One PNG per suite, written next to the CSV table. Matplotlib runs on the
Agg backend so the CLI works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .losses import LossKind


def _new_axes(title: str):
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=120)
    ax.set_title(title)
    return fig, ax


def render_friedman1(summary: dict, path) -> None:
    """Cross-validated R^2 against the output bound, one line per seed."""
    fig, ax = _new_axes("Friedman #1: CV R$^2$ vs output bound")
    betas = sorted(summary["beta_curve"])
    per_seed = np.array([summary["beta_curve"][b] for b in betas])  # (beta, seed)
    for s in range(per_seed.shape[1]):
        ax.plot(betas, per_seed[:, s], color="steelblue", alpha=0.25, lw=1)
    ax.plot(betas, np.median(per_seed, axis=1), color="crimson", lw=2, label="median")
    ax.set_xscale("log")
    ax.set_xlabel(r"bound $\beta$")
    ax.set_ylabel("CV R$^2$")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_two_moons(summary: dict, path) -> None:
    """Predicted class-1 probability surface of the first seed's model."""
    model, ds = summary["model"], summary["dataset"]
    fig, ax = _new_axes("Two moons: predicted probability of class 1")
    pad = 0.4
    x_min, y_min = ds.features.min(axis=0) - pad
    x_max, y_max = ds.features.max(axis=0) + pad
    xx, yy = np.meshgrid(np.linspace(x_min, x_max, 200), np.linspace(y_min, y_max, 200))
    grid = np.column_stack([xx.ravel(), yy.ravel()])
    if model.loss is LossKind.BINARY_CROSS_ENTROPY:
        zz = model.predict_proba(grid).reshape(xx.shape)
    else:
        zz = model.predict(grid).reshape(xx.shape)
    mesh = ax.pcolormesh(xx, yy, zz, cmap="coolwarm", vmin=0.0, vmax=1.0, shading="auto")
    fig.colorbar(mesh, ax=ax, label="P(class 1)")
    for label, marker in ((0.0, "o"), (1.0, "^")):
        pts = ds.features[ds.targets == label]
        ax.scatter(pts[:, 0], pts[:, 1], s=8, marker=marker, c="black", alpha=0.5)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_corners_vs_rects(summary: dict, path) -> None:
    """Per-seed paired scores for the two box kinds."""
    fig, ax = _new_axes("Corner vs closed boxes: CV R$^2$ per seed")
    corners = summary["scores"]["corner"]
    closed = summary["scores"]["closed"]
    seeds = np.arange(len(corners))
    ax.plot(seeds, corners, "o-", label=f"corners (median {summary['median_corner']:.3f})")
    ax.plot(seeds, closed, "s--", label=f"closed (median {summary['median_closed']:.3f})")
    ax.set_xlabel("seed")
    ax.set_ylabel("CV R$^2$")
    ax.legend()
    ax.annotate(
        f"paired t-test p = {summary['p_value']:.4f}",
        xy=(0.02, 0.02),
        xycoords="axes fraction",
        fontsize=9,
    )
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_shap_timing(summary: dict, path) -> None:
    """Wall-clock time of each attribution route against batch size."""
    fig, ax = _new_axes(f"Attribution time ({summary['n_boxes']} boxes)")
    for method, series in summary["times"].items():
        ax.plot(summary["n_values"], series, "o-", label=method)
    ax.set_yscale("log")
    ax.set_xlabel("explained examples")
    ax.set_ylabel("seconds")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


RENDERERS = {
    "friedman1": render_friedman1,
    "two-moons": render_two_moons,
    "corners-vs-rects": render_corners_vs_rects,
    "shap-timing": render_shap_timing,
}
