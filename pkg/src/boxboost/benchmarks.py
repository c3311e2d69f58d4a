"""Reproducible benchmark suites behind the CLI ``benchmark`` verb.

Every suite returns plain row dicts (written as CSV by the CLI) plus a
bag of extras used for rendering the companion figure. All randomness is
seeded; identical invocations produce identical tables.
"""

from __future__ import annotations

import time

import numpy as np

from . import explain
from .boosting import Ensemble, TrainConfig, train
from .data import Dataset, f1_score, gen_friedman1, gen_two_moons, paired_t_test, r2_score
from .fitting import NoValidCandidateError
from .geometry import KIND_CLOSED, KIND_CORNER, generate, contains_batch
from .losses import LossKind
from .regularization import RegSpec

BETA_GRID = (0.01, 0.05, 0.1, 0.5, 1.0, 5.0)

SUITES = ("friedman1", "two-moons", "corners-vs-rects", "shap-timing")


def kfold_indices(n: int, k: int, seed) -> list[tuple[np.ndarray, np.ndarray]]:
    """Shuffled k-fold (train, test) index pairs covering 0..n-1."""
    if not 2 <= k <= n:
        raise ValueError("need 2 <= k <= n folds")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    order = rng.permutation(n)
    folds = np.array_split(order, k)
    out = []
    for i in range(k):
        test = folds[i]
        training = np.concatenate([folds[j] for j in range(k) if j != i])
        out.append((training, test))
    return out


def _subset(ds: Dataset, idx: np.ndarray) -> Dataset:
    return Dataset(ds.features[idx], ds.targets[idx], list(ds.feature_names), ds.task)


def cv_r2(ds: Dataset, cfg: TrainConfig, folds: int = 5, seed: int = 0) -> float:
    """Mean out-of-fold R^2 of models trained with ``cfg``."""
    scores = []
    for training, test in kfold_indices(ds.n_rows, folds, seed):
        model = train(_subset(ds, training), cfg)
        preds = model.predict(ds.features[test])
        scores.append(r2_score(ds.targets[test], preds))
    return float(np.mean(scores))


def _regression_config(
    beta: float, iters: int, kind: str, seed: int, gamma: float = 0.1
) -> TrainConfig:
    return TrainConfig(
        iterations=iters,
        learning_rate=gamma,
        rect_kind=kind,
        loss=LossKind.SQUARED_ERROR,
        reg=RegSpec("l2", beta=beta),
        seed=seed,
    )


def _checkpoint_scores(
    model: Ensemble, X_test: np.ndarray, y_test: np.ndarray, checkpoints
) -> list[float]:
    """Out-of-fold R^2 of the model truncated to each iteration checkpoint.

    The ensemble is additive, so every prefix of the accepted-box sequence
    is itself the model that training would have produced with a smaller
    iteration budget; one trained model yields the whole budget curve.
    """
    accepted = [rec for rec in model.train_meta["history"] if rec["accepted"]]
    gamma = model.train_meta["config"]["learning_rate"]
    bias_steps = np.array([gamma * rec["v_out"] for rec in accepted])
    values = np.array([box.value for box in model.boxes])
    if values.size:
        lower = np.stack([b.rect.lower for b in model.boxes])
        upper = np.stack([b.rect.upper for b in model.boxes])
        member = np.all(
            (X_test[:, None, :] >= lower) & (X_test[:, None, :] <= upper), axis=2
        )
        contrib = np.cumsum(member * values + bias_steps, axis=1)  # (n, boxes)
    else:
        contrib = np.zeros((X_test.shape[0], 0))
    base = model.train_meta["initial_bias"]
    boxes_by_iter = np.cumsum([rec["accepted"] for rec in model.train_meta["history"]])
    out = []
    for t in checkpoints:
        m = int(boxes_by_iter[min(t, len(boxes_by_iter)) - 1])
        preds = base + (contrib[:, m - 1] if m > 0 else 0.0)
        out.append(r2_score(y_test, preds))
    return out


def run_friedman1(
    seeds: int = 10,
    n: int = 100,
    iters: int = 5500,
    folds: int = 5,
    grid: tuple[float, ...] = BETA_GRID,
    checkpoints: tuple[int, ...] | None = None,
    gamma: float = 0.05,
) -> tuple[list[dict], dict]:
    """Per-seed cross-validated R^2 on Friedman #1, tuned over the grid.

    Both the bound beta and the iteration budget are tuned by the same
    5-fold CV (budgets are evaluated as prefixes of one full-length run,
    so the grid over budgets costs no extra training). The summary holds
    the median over per-seed CV means and over all tuned fold scores.
    """
    if checkpoints is None:
        checkpoints = tuple(
            sorted({max(1, iters // 8), iters // 4, iters // 2, 3 * iters // 4, iters})
        )
    rows = []
    curve: dict[float, list[float]] = {beta: [] for beta in grid}
    fold_scores: list[float] = []
    for seed in range(seeds):
        ds = gen_friedman1(n, seed)
        best = (-np.inf, None, None, None)
        for beta in grid:
            cfg = _regression_config(beta, iters, KIND_CORNER, seed, gamma=gamma)
            per_fold = []
            for training, test in kfold_indices(ds.n_rows, folds, seed):
                model = train(_subset(ds, training), cfg)
                per_fold.append(
                    _checkpoint_scores(
                        model, ds.features[test], ds.targets[test], checkpoints
                    )
                )
            per_fold = np.asarray(per_fold)  # (fold, checkpoint)
            means = per_fold.mean(axis=0)
            curve[beta].append(float(np.max(means)))
            top = int(np.argmax(means))
            if means[top] > best[0]:
                best = (float(means[top]), beta, checkpoints[top], per_fold[:, top])
        rows.append(
            {
                "seed": seed,
                "best_beta": best[1],
                "best_iters": best[2],
                "r2": round(best[0], 6),
            }
        )
        fold_scores.extend(float(s) for s in best[3])
    scores = [row["r2"] for row in rows]
    summary = {
        "median_r2": float(np.median(scores)),
        "median_fold_r2": float(np.median(fold_scores)),
        "fold_scores": fold_scores,
        "beta_curve": {beta: list(vals) for beta, vals in curve.items()},
    }
    return rows, summary


def run_two_moons(
    seeds: int = 10,
    n: int = 400,
    noise: float = 0.15,
    iters: int = 200,
    gamma: float = 0.1,
    beta: float = 1.0,
) -> tuple[list[dict], dict]:
    """Held-out accuracy and F1 of corner models on the two-moons task."""
    rows = []
    first_model, first_ds = None, None
    for seed in range(seeds):
        ds = gen_two_moons(n, noise, seed)
        rng = np.random.default_rng(seed)
        order = rng.permutation(ds.n_rows)
        n_test = ds.n_rows // 4
        test, training = order[:n_test], order[n_test:]
        cfg = TrainConfig(
            iterations=iters,
            learning_rate=gamma,
            rect_kind=KIND_CORNER,
            loss=LossKind.BINARY_CROSS_ENTROPY,
            reg=RegSpec("l2", beta=beta),
            seed=seed,
        )
        model = train(_subset(ds, training), cfg)
        preds = (model.predict(ds.features[test]) >= 0.0).astype(float)
        truth = ds.targets[test]
        acc = float(np.mean(preds == truth))
        f1 = f1_score(truth, preds, "binary")
        rows.append({"seed": seed, "accuracy": round(acc, 6), "f1": round(f1, 6)})
        if first_model is None:
            first_model, first_ds = model, ds
    summary = {
        "median_accuracy": float(np.median([r["accuracy"] for r in rows])),
        "median_f1": float(np.median([r["f1"] for r in rows])),
        "model": first_model,
        "dataset": first_ds,
    }
    return rows, summary


def run_corners_vs_rects(
    seeds: int = 10,
    n: int = 100,
    iters: int = 1000,
    folds: int = 5,
    beta: float = 1.0,
) -> tuple[list[dict], dict]:
    """Paired comparison of corner and closed-box learners on Friedman #1.

    Identical budgets for both kinds; reports medians and the paired
    t-test over the per-seed scores.
    """
    rows = []
    scores = {KIND_CORNER: [], KIND_CLOSED: []}
    for seed in range(seeds):
        ds = gen_friedman1(n, seed)
        for kind in (KIND_CORNER, KIND_CLOSED):
            cfg = _regression_config(beta, iters, kind, seed)
            score = cv_r2(ds, cfg, folds=folds, seed=seed)
            scores[kind].append(score)
            rows.append({"seed": seed, "kind": kind, "r2": round(score, 6)})
    t_stat, p_value = paired_t_test(scores[KIND_CORNER], scores[KIND_CLOSED])
    summary = {
        "median_corner": float(np.median(scores[KIND_CORNER])),
        "median_closed": float(np.median(scores[KIND_CLOSED])),
        "t_statistic": t_stat,
        "p_value": p_value,
        "scores": scores,
    }
    return rows, summary


def train_timing_model(
    n: int = 100, min_boxes: int = 1000, seed: int = 0
) -> tuple[Ensemble, Dataset]:
    """A corners model with at least ``min_boxes`` accepted boxes, for timing."""
    ds = gen_friedman1(n, seed)
    iters = 2 * min_boxes
    while True:
        cfg = _regression_config(1.0, iters, KIND_CORNER, seed)
        model = train(ds, cfg)
        if len(model.boxes) >= min_boxes:
            return model, ds
        iters *= 2
        if iters > 64 * min_boxes:
            raise RuntimeError("could not accumulate enough boxes for timing")


def _time_brute_force(model: Ensemble, ds: Dataset, points: np.ndarray) -> float:
    """Full-enumeration expectation-game attribution, no shared setup."""
    d = model.n_features
    lower = np.stack([b.rect.lower for b in model.boxes])
    upper = np.stack([b.rect.upper for b in model.boxes])
    values = np.array([b.value for b in model.boxes])
    start = time.perf_counter()
    for x in points:
        inside_pts = (ds.features[None, :, :] >= lower[:, None, :]) & (
            ds.features[None, :, :] <= upper[:, None, :]
        )
        inside_x = (x >= lower) & (x <= upper)

        def game(S, inside_pts=inside_pts, inside_x=inside_x):
            members = np.fromiter(S, dtype=np.int64, count=len(S))
            rest = np.setdiff1d(np.arange(d), members)
            ok = (
                np.all(inside_x[:, members], axis=1)
                if members.size
                else np.ones(values.shape[0], dtype=bool)
            )
            if rest.size:
                coverage = np.mean(np.all(inside_pts[:, :, rest], axis=2), axis=1)
            else:
                coverage = np.ones(values.shape[0])
            return model.bias + float(values @ (ok * coverage))

        explain.shap_brute_force(game, d, method="brute_force_data")
    return time.perf_counter() - start


def run_shap_timing(
    n_values: tuple[int, ...] = (1, 10, 20),
    min_boxes: int = 1000,
    seed: int = 0,
    skip_brute_force: bool = False,
) -> tuple[list[dict], dict]:
    """Wall-clock comparison of the three attribution routes.

    Each measurement covers explainer construction plus ``n`` explained
    points, mirroring how a user would explain a batch.
    """
    model, ds = train_timing_model(min_boxes=min_boxes, seed=seed)
    rows = []
    times: dict[str, list[float]] = {}
    methods = ["model_based", "data_based"] + ([] if skip_brute_force else ["brute_force"])
    for method in methods:
        times[method] = []
        for n in n_values:
            points = ds.features[:n]
            if method == "brute_force":
                elapsed = _time_brute_force(model, ds, points)
            elif method == "data_based":
                start = time.perf_counter()
                explainer = explain.DataShapExplainer(model, ds)
                for x in points:
                    explainer.explain(x)
                elapsed = time.perf_counter() - start
            else:
                start = time.perf_counter()
                explainer = explain.ModelShapExplainer(model)
                for x in points:
                    explainer.explain(x)
                elapsed = time.perf_counter() - start
            times[method].append(elapsed)
            rows.append({"method": method, "n": n, "seconds": round(elapsed, 6)})
    summary = {"times": times, "n_values": list(n_values), "n_boxes": len(model.boxes)}
    return rows, summary


def independent_average_r2(
    ds: Dataset, count: int, kind: str = KIND_CORNER, seed: int = 0
) -> float:
    """Training R^2 of an average of independently fitted boxes.

    Each box is drawn from the same random generator as boosting uses but
    fitted directly to the targets (group means, squared loss) with no
    sequential correction. Averaging such independent boxes collapses
    toward the global target mean, which is the motivation for boosting
    them instead.
    """
    rng = np.random.default_rng(seed)
    X, y = ds.features, ds.targets
    total = np.zeros(ds.n_rows)
    fitted = 0
    attempts = 0
    while fitted < count:
        attempts += 1
        if attempts > 100 * count:
            raise NoValidCandidateError("could not draw enough two-sided boxes")
        rect = generate(X, kind, rng)
        inside = contains_batch(rect, X)
        n_in = int(np.count_nonzero(inside))
        if n_in == 0 or n_in == ds.n_rows:
            continue
        v_in = float(y[inside].mean())
        v_out = float(y[~inside].mean())
        total += np.where(inside, v_in, v_out)
        fitted += 1
    return r2_score(y, total / count)
