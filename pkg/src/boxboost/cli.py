"""Command-line interface.

Verbs: train, predict, explain, eval, benchmark, gen-data. Exit codes:
0 on success, 1 on runtime failure, 2 on usage errors. Every command
taking --seed is byte-reproducible in its file outputs.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import benchmarks, figures
from .boosting import (
    Ensemble,
    TrainConfig,
    load_model,
    save_model,
    train,
)
from .data import (
    Dataset,
    f1_score,
    gen_friedman1,
    gen_two_moons,
    load_csv,
    r2_score,
    read_table,
)
from .explain import DataShapExplainer, ModelShapExplainer
from .losses import LossKind
from .regularization import RegSpec, beta_lower_bound


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boxboost",
        description="Gradient boosting with axis-aligned box base learners.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p_train = sub.add_parser("train", help="fit a model on a CSV dataset")
    p_train.add_argument("--data", required=True, help="training CSV (header row)")
    p_train.add_argument("--target", required=True, help="target column name or index")
    p_train.add_argument("--model-out", required=True, help="output model JSON path")
    p_train.add_argument("--loss", choices=["l2", "bce"], default="l2")
    p_train.add_argument("--rect", choices=["closed", "corner"], default="corner")
    p_train.add_argument("--iters", type=int, default=1000)
    p_train.add_argument("--candidates", type=int, default=10)
    p_train.add_argument("--attempts", type=int, default=5)
    p_train.add_argument("--gamma", type=float, default=0.1)
    p_train.add_argument("--beta", type=float, default=1.0)
    p_train.add_argument("--reg", choices=["none", "l2", "l1", "step-l2"], default="l2")
    p_train.add_argument("--val-frac", type=float, default=0.2)
    p_train.add_argument("--seed", type=int, default=0)

    p_pred = sub.add_parser("predict", help="score a CSV with a trained model")
    p_pred.add_argument("--model", required=True)
    p_pred.add_argument("--data", required=True)
    p_pred.add_argument("--out", help="output CSV (default: stdout)")

    p_exp = sub.add_parser("explain", help="Shapley attribution of one row")
    p_exp.add_argument("--model", required=True)
    p_exp.add_argument("--data", required=True)
    p_exp.add_argument("--row", type=int, required=True, help="0-based row index")
    p_exp.add_argument(
        "--method",
        choices=["model", "data"],
        help="restrict to one method (default: both)",
    )
    p_exp.add_argument("--out", help="output CSV (default: stdout)")

    p_eval = sub.add_parser("eval", help="score a model with a metric")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--metric", choices=["r2", "f1"], required=True)
    p_eval.add_argument("--cv", type=int, help="k-fold cross-validation with retraining")
    p_eval.add_argument("--repeats", type=int, default=1)

    p_bench = sub.add_parser("benchmark", help="run a reproducible benchmark suite")
    p_bench.add_argument("--suite", choices=list(benchmarks.SUITES), required=True)
    p_bench.add_argument("--seeds", type=int, default=10)
    p_bench.add_argument("--out", default="benchmark-out", help="output directory")
    p_bench.add_argument("--iters", type=int, help="override training iterations")
    p_bench.add_argument("--n", type=int, help="override dataset size")
    p_bench.add_argument("--beta", type=float, help="override the output bound")

    p_gen = sub.add_parser("gen-data", help="write a synthetic dataset as CSV")
    p_gen.add_argument("--kind", choices=["friedman1", "two-moons"], required=True)
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--noise", type=float, default=1.0)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    return parser


def _parse_target(token: str):
    try:
        return int(token)
    except ValueError:
        return token


def _write_rows(rows: list[dict], header: list[str], out: str | None) -> None:
    if out is None:
        writer = csv.DictWriter(sys.stdout, fieldnames=header)
        writer.writeheader()
        writer.writerows(rows)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=header)
            writer.writeheader()
            writer.writerows(rows)


def _feature_matrix(model: Ensemble, path: str) -> tuple[np.ndarray, np.ndarray | None]:
    """Columns of ``path`` matching the model's features, plus targets if present."""
    header, table = read_table(path)
    name_to_col = {name: i for i, name in enumerate(header)}
    if all(name in name_to_col for name in model.feature_names):
        cols = [name_to_col[name] for name in model.feature_names]
        X = table[:, cols]
        rest = [i for i in range(len(header)) if i not in set(cols)]
        y = table[:, rest[0]] if len(rest) == 1 else None
        return X, y
    if table.shape[1] == model.n_features:
        return table, None
    raise ValueError(
        f"{path}: columns {header} do not match the model's features "
        f"{model.feature_names}"
    )


def _cmd_train(args, parser: argparse.ArgumentParser) -> int:
    try:
        cfg = TrainConfig(
            iterations=args.iters,
            candidates=args.candidates,
            attempts=args.attempts,
            learning_rate=args.gamma,
            val_fraction=args.val_frac,
            rect_kind=args.rect,
            loss=LossKind.from_token(args.loss),
            reg=RegSpec(args.reg, beta=args.beta if args.reg != "none" else None),
            seed=args.seed,
        )
    except ValueError as exc:
        parser.error(str(exc))
    ds = load_csv(args.data, _parse_target(args.target))
    model = train(ds, cfg)
    save_model(model, args.model_out)

    log_path = args.model_out + ".log"
    with open(log_path, "w", encoding="utf-8") as fh:
        for rec in model.train_meta["history"]:
            if rec["accepted"]:
                fh.write(
                    f"iter={rec['iteration']} accepted=1 attempts={rec['attempts']} "
                    f"val_loss_before={rec['val_loss_before']!r} "
                    f"val_loss_after={rec['val_loss_after']!r} "
                    f"value={rec['value']!r} n_inside={rec['n_inside']}\n"
                )
            else:
                fh.write(
                    f"iter={rec['iteration']} accepted=0 attempts={rec['attempts']}\n"
                )
    print(f"model written to {args.model_out} ({len(model.boxes)} boxes)")
    print(f"training log written to {log_path}")
    print(f"beta lower bound (diagnostic): {beta_lower_bound(model, ds):.6g}")
    return 0


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    X, _ = _feature_matrix(model, args.data)
    raw = np.atleast_1d(model.predict(X))
    header = ["row", "prediction"]
    rows = [{"row": i, "prediction": repr(float(v))} for i, v in enumerate(raw)]
    if model.loss is LossKind.BINARY_CROSS_ENTROPY:
        header.append("probability")
        probs = np.atleast_1d(model.predict_proba(X))
        for row, p in zip(rows, probs):
            row["probability"] = repr(float(p))
    _write_rows(rows, header, args.out)
    return 0


def _cmd_explain(args) -> int:
    model = load_model(args.model)
    X, _ = _feature_matrix(model, args.data)
    if not 0 <= args.row < X.shape[0]:
        raise ValueError(f"--row {args.row} out of range for {X.shape[0]} rows")
    x = X[args.row]

    header = ["feature"]
    columns: dict[str, object] = {}
    if args.method in (None, "model"):
        attr = ModelShapExplainer(model).explain(x)
        header.append("phi_model_based")
        columns["phi_model_based"] = attr
    if args.method in (None, "data"):
        attr = DataShapExplainer(model, X).explain(x)
        header.append("phi_data_based")
        columns["phi_data_based"] = attr

    rows = []
    for j, name in enumerate(model.feature_names):
        row = {"feature": name}
        for key, attr in columns.items():
            row[key] = repr(float(attr.phi[j]))
        rows.append(row)
    base = {"feature": "base_value"}
    for key, attr in columns.items():
        base[key] = repr(float(attr.base_value))
    rows.append(base)
    _write_rows(rows, header, args.out)
    return 0


def _metric_value(metric: str, model: Ensemble, X, y) -> float:
    if y is None:
        raise ValueError("dataset has no target column for evaluation")
    if metric == "r2":
        return r2_score(y, model.predict(X))
    if model.loss is not LossKind.BINARY_CROSS_ENTROPY:
        raise ValueError("f1 requires a bce model (classification)")
    preds = (np.atleast_1d(model.predict(X)) >= 0.0).astype(float)
    return f1_score(y, preds, "binary")


def _cmd_eval(args) -> int:
    model = load_model(args.model)
    X, y = _feature_matrix(model, args.data)
    if args.cv is None:
        print(f"{args.metric}: {_metric_value(args.metric, model, X, y):.4f}")
        return 0

    if model.train_meta is None or "config" not in (model.train_meta or {}):
        raise ValueError("model file carries no training config; cannot cross-validate")
    if y is None:
        raise ValueError("dataset has no target column for evaluation")
    cfg = TrainConfig.from_dict(model.train_meta["config"])
    task = "binary-classification" if model.loss is LossKind.BINARY_CROSS_ENTROPY else "regression"
    names = list(model.feature_names)
    scores = []
    for repeat in range(args.repeats):
        folds = benchmarks.kfold_indices(X.shape[0], args.cv, cfg.seed + 104729 * repeat)
        for train_idx, test_idx in folds:
            fold_ds = Dataset(X[train_idx], y[train_idx], names, task)
            fold_model = train(fold_ds, cfg)
            scores.append(_metric_value(args.metric, fold_model, X[test_idx], y[test_idx]))
    mean = float(np.mean(scores))
    std = float(np.std(scores))
    print(
        f"{args.metric} ({args.cv}-fold x {args.repeats} repeats): "
        f"{mean:.4f} (std {std:.4f})"
    )
    return 0


def _format_text_table(rows: list[dict]) -> str:
    if not rows:
        return "(no rows)\n"
    header = list(rows[0].keys())
    cells = [[str(row[k]) for k in header] for row in rows]
    widths = [
        max(len(header[i]), max(len(row[i]) for row in cells)) for i in range(len(header))
    ]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for row in cells:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines) + "\n"


def _cmd_benchmark(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    kwargs = {}
    if args.suite in ("friedman1", "corners-vs-rects"):
        kwargs["seeds"] = args.seeds
        if args.iters:
            kwargs["iters"] = args.iters
        if args.n:
            kwargs["n"] = args.n
    elif args.suite == "two-moons":
        kwargs["seeds"] = args.seeds
        if args.iters:
            kwargs["iters"] = args.iters
        if args.n:
            kwargs["n"] = args.n
        if args.beta:
            kwargs["beta"] = args.beta
    else:
        if args.n:
            kwargs["min_boxes"] = args.n

    runner = {
        "friedman1": benchmarks.run_friedman1,
        "two-moons": benchmarks.run_two_moons,
        "corners-vs-rects": benchmarks.run_corners_vs_rects,
        "shap-timing": benchmarks.run_shap_timing,
    }[args.suite]
    rows, summary = runner(**kwargs)

    csv_path = out_dir / f"{args.suite}.csv"
    _write_rows(rows, list(rows[0].keys()), str(csv_path))

    text = _format_text_table(rows)
    for key in sorted(summary):
        value = summary[key]
        if isinstance(value, (int, float, str)):
            text += f"{key}: {value}\n"
    txt_path = out_dir / f"{args.suite}.txt"
    txt_path.write_text(text, encoding="utf-8")
    print(text, end="")

    png_path = out_dir / f"{args.suite}.png"
    figures.RENDERERS[args.suite](summary, png_path)
    print(f"wrote {csv_path}, {txt_path}, {png_path}")
    return 0


def _cmd_gen_data(args, parser: argparse.ArgumentParser) -> int:
    try:
        if args.kind == "friedman1":
            ds = gen_friedman1(args.n, args.seed, noise=args.noise)
        else:
            ds = gen_two_moons(args.n, args.noise, args.seed)
    except ValueError as exc:
        parser.error(str(exc))
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ds.feature_names + ["target"])
        for x_row, y_val in zip(ds.features, ds.targets):
            writer.writerow([repr(float(v)) for v in x_row] + [repr(float(y_val))])
    print(f"wrote {ds.n_rows} rows to {args.out}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.verb == "train":
            return _cmd_train(args, parser)
        if args.verb == "predict":
            return _cmd_predict(args)
        if args.verb == "explain":
            return _cmd_explain(args)
        if args.verb == "eval":
            return _cmd_eval(args)
        if args.verb == "benchmark":
            return _cmd_benchmark(args)
        return _cmd_gen_data(args, parser)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
