import json
import math

import numpy as np
import pytest

from boxboost.boosting import (
    Ensemble,
    FoldedBox,
    ModelFormatError,
    TrainConfig,
    load_model,
    predict_one_vs_rest,
    save_model,
    train,
    train_one_vs_rest,
)
from boxboost.data import Dataset, f1_score, gen_blobs, gen_friedman1, gen_two_moons, split
from boxboost.fitting import draw_fitted_candidates
from boxboost.geometry import Rectangle, contains_batch
from boxboost.losses import LossKind, init_bias
from boxboost.regularization import RegSpec


def _line_ds(values, targets):
    X = np.asarray(values, dtype=float).reshape(-1, 1)
    return Dataset(X, np.asarray(targets, dtype=float), ["x"], "regression")


def _moons_model(iters=60, seed=0, beta=1.0):
    ds = gen_two_moons(200, 0.15, seed)
    cfg = TrainConfig(
        iterations=iters,
        loss=LossKind.BINARY_CROSS_ENTROPY,
        reg=RegSpec("l2", beta=beta),
        seed=seed,
    )
    return ds, train(ds, cfg)


class TestTrainConfig:
    def test_validations(self):
        with pytest.raises(ValueError):
            TrainConfig(iterations=0)
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=1.5)
        with pytest.raises(ValueError):
            TrainConfig(val_fraction=1.0)
        with pytest.raises(ValueError):
            TrainConfig(rect_kind="diamond")

    def test_round_trips_as_dict(self):
        cfg = TrainConfig(iterations=7, reg=RegSpec("step-l2", beta=0.4), seed=3)
        assert TrainConfig.from_dict(cfg.to_dict()) == cfg


class TestTrainSingleStep:
    def test_replayed_hand_trace(self):
        # One iteration, one candidate, one attempt on a 4-point line.
        ds = _line_ds([0.0, 1.0, 2.0, 3.0], [0.0, 1.0, 4.0, 9.0])
        cfg = TrainConfig(
            iterations=1,
            candidates=1,
            attempts=1,
            learning_rate=0.5,
            val_fraction=0.5,
            rect_kind="closed",
            reg=RegSpec(),
            seed=19,  # chosen so the single candidate passes the gate
        )
        model = train(ds, cfg)
        assert len(model.boxes) == 1

        # Replay the generator stream by hand.
        rng = np.random.default_rng(cfg.seed)
        q0 = float(np.mean(ds.targets))
        pair = split(ds, cfg.val_fraction, rng)
        tr, va = pair.train_indices, pair.val_indices
        s = np.full(4, q0)
        g = s[tr] - ds.targets[tr]
        h = np.ones_like(g)
        batch = draw_fitted_candidates(
            ds.features[tr], g, h, 1, "closed", cfg.reg, rng
        )
        if not np.isfinite(batch.costs[0]):
            assert model.boxes == []
            return
        rect = Rectangle(batch.lower[0], batch.upper[0], "closed")
        inside_tr = contains_batch(rect, ds.features[tr])
        v_in = -g[inside_tr].sum() / h[inside_tr].sum()
        v_out = -g[~inside_tr].sum() / h[~inside_tr].sum()
        inside_va = contains_batch(rect, ds.features[va])
        step = cfg.learning_rate * (inside_va * (v_in - v_out) + v_out)
        before = np.mean(0.5 * (ds.targets[va] - s[va]) ** 2)
        after = np.mean(0.5 * (ds.targets[va] - s[va] - step) ** 2)
        if after <= before:
            assert len(model.boxes) == 1
            assert model.boxes[0].value == pytest.approx(
                cfg.learning_rate * (v_in - v_out), rel=1e-12
            )
            assert model.bias == pytest.approx(
                q0 + cfg.learning_rate * v_out, rel=1e-12
            )
        else:
            assert model.boxes == []
            assert model.bias == pytest.approx(q0)

    def test_two_point_dataset_yields_constant_model(self):
        # A 2-row dataset leaves a single training row after the split, so
        # no candidate can keep both sides non-empty.
        ds = _line_ds([0.0, 1.0], [0.0, 1.0])
        cfg = TrainConfig(iterations=3, candidates=1, attempts=1, seed=0, reg=RegSpec())
        with pytest.warns(RuntimeWarning, match="constant"):
            model = train(ds, cfg)
        assert model.boxes == []
        assert model.predict(np.array([0.3])) == pytest.approx(0.5)

    def test_constant_targets(self):
        ds = _line_ds([0.0, 1.0, 2.0, 3.0, 4.0], [7.0] * 5)
        cfg = TrainConfig(iterations=5, seed=1, reg=RegSpec())
        model = train(ds, cfg)
        assert model.bias == pytest.approx(7.0)
        for box in model.boxes:
            assert box.value == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(model.predict(ds.features), 7.0)


class TestTrainInvariants:
    def test_incremental_scores_match_full_prediction(self):
        ds = gen_friedman1(80, 3)
        cfg = TrainConfig(iterations=300, seed=5)
        model = train(ds, cfg)
        assert len(model.boxes) > 10
        pred = model.predict(ds.features)
        drift = np.max(np.abs(pred - model.train_meta["final_scores"]))
        assert drift <= 1e-9

    def test_bias_folding_identity(self):
        ds = gen_friedman1(60, 4)
        cfg = TrainConfig(iterations=150, seed=6)
        model = train(ds, cfg)
        accepted = [r for r in model.train_meta["history"] if r["accepted"]]
        assert len(accepted) == len(model.boxes)
        gamma = cfg.learning_rate
        q0 = model.train_meta["initial_bias"]
        probes = gen_friedman1(25, 99).features
        for x in probes:
            unfolded = q0
            for rec, box in zip(accepted, model.boxes):
                member = float(contains_batch(box.rect, x[None, :])[0])
                unfolded += gamma * (
                    member * (rec["v_in"] - rec["v_out"]) + rec["v_out"]
                )
            assert model.predict(x) == pytest.approx(unfolded, abs=1e-10)

    def test_validation_loss_never_increases_at_acceptance(self):
        ds = gen_friedman1(80, 7)
        model = train(ds, TrainConfig(iterations=200, seed=2))
        for rec in model.train_meta["history"]:
            if rec["accepted"]:
                assert rec["val_loss_after"] <= rec["val_loss_before"]

    def test_beta_bound_limits_prediction_range(self):
        ds = gen_friedman1(60, 8)
        beta = 0.5
        cfg = TrainConfig(iterations=120, seed=3, reg=RegSpec("l2", beta=beta))
        model = train(ds, cfg)
        q0 = model.train_meta["initial_bias"]
        probes = gen_friedman1(40, 123).features
        bound = cfg.iterations * cfg.learning_rate * 2 * beta + 1e-9
        assert np.max(np.abs(model.predict(probes) - q0)) <= bound

    def test_deterministic_model_files(self, tmp_path):
        ds = gen_two_moons(120, 0.2, 4)
        cfg = TrainConfig(
            iterations=40, loss=LossKind.BINARY_CROSS_ENTROPY, seed=11
        )
        paths = []
        for name in ("a.json", "b.json"):
            model = train(ds, cfg)
            path = tmp_path / name
            save_model(model, path)
            paths.append(path.read_bytes())
        assert paths[0] == paths[1]


class TestPredict:
    def test_empty_model_returns_bias(self):
        model = Ensemble(1.5, [], LossKind.SQUARED_ERROR, 2, ["a", "b"])
        assert model.predict(np.array([0.0, 0.0])) == pytest.approx(1.5)

    def test_single_box(self):
        box = FoldedBox(Rectangle([0.0, 0.0], [1.0, 1.0]), 2.0)
        model = Ensemble(1.0, [box], LossKind.SQUARED_ERROR, 2, ["a", "b"])
        assert model.predict(np.array([0.5, 0.5])) == pytest.approx(3.0)
        assert model.predict(np.array([2.0, 0.5])) == pytest.approx(1.0)

    def test_matrix_prediction_matches_rowwise(self):
        ds, model = _moons_model(iters=40)
        X = ds.features[:37]
        batch = model.predict(X)
        rows = np.array([model.predict(x) for x in X])
        np.testing.assert_allclose(batch, rows, atol=1e-12)

    def test_dimension_mismatch(self):
        model = Ensemble(0.0, [], LossKind.SQUARED_ERROR, 3, list("abc"))
        with pytest.raises(ValueError):
            model.predict(np.zeros(2))
        with pytest.raises(ValueError):
            model.predict(np.zeros((4, 2)))


class TestPredictProba:
    def test_values(self):
        model = Ensemble(0.0, [], LossKind.BINARY_CROSS_ENTROPY, 1, ["x"])
        assert model.predict_proba(np.zeros(1)) == pytest.approx(0.5)
        model_ln3 = Ensemble(math.log(3), [], LossKind.BINARY_CROSS_ENTROPY, 1, ["x"])
        assert model_ln3.predict_proba(np.zeros(1)) == pytest.approx(0.75)

    def test_monotone_in_raw_score(self):
        ds, model = _moons_model(iters=40)
        raw = model.predict(ds.features)
        proba = model.predict_proba(ds.features)
        order = np.argsort(raw)
        assert np.all(np.diff(proba[order]) >= 0)

    def test_rejected_for_regression(self):
        model = Ensemble(0.0, [], LossKind.SQUARED_ERROR, 1, ["x"])
        with pytest.raises(ValueError):
            model.predict_proba(np.zeros(1))


class TestSaveLoad:
    def test_round_trip_predictions(self, tmp_path):
        ds, model = _moons_model(iters=60)
        path = tmp_path / "model.json"
        save_model(model, path)
        loaded = load_model(path)
        probes = np.random.default_rng(0).uniform(-2, 3, size=(1000, 2))
        np.testing.assert_array_equal(model.predict(probes), loaded.predict(probes))
        assert loaded.loss is model.loss
        assert loaded.feature_names == model.feature_names

    def test_corner_nulls_round_trip(self, tmp_path):
        box = FoldedBox(
            Rectangle([-np.inf, 0.5], [0.25, np.inf], "corner"), -1.25
        )
        model = Ensemble(0.5, [box], LossKind.SQUARED_ERROR, 2, ["a", "b"])
        path = tmp_path / "corner.json"
        save_model(model, path)
        payload = json.loads(path.read_text())
        assert payload["boxes"][0]["lower"] == [None, 0.5]
        assert payload["boxes"][0]["upper"] == [0.25, None]
        loaded = load_model(path)
        assert loaded.boxes[0].rect.kind == "corner"
        x = np.array([0.1, 0.7])
        assert loaded.predict(x) == model.predict(x)

    def test_schema_keys(self, tmp_path):
        ds, model = _moons_model(iters=10)
        path = tmp_path / "m.json"
        save_model(model, path)
        payload = json.loads(path.read_text())
        assert payload["version"] == 1
        assert payload["loss"] == "bce"
        assert set(payload) >= {"version", "loss", "bias", "d", "feature_names", "boxes"}
        assert set(payload["boxes"][0]) == {"lower", "upper", "value"}

    def test_wrong_dimension_box_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        payload = {
            "version": 1,
            "loss": "l2",
            "bias": 0.0,
            "d": 2,
            "feature_names": ["a", "b"],
            "boxes": [{"lower": [0.0], "upper": [1.0], "value": 1.0}],
        }
        path.write_text(json.dumps(payload))
        with pytest.raises(ModelFormatError, match="dimension"):
            load_model(path)

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "v2.json"
        path.write_text('{"version": 2}')
        with pytest.raises(ModelFormatError, match="version"):
            load_model(path)

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "junk.json"
        path.write_text("{not json")
        with pytest.raises(ModelFormatError, match="JSON"):
            load_model(path)


class TestOneVsRest:
    def test_three_class_blobs(self):
        ds = gen_blobs(120, 3, seed=2, spread=0.4)
        cfg = TrainConfig(iterations=80, seed=0, reg=RegSpec("l2", beta=1.0))
        models = train_one_vs_rest(ds, cfg)
        assert len(models) == 3
        preds = predict_one_vs_rest(models, ds.features)
        assert f1_score(ds.targets, preds.astype(float), "macro") >= 0.9

    def test_binary_consistency_with_threshold(self):
        ds = gen_two_moons(200, 0.1, seed=3)
        multi = Dataset(ds.features, ds.targets, list(ds.feature_names), "multiclass-classification")
        cfg = TrainConfig(iterations=60, seed=1, reg=RegSpec("l2", beta=1.0))
        models = train_one_vs_rest(multi, cfg)
        preds = predict_one_vs_rest(models, ds.features)
        single = train(
            ds,
            TrainConfig(
                iterations=60,
                seed=1,
                loss=LossKind.BINARY_CROSS_ENTROPY,
                reg=RegSpec("l2", beta=1.0),
            ),
        )
        thresholded = (single.predict(ds.features) >= 0.0).astype(int)
        agreement = np.mean(preds == thresholded)
        assert agreement >= 0.9

    def test_missing_class_rejected(self):
        X = np.zeros((4, 1))
        ds = Dataset(X, np.array([0.0, 0.0, 2.0, 2.0]), ["x"], "multiclass-classification")
        with pytest.raises(ValueError, match="absent"):
            train_one_vs_rest(ds, TrainConfig(iterations=1))


class TestInitBiasIntegration:
    def test_bce_training_starts_at_log_odds(self):
        ds = gen_two_moons(100, 0.2, 9)
        model = train(
            ds,
            TrainConfig(iterations=1, loss=LossKind.BINARY_CROSS_ENTROPY, seed=0),
        )
        assert model.train_meta["initial_bias"] == pytest.approx(
            init_bias(LossKind.BINARY_CROSS_ENTROPY, ds)
        )

    def test_bce_requires_binary_targets(self):
        ds = _line_ds([0.0, 1.0, 2.0], [0.0, 0.5, 1.0])
        with pytest.raises(ValueError, match="0/1"):
            train(ds, TrainConfig(iterations=1, loss=LossKind.BINARY_CROSS_ENTROPY))
