import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boxboost.data import gen_friedman1
from boxboost.geometry import (
    KIND_CLOSED,
    KIND_CORNER,
    Rectangle,
    contains,
    contains_batch,
    generate_batch,
    generate_random_corner,
    generate_random_rectangle,
)


class TestRectangleType:
    def test_rejects_inverted_bounds(self):
        with pytest.raises(ValueError):
            Rectangle([1.0], [0.0])

    def test_closed_requires_finite(self):
        with pytest.raises(ValueError):
            Rectangle([-np.inf], [1.0], KIND_CLOSED)

    def test_corner_requires_one_sided_infinity(self):
        with pytest.raises(ValueError):
            Rectangle([0.0], [1.0], KIND_CORNER)
        Rectangle([-np.inf], [1.0], KIND_CORNER)  # valid


class TestContains:
    def test_interval(self):
        r = Rectangle([0.0], [1.0])
        assert contains(r, [0.5])
        assert contains(r, [0.0]) and contains(r, [1.0])  # closed ends

    def test_violation_on_one_feature(self):
        r = Rectangle([0.0, 0.0], [1.0, 1.0])
        assert not contains(r, [0.5, 2.0])

    def test_corner_membership(self):
        r = Rectangle([-np.inf, 0.7], [0.3, np.inf], KIND_CORNER)
        assert contains(r, [0.2, 0.9])
        assert not contains(r, [0.4, 0.9])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            contains(Rectangle([0.0], [1.0]), [0.1, 0.2])

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(0)
        r = Rectangle([-0.5, 0.1], [0.5, 0.9])
        X = rng.uniform(-1, 1, size=(50, 2))
        batch = contains_batch(r, X)
        assert all(batch[i] == contains(r, X[i]) for i in range(50))

    @given(
        grow_lo=st.floats(0.0, 5.0),
        grow_hi=st.floats(0.0, 5.0),
        seed=st.integers(0, 100),
    )
    @settings(max_examples=50, deadline=None)
    def test_monotone_under_enlargement(self, grow_lo, grow_hi, seed):
        rng = np.random.default_rng(seed)
        lower = rng.uniform(-1, 0, 3)
        upper = rng.uniform(0, 1, 3)
        x = rng.uniform(-2, 2, 3)
        small = Rectangle(lower, upper)
        big = Rectangle(lower - grow_lo, upper + grow_hi)
        if contains(small, x):
            assert contains(big, x)


class TestRandomRectangle:
    def test_single_point_degenerates(self):
        X = np.array([[0.3, -1.2]])
        r = generate_random_rectangle(X, np.random.default_rng(5))
        np.testing.assert_allclose(r.lower, X[0])
        np.testing.assert_allclose(r.upper, X[0])
        assert contains(r, X[0])

    def test_seeded_determinism(self):
        ds = gen_friedman1(20, 1)
        a = generate_random_rectangle(ds, np.random.default_rng(11))
        b = generate_random_rectangle(ds, np.random.default_rng(11))
        np.testing.assert_array_equal(a.lower, b.lower)
        np.testing.assert_array_equal(a.upper, b.upper)

    def test_centers_and_widths_in_range(self):
        # 2-point 1-D dataset {0, 1}: centers stay in [0, 1] and each width
        # lies between that draw's nearest and farthest point distance.
        X = np.array([[0.0], [1.0]])
        rng = np.random.default_rng(42)
        for _ in range(1000):
            r = generate_random_rectangle(X, rng)
            center = 0.5 * (r.lower[0] + r.upper[0])
            width = r.upper[0] - r.lower[0]
            assert 0.0 <= center <= 1.0
            d_min = min(abs(center), abs(1.0 - center))
            d_max = max(abs(center), abs(1.0 - center))
            assert d_min - 1e-12 <= width <= d_max + 1e-12

    def test_bounds_ordered(self):
        ds = gen_friedman1(30, 2)
        rng = np.random.default_rng(3)
        for _ in range(200):
            r = generate_random_rectangle(ds, rng)
            assert np.all(r.lower <= r.upper)


class TestRandomCorner:
    def test_one_infinite_side_per_feature(self):
        ds = gen_friedman1(20, 1)
        rng = np.random.default_rng(0)
        for _ in range(200):
            r = generate_random_corner(ds, rng)
            assert r.kind == KIND_CORNER
            one_sided = np.isneginf(r.lower) ^ np.isposinf(r.upper)
            assert one_sided.all()

    def test_side_coin_is_fair(self):
        ds = gen_friedman1(50, 3)
        rng = np.random.default_rng(123)
        ups = np.zeros(ds.n_features)
        n = 1000
        for _ in range(n):
            r = generate_random_corner(ds, rng)
            ups += np.isposinf(r.upper)
        freq = ups / n
        assert np.all(freq >= 0.45) and np.all(freq <= 0.55)

    def test_seeded_determinism(self):
        ds = gen_friedman1(20, 1)
        a = generate_random_corner(ds, np.random.default_rng(2))
        b = generate_random_corner(ds, np.random.default_rng(2))
        np.testing.assert_array_equal(a.lower, b.lower)
        np.testing.assert_array_equal(a.upper, b.upper)


class TestGenerateBatch:
    def test_single_draw_matches_single_generator(self):
        # active_prob=1 consumes the stream exactly like the literal
        # single-box generators.
        ds = gen_friedman1(20, 1)
        for kind, single in (
            (KIND_CLOSED, generate_random_rectangle),
            (KIND_CORNER, generate_random_corner),
        ):
            lower, upper = generate_batch(
                ds, kind, 1, np.random.default_rng(9), active_prob=1.0
            )
            ref = single(ds, np.random.default_rng(9))
            np.testing.assert_array_equal(lower[0], ref.lower)
            np.testing.assert_array_equal(upper[0], ref.upper)

    def test_low_dim_default_is_literal(self):
        # d <= 2 implies every feature active by default.
        X = np.random.default_rng(0).uniform(size=(30, 2))
        lower, upper = generate_batch(X, KIND_CORNER, 1, np.random.default_rng(4))
        ref = generate_random_corner(X, np.random.default_rng(4))
        np.testing.assert_array_equal(lower[0], ref.lower)
        np.testing.assert_array_equal(upper[0], ref.upper)

    def test_slack_features_cover_all_rows(self):
        # With few active features most rows pass the slack features, so
        # candidate coverage stays usable in higher dimension.
        ds = gen_friedman1(100, 0)
        lower, upper = generate_batch(
            ds, KIND_CORNER, 500, np.random.default_rng(1), active_prob=0.2
        )
        active = np.isfinite(np.where(np.isneginf(lower), upper, lower))
        thresholds_inside = (
            (lower >= ds.features.min(axis=0)) & (lower <= ds.features.max(axis=0))
        ) | ((upper >= ds.features.min(axis=0)) & (upper <= ds.features.max(axis=0)))
        frac_constrained = thresholds_inside.mean()
        assert 0.1 < frac_constrained < 0.3
        assert active.all()  # corner shape: one finite threshold per feature

    def test_corner_batch_keeps_invariant(self):
        ds = gen_friedman1(40, 2)
        lower, upper = generate_batch(ds, KIND_CORNER, 64, np.random.default_rng(8))
        one_sided = np.isneginf(lower) ^ np.isposinf(upper)
        assert one_sided.all()

    def test_rejects_bad_prob(self):
        ds = gen_friedman1(5, 0)
        with pytest.raises(ValueError):
            generate_batch(ds, KIND_CORNER, 1, np.random.default_rng(0), active_prob=0.0)
