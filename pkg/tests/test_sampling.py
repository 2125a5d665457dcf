import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fitscape.errors import InvalidBounds, NonFiniteInput, SampleTooSmall
from fitscape.problems import make_problem
from fitscape.sampling import (
    EPSILON,
    denormalize_design,
    draw_sample,
    lhs_sample,
    normalize_design,
    normalize_fitness,
)

finite_vectors = arrays(np.float64, st.integers(1, 40),
                        elements=st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False))


def strata_counts(X, lo, hi):
    n = X.shape[0]
    idx = np.minimum(np.floor((X - lo) / (hi - lo) * n).astype(int), n - 1)
    return np.stack([np.bincount(idx[:, j], minlength=n) for j in range(X.shape[1])], axis=1)


class TestLhs:
    def test_four_point_strata(self):
        X = lhs_sample(4, 2, (0.0, 1.0), seed=5)
        for j in range(2):
            bins = sorted(np.floor(X[:, j] * 4).astype(int))
            assert bins == [0, 1, 2, 3]

    def test_deterministic(self):
        a = lhs_sample(100, 5, (-5, 5), seed=9)
        np.testing.assert_array_equal(a, lhs_sample(100, 5, (-5, 5), seed=9))

    def test_seed_changes_design(self):
        assert np.any(lhs_sample(100, 5, (-5, 5), 9) != lhs_sample(100, 5, (-5, 5), 10))

    def test_inside_bounds(self):
        X = lhs_sample(500, 3, ([-1, 0, 2], [1, 4, 3]), seed=1)
        assert np.all(X >= [-1, 0, 2]) and np.all(X <= [1, 4, 3])

    def test_marginal_uniformity_over_seeds(self):
        for seed in range(1000):
            X = lhs_sample(10, 3, (-5.0, 5.0), seed)
            assert np.all(strata_counts(X, -5.0, 5.0) == 1)

    def test_too_small(self):
        with pytest.raises(SampleTooSmall):
            lhs_sample(1, 2)

    def test_bad_bounds(self):
        with pytest.raises(InvalidBounds):
            lhs_sample(10, 2, (1.0, 1.0))


class TestDrawSample:
    def test_sphere_nonnegative(self):
        s = draw_sample(make_problem("F1", 3, 0), 100, seed=4)
        assert np.all(s.y >= 0)

    def test_shape(self):
        s = draw_sample(make_problem("F16", 4, 2), 500, seed=1)
        assert s.X.shape == (500, 4) and s.y.shape == (500,)

    def test_matches_lhs(self):
        p = make_problem("F3", 2, 6)
        s = draw_sample(p, 50, seed=8)
        np.testing.assert_array_equal(s.X, lhs_sample(50, 2, p.bounds, 8))

    def test_min_shrinks_with_n(self):
        p = make_problem("F1", 2, 0)
        small = np.mean([draw_sample(p, 100, s).y.min() for s in range(20)])
        large = np.mean([draw_sample(p, 1000, s).y.min() for s in range(20)])
        assert large < small


class TestNormalizeDesign:
    def test_lower_bound_maps_to_zero(self):
        np.testing.assert_array_equal(normalize_design([[-5.0, -5.0]], (-5, 5)), [[0.0, 0.0]])

    def test_upper_bound(self):
        out = normalize_design([[5.0, 5.0]], (-5, 5))
        np.testing.assert_allclose(out, 10 / (10 + 1e-8), rtol=0, atol=1e-15)

    def test_midpoint(self):
        assert normalize_design([[0.5]], (0, 1))[0, 0] == pytest.approx(0.5 / (1 + 1e-8), abs=1e-16)

    def test_invalid_bounds(self):
        with pytest.raises(InvalidBounds):
            normalize_design([[0.0]], (1.0, 0.0))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 50), st.integers(1, 6))
    def test_range_and_roundtrip(self, seed, n, d):
        X = lhs_sample(n, d, (-5, 5), seed)
        Xh = normalize_design(X, (-5, 5))
        assert np.all((Xh >= 0) & (Xh <= 1))
        np.testing.assert_allclose(denormalize_design(Xh, (-5, 5)), X, atol=1e-6, rtol=0)


class TestNormalizeFitness:
    def test_constant(self):
        np.testing.assert_array_equal(normalize_fitness([3.0, 3.0, 3.0]), [0.0, 0.0, 0.0])

    def test_two_points(self):
        out = normalize_fitness([0.0, 1.0])
        assert out[0] == 0.0
        assert out[1] == pytest.approx(math.log(2) / (math.log(2) + 1e-8), abs=1e-15)

    def test_hand_value(self):
        # ln(1 + (e - 1)) = 1 in the denominator
        out = normalize_fitness([0.0, 1.0, math.e - 1])
        assert out[1] == pytest.approx(math.log(2) / (1 + EPSILON), abs=1e-12)

    def test_non_finite(self):
        with pytest.raises(NonFiniteInput):
            normalize_fitness([0.0, np.inf])

    @settings(max_examples=200, deadline=None)
    @given(finite_vectors, st.floats(-1e3, 1e3))
    def test_shift_invariance(self, y, c):
        np.testing.assert_allclose(normalize_fitness(y + c), normalize_fitness(y), atol=1e-9, rtol=0)

    @settings(max_examples=200, deadline=None)
    @given(finite_vectors)
    def test_monotone_and_range(self, y):
        yh = normalize_fitness(y)
        assert np.all((yh >= 0) & (yh <= 1))
        order = np.argsort(y, kind="stable")
        assert np.all(np.diff(yh[order]) >= 0)
        assert np.all(yh[y == y.min()] == 0)
