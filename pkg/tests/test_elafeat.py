import math
import statistics

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from fitscape.elafeat import (
    DISP_NAMES,
    FEATURE_NAMES,
    IC_NAMES,
    N_FEATURES,
    NBC_NAMES,
    PCA_NAMES,
    best_subset_size,
    count_peaks,
    dispersion,
    ela_distr,
    ela_meta,
    entropy_of_changes,
    fdc,
    feature_vector,
    info_content,
    nbc,
    nearest_better,
    nearest_neighbour_tour,
    partial_information,
    pca_misc,
    read_features_csv,
    symbol_strings,
    write_features_csv,
)
from fitscape.errors import SampleTooSmall
from fitscape.problems import make_problem
from fitscape.sampling import draw_sample


def dist_ref(a, b):
    acc = 0.0
    for u, v in zip(a, b):
        acc += (u - v) * (u - v)
    return math.sqrt(acc)


def nb_ref(X, y):
    """Exhaustive nearest-neighbour / nearest-better search."""
    n = len(X)
    nn, nb, nb_idx = [], [], []
    for i in range(n):
        nn.append(min(dist_ref(X[i], X[j]) for j in range(n) if j != i))
        better = [(dist_ref(X[i], X[j]), j) for j in range(n) if y[j] < y[i]]
        if better:
            d, j = min(better)
            nb.append(d)
            nb_idx.append(j)
        else:
            nb.append(None)
            nb_idx.append(-1)
    indeg = [sum(1 for j in nb_idx if j == i) for i in range(n)]
    return nn, nb, nb_idx, indeg


def pearson_ref(a, b):
    if len(set(a)) < 2 or len(set(b)) < 2:
        return math.nan
    return statistics.correlation(a, b)


def div_ref(a, b):
    return math.nan if b == 0 or math.isnan(a) or math.isnan(b) else a / b


def nbc_ref(X, y):
    nn, nb, nb_idx, indeg = nb_ref(X, y)
    pairs = [(a, b) for a, b in zip(nn, nb) if b is not None]
    nn_h = [a for a, _ in pairs]
    nb_h = [b for _, b in pairs]
    ratios = [b / a for a, b in pairs]
    return [
        div_ref(statistics.stdev(nn_h), statistics.stdev(nb_h)),
        div_ref(statistics.fmean(nn_h), statistics.fmean(nb_h)),
        pearson_ref(nn_h, nb_h),
        div_ref(statistics.stdev(ratios), statistics.fmean(ratios)),
        pearson_ref(list(y), indeg),
    ]


def dispersion_ref(X, y):
    n = len(X)
    full = [dist_ref(X[i], X[j]) for i in range(n) for j in range(i + 1, n)]
    out = []
    for q in (2, 5, 10, 25):
        size = math.ceil(q * n / 100)
        if size < 2:
            out += [math.nan] * 4
            continue
        best = sorted(range(n), key=lambda i: (y[i], i))[:size]
        sub = [dist_ref(X[best[a]], X[best[b]]) for a in range(size) for b in range(a + 1, size)]
        m, md = statistics.fmean(sub), statistics.median(sub)
        fm, fmd = statistics.fmean(full), statistics.median(full)
        out += [div_ref(m, fm), div_ref(md, fmd), m - fm, md - fmd]
    return out


def assert_same(a, b, rel=1e-12):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    np.testing.assert_array_equal(np.isnan(a), np.isnan(b))
    ok = ~np.isnan(a)
    np.testing.assert_allclose(a[ok], b[ok], rtol=rel, atol=1e-13)


def small_cases(count, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(4, 31))
        d = int(rng.integers(1, 5))
        X = rng.uniform(-5, 5, (n, d))
        if rng.random() < 0.3:
            X = np.round(X)  # ties in distance
        y = rng.normal(size=n)
        if rng.random() < 0.3:
            y = np.round(y)  # ties in fitness
        yield X, y


class TestNbcOracle:
    def test_graph_matches_exhaustive_search(self):
        for X, y in small_cases(150, 1):
            g = nearest_better(X, y)
            nn, nb, nb_idx, indeg = nb_ref(X.tolist(), y.tolist())
            assert g.nn_dist.tolist() == nn
            assert g.nb_index.tolist() == nb_idx
            assert [None if math.isnan(v) else v for v in g.nb_dist.tolist()] == nb
            assert g.indegree.tolist() == indeg

    def test_features_match_reference(self):
        for X, y in small_cases(150, 2):
            nn, nb, _, _ = nb_ref(X.tolist(), y.tolist())
            # reference needs two distinct non-root points with positive nn distance
            kept = [a for a, b in zip(nn, nb) if b is not None]
            if len(kept) < 2 or min(kept) == 0:
                continue
            assert_same(nbc(X, y), nbc_ref(X.tolist(), y.tolist()), rel=1e-10)

    def test_constant_y(self):
        X = np.random.default_rng(0).random((10, 2))
        assert np.all(np.isnan(nbc(X, np.ones(10))))

    def test_too_small(self):
        with pytest.raises(SampleTooSmall):
            nbc(np.zeros((2, 2)), np.zeros(2))


class TestDispersionOracle:
    def test_matches_reference(self):
        for X, y in small_cases(150, 3):
            assert_same(dispersion(X, y), dispersion_ref(X.tolist(), y.tolist()))

    @pytest.mark.parametrize("n, pct, size", [(100, 2, 2), (100, 5, 5), (30, 5, 2), (10, 2, 1), (10, 25, 3), (250, 10, 25)])
    def test_subset_size(self, n, pct, size):
        assert best_subset_size(n, pct) == size

    def test_unit_square_best_corner(self):
        # best 25 % of a 2x2 grid is one point: Missing for every 2% / 5% / 10% / 25% block
        X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
        out = dispersion(X, np.array([0.0, 1.0, 2.0, 3.0]))
        assert np.all(np.isnan(out))
        assert len(out) == len(DISP_NAMES) == 16


class TestInformationContent:
    def test_constant(self):
        X = np.arange(10, dtype=float)[:, None]
        h_max, eps_s, eps_max, m0, eps_ratio = info_content(X, np.zeros(10))
        assert h_max == 0.0 and m0 == 0.0
        assert math.isnan(eps_ratio)

    def test_monotone(self):
        n = 12
        X = np.arange(n, dtype=float)[:, None]
        y = np.cumsum(np.arange(1, n + 1, dtype=float))
        np.testing.assert_array_equal(nearest_neighbour_tour(X), np.arange(n))
        symbols = symbol_strings(np.diff(y), np.array([0.5]))
        assert np.all(symbols == 1)
        assert entropy_of_changes(symbols)[0] == 0.0
        assert partial_information(symbols)[0] == pytest.approx(1 / (n - 1))

    def test_alternating(self):
        slopes = np.array([1.0, -1.0] * 5)
        symbols = symbol_strings(slopes, np.array([0.5]))
        np.testing.assert_array_equal(symbols[0], [1, -1] * 5)
        # 9 adjacent pairs: (1,-1) five times, (-1,1) four times
        p1, p2 = 5 / 9, 4 / 9
        expected = -(p1 * math.log(p1, 6) + p2 * math.log(p2, 6))
        assert entropy_of_changes(symbols)[0] == pytest.approx(expected, rel=1e-14)
        assert partial_information(symbols)[0] == 1.0

    def test_epsilon_above_slopes_is_flat(self):
        symbols = symbol_strings(np.array([0.3, -0.2, 0.1]), np.array([1.0]))
        assert np.all(symbols == 0)

    def test_tour_ties_by_index(self):
        X = np.array([[0.0], [1.0], [-1.0], [2.0]])
        np.testing.assert_array_equal(nearest_neighbour_tour(X), [0, 1, 3, 2])

    def test_output_names(self):
        s = draw_sample(make_problem("F3", 2, 1), 200, seed=1)
        out = info_content(s)
        assert len(out) == len(IC_NAMES)
        assert 0 <= out[0] <= 1


class TestFdc:
    def test_hand_value(self):
        out = fdc(np.array([[0.0], [1.0], [2.0]]), np.array([0.0, 1.0, 4.0]))
        assert out[0] == pytest.approx(0.9608, abs=5e-5)
        assert out[0] == pytest.approx(statistics.correlation([0, 1, 2], [0, 1, 4]), rel=1e-12)
        assert out[1] == pytest.approx(1.0) and out[3] == 2.0
        assert out[4] == pytest.approx(5 / 3)

    def test_linear(self):
        X = np.random.default_rng(4).random((30, 3))
        b = np.zeros(3)
        X[0] = b
        d = np.linalg.norm(X - b, axis=1)
        assert fdc(X, 2.5 * d)[0] == pytest.approx(1.0, abs=1e-12)

    def test_two_points_rejected(self):
        with pytest.raises(SampleTooSmall):
            fdc(np.zeros((2, 1)), np.array([0.0, 1.0]))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.01, 100), st.floats(-100, 100))
    def test_affine_invariance(self, seed, a, c):
        rng = np.random.default_rng(seed)
        X = rng.random((25, 2))
        y = rng.normal(size=25)
        assert fdc(X, a * y + c)[0] == pytest.approx(fdc(X, y)[0], abs=1e-9)


class TestMetaAndDistr:
    def test_exact_linear(self):
        X = np.random.default_rng(7).uniform(-5, 5, (50, 2))
        y = 2 * X[:, 0] - 3 * X[:, 1] + 5
        out = ela_meta(X, y)
        assert out[0] == pytest.approx(1.0)
        assert out[1] == pytest.approx(5.0)
        assert out[2] == pytest.approx(2 / 3)
        assert out[3] == pytest.approx(2.0) and out[4] == pytest.approx(3.0)

    def test_moments_against_scipy(self):
        y = np.random.default_rng(8).gamma(2.0, size=300)
        skew, kurt, peaks = ela_distr(np.zeros((300, 1)), y)
        assert skew == pytest.approx(scipy.stats.skew(y), rel=1e-10)
        assert kurt == pytest.approx(scipy.stats.kurtosis(y), rel=1e-10)
        assert peaks >= 1

    def test_bimodal_peaks(self):
        rng = np.random.default_rng(9)
        y = np.concatenate([rng.normal(0, 0.3, 500), rng.normal(10, 0.3, 500)])
        assert count_peaks(y) == 2


class TestPcaMisc:
    def test_isotropic(self):
        X = np.random.default_rng(1).normal(size=(2000, 5))
        out = pca_misc(X, np.random.default_rng(2).normal(size=2000))
        assert out[0] > 0.8

    def test_dominant_direction(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(1000, 4)) * np.array([10.0, 1.0, 1.0, 1.0])
        assert pca_misc(X, rng.normal(size=1000))[4] > 0.9

    def test_dim_passthrough(self):
        s = draw_sample(make_problem("F1", 10, 1), 200, seed=0)
        out = pca_misc(s)
        assert len(out) == len(PCA_NAMES) and out[-1] == 10


class TestFeatureVector:
    def test_arity_and_order(self):
        s = draw_sample(make_problem("F20", 2, 3), 500, seed=5)
        fv = feature_vector(s)
        assert len(fv) == N_FEATURES == 53
        assert fv.names == FEATURE_NAMES
        assert len(set(FEATURE_NAMES)) == 53

    def test_deterministic_and_missing_reproducible(self):
        s = draw_sample(make_problem("F8", 3, 1), 750, seed=2)
        a, b = feature_vector(s), feature_vector(s)
        np.testing.assert_array_equal(a.missing, b.missing)
        np.testing.assert_array_equal(a.values[~a.missing], b.values[~b.missing])

    def test_constant_fitness_routing(self):
        X = np.random.default_rng(0).uniform(-5, 5, (100, 3))
        fv = feature_vector(X, np.full(100, 7.0)).as_dict()
        assert math.isnan(fv["distr.skewness"]) and math.isnan(fv["distr.kurtosis"])
        assert all(math.isnan(fv[k]) for k in NBC_NAMES)
        assert math.isnan(fv["ic.eps_ratio"])
        assert fv["ic.h_max"] == 0.0
        assert not math.isnan(fv["pca.expl_var.cov_x"]) and fv["basic.dim"] == 3

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 4))
    def test_translation_invariance(self, seed, d):
        rng = np.random.default_rng(seed)
        X = rng.uniform(-5, 5, (40, d))
        y = rng.normal(size=40)
        shift = rng.uniform(-3, 3, d)
        for fn in (nbc, dispersion):
            assert_same(fn(X + shift, y), fn(X, y), rel=1e-9)
        assert_same(fdc(X + shift, y)[:4], fdc(X, y)[:4], rel=1e-9)
        a, b = pca_misc(X + shift, y), pca_misc(X, y)
        assert_same(a[[0, 2, 4, 6]], b[[0, 2, 4, 6]], rel=1e-9)

    def test_csv_roundtrip(self, tmp_path):
        s = draw_sample(make_problem("F8", 3, 1), 750, seed=2)
        fv = feature_vector(s)
        fv.values[5] = np.nan
        path = write_features_csv(tmp_path / "f.csv", [fv], ("function_id", "dim"), [("F8", 3)])
        lines = path.read_text().splitlines()
        assert lines[0].split(",")[:3] == ["function_id", "dim", FEATURE_NAMES[0]]
        assert lines[1].split(",")[2 + 5] == ""
        names, keys, values = read_features_csv(path, 2)
        assert names == FEATURE_NAMES and keys == [("F8", "3")]
        assert_same(values[0], fv.values, rel=0)
