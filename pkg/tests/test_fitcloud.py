import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fitscape.errors import DimensionTooLarge, InvalidNorm, NeighborhoodTooLarge
from fitscape.fitcloud import (
    CloudConfig,
    embed_cloud,
    embedding_width,
    knn_graph,
    pad_coordinates,
    parse_norm,
    read_cloud,
    write_cloud,
)
from fitscape.problems import make_problem
from fitscape.sampling import draw_sample, normalize_design, normalize_fitness

NORMS = [1.0, 2.0, math.inf]


def lp_ref(a, b, p):
    acc = 0.0
    for u, v in zip(a, b):
        t = abs(u - v)
        if p == math.inf:
            acc = max(acc, t)
        elif p == 1.0:
            acc += t
        else:
            acc += t * t
    return math.sqrt(acc) if p == 2.0 else acc


def knn_ref(X, k, p, delta_max):
    """All-pairs sort per point; then the left-to-right clamping scan."""
    X = [list(map(float, row)) for row in X]
    n = len(X)
    out = []
    for i in range(n):
        others = sorted((lp_ref(X[i], X[j], p), j) for j in range(n) if j != i)
        row = [(0.0, i)] + others[: k - 1]
        for t in range(1, k):
            if row[t][0] > delta_max:
                row[t] = row[t - 1]
        out.append([j for _, j in row])
    return np.array(out)


def random_instance(rng):
    n = int(rng.integers(2, 51))
    d = int(rng.integers(1, 6))
    kind = rng.integers(3)
    if kind == 0:
        X = rng.random((n, d))
    elif kind == 1:
        # coarse grid: many exact distance ties and duplicate points
        X = rng.integers(0, 3, (n, d)) / 2.0
    else:
        X = rng.random((n, d)) * 0.1
    k = int(rng.integers(1, n + 1))
    delta = float(rng.choice([0.05, 0.2, 0.5, 1.5, 10.0]))
    return X, k, delta


class TestKnnOracle:
    @pytest.mark.parametrize("p", NORMS)
    def test_two_hundred_instances(self, p):
        rng = np.random.default_rng(1234)
        for _ in range(200):
            X, k, delta = random_instance(rng)
            np.testing.assert_array_equal(knn_graph(X, k, p, delta), knn_ref(X, k, p, delta))

    @pytest.mark.parametrize("p", NORMS)
    def test_block_size_irrelevant(self, p):
        X = np.random.default_rng(5).random((300, 3))
        a = knn_graph(X, 7, p, 0.3, block=256)
        b = knn_graph(X, 7, p, 0.3, block=13)
        np.testing.assert_array_equal(a, b)

    def test_clamp_at_boundary_is_kept(self):
        # distance exactly equal to delta_max is accepted
        X = np.array([[0.0], [0.5], [1.0]])
        np.testing.assert_array_equal(knn_graph(X, 3, 1, 0.5)[0], [0, 1, 1])

    def test_all_clamped_collapses_to_self(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
        np.testing.assert_array_equal(knn_graph(X, 3, 2, 0.1), [[0, 0, 0], [1, 1, 1], [2, 2, 2]])

    def test_chain_clamp(self):
        # second neighbour too far, third neighbour copies the second slot
        X = np.array([[0.0], [0.1], [0.9], [0.95]])
        np.testing.assert_array_equal(knn_graph(X, 4, math.inf, 0.5)[0], [0, 1, 1, 1])

    def test_duplicates_self_first(self):
        X = np.zeros((4, 2))
        np.testing.assert_array_equal(knn_graph(X, 4, 2, 1.0)[2], [2, 0, 1, 3])

    def test_k_too_large(self):
        with pytest.raises(NeighborhoodTooLarge):
            knn_graph(np.zeros((3, 2)), 4)

    def test_norm_parsing(self):
        assert parse_norm("inf") == math.inf
        assert parse_norm(2) == 2.0
        with pytest.raises(InvalidNorm):
            parse_norm(3)
        with pytest.raises(InvalidNorm):
            parse_norm("euclid")


class TestEmbedding:
    @pytest.mark.parametrize("k, width", [(3, 43), (5, 65), (1, 21)])
    def test_width(self, k, width):
        assert embedding_width(k) == width
        s = draw_sample(make_problem("F24", 4, 1), 100, seed=3)
        emb = embed_cloud(s.X, s.y, CloudConfig(k=k), s.bounds)
        assert emb.embedded.shape == (100, width)

    def test_layout(self):
        s = draw_sample(make_problem("F20", 3, 2), 60, seed=8)
        cfg = CloudConfig(k=3, p=2, delta_max=0.4)
        emb = embed_cloud(s.X, s.y, cfg, s.bounds)
        Xh = pad_coordinates(normalize_design(s.X, s.bounds))
        yh = normalize_fitness(s.y)
        nn = knn_ref(Xh, 3, 2.0, 0.4)
        for i in range(60):
            row = emb.embedded[i]
            for t in range(3):
                block = row[t * 11:(t + 1) * 11]
                np.testing.assert_array_equal(block[:10], Xh[nn[i, t]])
                assert block[10] == yh[nn[i, t]]
            np.testing.assert_array_equal(row[33:], [1, 1, 1, 0, 0, 0, 0, 0, 0, 0])
        np.testing.assert_array_equal(emb.indicator, [1, 1, 1] + [0] * 7)

    def test_padding_zero_and_first_block_is_self(self):
        s = draw_sample(make_problem("F1", 2, 1), 100, seed=0)
        emb = embed_cloud(s.X, s.y, bounds=s.bounds)
        E = emb.embedded
        assert np.all(E[:, 2:10] == 0)
        np.testing.assert_array_equal(E[:, :2], normalize_design(s.X, s.bounds))

    def test_dimension_too_large(self):
        with pytest.raises(DimensionTooLarge):
            embed_cloud(np.zeros((5, 11)), np.zeros(5))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31), st.integers(2, 10), st.integers(1, 6), st.sampled_from(NORMS))
    def test_properties(self, seed, d, k, p):
        rng = np.random.default_rng(seed)
        X = rng.uniform(-5, 5, (40, d))
        y = rng.normal(size=40)
        emb = embed_cloud(X, y, CloudConfig(k=k, p=p))
        E = emb.embedded
        assert E.shape == (40, k * 11 + 10)
        assert np.all((E >= 0) & (E <= 1))
        np.testing.assert_array_equal(E[:, -10:].sum(axis=1), d)

    def test_roundtrip(self, tmp_path):
        s = draw_sample(make_problem("F16", 3, 1), 100, seed=2)
        emb = embed_cloud(s.X, s.y, CloudConfig(k=5), s.bounds)
        path = write_cloud(emb, tmp_path / "c.f32", ("F16", 3, 1, 1), "2")
        back = read_cloud(path)
        np.testing.assert_array_equal(back, emb.embedded.astype(np.float32))
        meta = json.loads((tmp_path / "c.f32.json").read_text())
        assert meta["width"] == 65 and meta["p"] == "inf"
