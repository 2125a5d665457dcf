"""Fitness clouds: per-point kNN embeddings for point-cloud models.

Each point is concatenated with its k-1 nearest neighbours (coordinates and
normalised fitness), with coordinates zero-padded to ``d_max`` and a validity
indicator marking the real dimensions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from fitscape.errors import (
    DimensionMismatch,
    DimensionTooLarge,
    InvalidNorm,
    NeighborhoodTooLarge,
)
from fitscape.sampling import normalize_design, normalize_fitness

D_MAX = 10
CLOUD_SIZES = (100, 500)


def parse_norm(p) -> float:
    if isinstance(p, str):
        key = p.strip().lower()
        if key in ("inf", "infinity", "max", "linf"):
            return math.inf
        try:
            p = float(key)
        except ValueError:
            raise InvalidNorm(f"unsupported norm {p!r}") from None
    p = float(p)
    if p not in (1.0, 2.0, math.inf):
        raise InvalidNorm(f"p must be 1, 2 or inf, got {p}")
    return p


@dataclass(frozen=True)
class CloudConfig:
    k: int = 3
    p: float = math.inf
    delta_max: float = 1.5
    d_max: int = D_MAX

    def __post_init__(self):
        object.__setattr__(self, "p", parse_norm(self.p))
        if self.k < 1:
            raise ValueError("k must be positive")
        if not self.delta_max > 0:
            raise ValueError("delta_max must be positive")

    @property
    def width(self) -> int:
        return embedding_width(self.k, self.d_max)


def embedding_width(k: int, d_max: int = D_MAX) -> int:
    return k * (d_max + 1) + d_max


@dataclass(frozen=True, eq=False)
class CloudEmbedding:
    embedded: np.ndarray   # (n, k*(d_max+1) + d_max)
    indicator: np.ndarray  # (d_max,) of 0/1
    config: CloudConfig

    @property
    def n_points(self) -> int:
        return self.embedded.shape[0]


def pairwise_lp(A: np.ndarray, B: np.ndarray, p: float) -> np.ndarray:
    """All-pairs Lp distances; coordinates are accumulated in axis order."""
    acc = np.zeros((A.shape[0], B.shape[0]))
    for j in range(A.shape[1]):
        diff = np.abs(A[:, j, None] - B[None, :, j])
        if p == math.inf:
            np.maximum(acc, diff, out=acc)
        elif p == 1.0:
            acc += diff
        else:
            acc += diff * diff
    return np.sqrt(acc) if p == 2.0 else acc


def knn_graph(X_hat, k: int, p=math.inf, delta_max: float = 1.5,
              return_distances: bool = False, block: int = 256):
    """Neighbour indices with distance clamping.

    Row i starts with i itself, followed by the other points by increasing
    Lp distance (ties towards the lower index).  Scanning left to right, any
    neighbour farther than ``delta_max`` is replaced by the entry before it,
    so an over-limit tail collapses onto the last accepted neighbour.
    """
    X_hat = np.asarray(X_hat, dtype=float)
    if X_hat.ndim == 1:
        X_hat = X_hat[:, None]
    n = X_hat.shape[0]
    p = parse_norm(p)
    if k > n:
        raise NeighborhoodTooLarge(f"k={k} exceeds the number of points n={n}")
    if k < 1:
        raise ValueError("k must be positive")

    idx = np.empty((n, k), dtype=np.int64)
    dist = np.empty((n, k))
    ar = np.arange(n)
    for start in range(0, n, block):
        stop = min(start + block, n)
        D = pairwise_lp(X_hat[start:stop], X_hat, p)
        rows = np.arange(stop - start)
        # self first regardless of duplicates: push it below every real distance
        D[rows, ar[start:stop]] = -1.0
        order = np.argsort(D, axis=1, kind="stable")[:, :k]
        idx[start:stop] = order
        dist[start:stop] = np.take_along_axis(D, order, axis=1)
    dist[:, 0] = 0.0

    for t in range(1, k):
        far = dist[:, t] > delta_max
        idx[far, t] = idx[far, t - 1]
        dist[far, t] = dist[far, t - 1]
    if return_distances:
        return idx, dist
    return idx


def pad_coordinates(X_hat: np.ndarray, d_max: int = D_MAX) -> np.ndarray:
    n, d = X_hat.shape
    if d > d_max:
        raise DimensionTooLarge(f"d={d} exceeds d_max={d_max}")
    out = np.zeros((n, d_max))
    out[:, :d] = X_hat
    return out


def embed_cloud(X, y, config: CloudConfig | None = None, bounds=None) -> CloudEmbedding:
    """Embed a sample as an n x (k*(d_max+1) + d_max) matrix.

    ``bounds`` defaults to [-5, 5] per coordinate.
    """
    config = config or CloudConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch("X must be an n x d matrix")
    if y.shape != (X.shape[0],):
        raise DimensionMismatch("one fitness value per row is required")
    n, d = X.shape
    if d > config.d_max:
        raise DimensionTooLarge(f"d={d} exceeds d_max={config.d_max}")
    if bounds is None:
        bounds = (np.full(d, -5.0), np.full(d, 5.0))

    coords = pad_coordinates(normalize_design(X, bounds), config.d_max)
    y_hat = normalize_fitness(y)
    neighbours = knn_graph(coords, config.k, config.p, config.delta_max)

    indicator = np.zeros(config.d_max)
    indicator[:d] = 1.0
    blocks = []
    for t in range(config.k):
        j = neighbours[:, t]
        blocks.append(coords[j])
        blocks.append(y_hat[j][:, None])
    blocks.append(np.broadcast_to(indicator, (n, config.d_max)))
    embedded = np.concatenate(blocks, axis=1)
    return CloudEmbedding(embedded, indicator, config)


def write_cloud(emb: CloudEmbedding, path, problem_ref=None, seed=None) -> Path:
    """Raw float32 row-major matrix at ``path`` plus ``<path>.json`` sidecar."""
    path = Path(path)
    path.write_bytes(emb.embedded.astype(np.float32).tobytes(order="C"))
    cfg = emb.config
    sidecar = {
        "n": emb.n_points,
        "k": cfg.k,
        "p": "inf" if cfg.p == math.inf else cfg.p,
        "delta_max": cfg.delta_max,
        "d_max": cfg.d_max,
        "width": emb.embedded.shape[1],
        "dtype": "float32",
        "problem_ref": list(problem_ref) if problem_ref is not None else None,
        "seed": seed,
    }
    path.with_name(path.name + ".json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_cloud(path) -> np.ndarray:
    path = Path(path)
    meta = json.loads(path.with_name(path.name + ".json").read_text(encoding="utf-8"))
    return np.fromfile(path, dtype=np.float32).reshape(meta["n"], meta["width"])
