"""Latin Hypercube sampling and the design/fitness normalisations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fitscape.errors import InvalidBounds, NonFiniteInput, SampleTooSmall
from fitscape.problems import ProblemInstance, evaluate_batch

EPSILON = 1e-8


@dataclass(frozen=True, eq=False)
class Sample:
    X: np.ndarray
    y: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    seed: int
    # (function_id, dim, instance_id, repetition); repetition is None outside datasets
    problem_ref: tuple

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.lower, self.upper


def _as_bounds(bounds, dim: int) -> tuple[np.ndarray, np.ndarray]:
    lower, upper = bounds
    lo = np.broadcast_to(np.asarray(lower, dtype=float), (dim,)).astype(float)
    hi = np.broadcast_to(np.asarray(upper, dtype=float), (dim,)).astype(float)
    if not np.all(lo < hi):
        raise InvalidBounds("every lower bound must be strictly below its upper bound")
    return lo, hi


def lhs_sample(n: int, dim: int, bounds=(-5.0, 5.0), seed: int = 0) -> np.ndarray:
    """Plain Latin Hypercube design.

    Each column holds one point in each of the ``n`` equal-width strata of its
    interval, placed uniformly at random inside the stratum.  Columns are
    permuted independently.
    """
    if n < 2:
        raise SampleTooSmall(f"LHS needs at least 2 points, got {n}")
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    lo, hi = _as_bounds(bounds, dim)
    rng = np.random.default_rng(seed)
    strata = np.stack([rng.permutation(n) for _ in range(dim)], axis=1)
    unit = (strata + rng.random((n, dim))) / n
    X = lo + unit * (hi - lo)
    # u*(hi-lo) may round onto hi; keep strictly inside the stratum's closed range
    return np.clip(X, lo, hi)


def draw_sample(problem: ProblemInstance, n: int, seed: int, repetition=None) -> Sample:
    X = lhs_sample(n, problem.dim, problem.bounds, seed)
    y = evaluate_batch(problem, X)
    ref = (problem.function_id, problem.dim, problem.instance_id, repetition)
    return Sample(X, y, problem.lower.copy(), problem.upper.copy(), int(seed), ref)


def normalize_design(X, bounds) -> np.ndarray:
    """(X - l) / (u - l + eps), column-wise."""
    X = np.asarray(X, dtype=float)
    lo, hi = _as_bounds(bounds, X.shape[-1])
    return (X - lo) / (hi - lo + EPSILON)


def denormalize_design(X_hat, bounds) -> np.ndarray:
    X_hat = np.asarray(X_hat, dtype=float)
    lo, hi = _as_bounds(bounds, X_hat.shape[-1])
    return X_hat * (hi - lo + EPSILON) + lo


def normalize_fitness(y) -> np.ndarray:
    """Log-scaled fitness in [0, 1]; the minimum maps to exactly 0."""
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ValueError("fitness vector is empty")
    if not np.all(np.isfinite(y)):
        raise NonFiniteInput("fitness values must be finite")
    lo = np.min(y)
    return np.log1p(y - lo) / (np.log1p(np.max(y) - lo) + EPSILON)
