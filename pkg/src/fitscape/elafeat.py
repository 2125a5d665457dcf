"""Classical landscape features computed from an evaluated sample.

Seven groups, 53 features in a fixed order:

=========  =====  ==========================================================
group      count  content
=========  =====  ==========================================================
meta           9  linear / quadratic least-squares surrogates
distr          3  skewness, excess kurtosis, histogram peak count of y
nbc            5  nearest-neighbour vs nearest-better-neighbour distances
disp          16  spread of the best 2/5/10/25 % against the whole sample
ic             5  information content along a nearest-neighbour tour
fdc            6  fitness-distance correlation and distance statistics
pca            9  explained variance of PCA on X and [X|y], plus dim
=========  =====  ==========================================================

A feature whose statistic is undefined (zero variance, rank-deficient fit,
...) is ``nan``; nan is the only Missing marker and is never replaced by 0.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

from fitscape.errors import DimensionMismatch, SampleTooSmall

MISSING = float("nan")

META_NAMES = (
    "meta.lin_simple.adj_r2",
    "meta.lin_simple.intercept",
    "meta.lin_simple.coef_min_by_max",
    "meta.lin_simple.coef_min",
    "meta.lin_simple.coef_max",
    "meta.lin_w_interact.adj_r2",
    "meta.quad_simple.adj_r2",
    "meta.quad_simple.cond",
    "meta.quad_w_interact.adj_r2",
)
DISTR_NAMES = ("distr.skewness", "distr.kurtosis", "distr.number_of_peaks")
NBC_NAMES = (
    "nbc.nn_nb_sd_ratio",
    "nbc.nn_nb_mean_ratio",
    "nbc.nn_nb_cor",
    "nbc.dist_ratio_coeff_var",
    "nbc.nb_fitness_cor",
)
DISP_QUANTILES = (2, 5, 10, 25)  # percent
DISP_NAMES = tuple(
    f"disp.{stat}_{q:02d}"
    for q in DISP_QUANTILES
    for stat in ("ratio_mean", "ratio_median", "diff_mean", "diff_median")
)
IC_NAMES = ("ic.h_max", "ic.eps_s", "ic.eps_max", "ic.m0", "ic.eps_ratio")
FDC_NAMES = (
    "fdc.fd_correlation",
    "fdc.dist_mean",
    "fdc.dist_sd",
    "fdc.dist_max",
    "fdc.fitness_gap_mean",
    "fdc.fitness_sd",
)
PCA_NAMES = (
    "pca.expl_var.cov_x",
    "pca.expl_var.cor_x",
    "pca.expl_var.cov_init",
    "pca.expl_var.cor_init",
    "pca.expl_var_pc1.cov_x",
    "pca.expl_var_pc1.cor_x",
    "pca.expl_var_pc1.cov_init",
    "pca.expl_var_pc1.cor_init",
    "basic.dim",
)
GROUPS = (
    ("meta", META_NAMES),
    ("distr", DISTR_NAMES),
    ("nbc", NBC_NAMES),
    ("disp", DISP_NAMES),
    ("ic", IC_NAMES),
    ("fdc", FDC_NAMES),
    ("pca", PCA_NAMES),
)
FEATURE_NAMES = tuple(name for _, names in GROUPS for name in names)
N_FEATURES = len(FEATURE_NAMES)

IC_SETTLING_THRESHOLD = 0.05
DEFAULT_EPS_GRID = np.concatenate([[0.0], np.logspace(-5, 5, 200)])


@dataclass(frozen=True, eq=False)
class FeatureVector:
    names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        if len(self.names) != len(self.values):
            raise DimensionMismatch("names and values differ in length")

    def __len__(self):
        return len(self.names)

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))


# --- shared numerics -----------------------------------------------------------


def euclidean(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """All-pairs Euclidean distances, summing squared differences in axis order.

    The fixed summation order makes results independent of array shape, so
    exhaustive reference implementations reproduce them bit for bit.
    """
    acc = np.zeros((A.shape[0], B.shape[0]))
    for j in range(A.shape[1]):
        diff = A[:, j, None] - B[None, :, j]
        acc += diff * diff
    return np.sqrt(acc)


def _sd(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1)) if len(x) > 1 else MISSING


def pearson(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 2:
        return MISSING
    da = a - a.mean()
    db = b - b.mean()
    ssa = float(np.dot(da, da))
    ssb = float(np.dot(db, db))
    if ssa == 0.0 or ssb == 0.0:
        return MISSING
    return float(np.clip(np.dot(da, db) / math.sqrt(ssa * ssb), -1.0, 1.0))


def _ratio(num: float, den: float) -> float:
    if math.isnan(num) or math.isnan(den) or den == 0.0:
        return MISSING
    return num / den


def _xy(sample_or_X, y=None) -> tuple[np.ndarray, np.ndarray]:
    if y is None:
        X, y = sample_or_X.X, sample_or_X.y
    else:
        X = sample_or_X
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if y.shape != (X.shape[0],):
        raise DimensionMismatch("y must hold one value per row of X")
    return X, y


# --- meta model ----------------------------------------------------------------


def _adj_r2(design: np.ndarray, y: np.ndarray):
    """Adjusted R^2 and coefficients of an OLS fit (design includes intercept)."""
    n, cols = design.shape
    dof = n - cols
    if dof <= 0:
        return MISSING, None
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < cols:
        return MISSING, None
    resid = y - design @ coef
    ss_res = float(np.dot(resid, resid))
    centred = y - y.mean()
    ss_tot = float(np.dot(centred, centred))
    if ss_tot == 0.0:
        return MISSING, coef
    r2 = 1.0 - ss_res / ss_tot
    return 1.0 - (1.0 - r2) * (n - 1) / dof, coef


def ela_meta(sample_or_X, y=None) -> np.ndarray:
    X, y = _xy(sample_or_X, y)
    n, d = X.shape
    if n < 2 * d + 2:
        raise SampleTooSmall(f"meta-model features need n >= 2d+2 = {2 * d + 2}")
    ones = np.ones((n, 1))
    pairs = list(combinations(range(d), 2))
    inter = np.column_stack([X[:, i] * X[:, j] for i, j in pairs]) if pairs else np.empty((n, 0))

    lin_r2, lin_coef = _adj_r2(np.hstack([ones, X]), y)
    if lin_coef is not None and not math.isnan(lin_r2):
        slopes = np.abs(lin_coef[1:])
        intercept = float(lin_coef[0])
        cmin, cmax = float(slopes.min()), float(slopes.max())
        cratio = _ratio(cmin, cmax)
    else:
        intercept = cmin = cmax = cratio = MISSING
    lin_int_r2, _ = _adj_r2(np.hstack([ones, X, inter]), y)
    quad_r2, quad_coef = _adj_r2(np.hstack([ones, X, X * X]), y)
    if quad_coef is not None and not math.isnan(quad_r2):
        quad = np.abs(quad_coef[1 + d:])
        cond = _ratio(float(quad.max()), float(quad.min()))
    else:
        cond = MISSING
    quad_int_r2, _ = _adj_r2(np.hstack([ones, X, X * X, inter]), y)
    return np.array([lin_r2, intercept, cratio, cmin, cmax, lin_int_r2, quad_r2, cond, quad_int_r2])


# --- y distribution ------------------------------------------------------------


def count_peaks(y: np.ndarray, bins: int = 32) -> int:
    """Local maxima of a 3-bin moving average of a histogram; plateaus count once."""
    if np.ptp(y) == 0:
        return 1
    hist, _ = np.histogram(y, bins=bins)
    smooth = np.convolve(hist.astype(float), np.ones(3) / 3.0, mode="same")
    keep = np.concatenate([[True], np.diff(smooth) != 0])
    levels = smooth[keep]
    padded = np.concatenate([[-np.inf], levels, [-np.inf]])
    return int(np.sum((padded[1:-1] > padded[:-2]) & (padded[1:-1] > padded[2:])))


def ela_distr(sample_or_X, y=None) -> np.ndarray:
    _, y = _xy(sample_or_X, y)
    if len(y) < 4:
        raise SampleTooSmall("y-distribution features need n >= 4")
    centred = y - y.mean()
    m2 = float(np.mean(centred ** 2))
    if m2 == 0.0:
        return np.array([MISSING, MISSING, 1.0])
    skew = float(np.mean(centred ** 3)) / m2 ** 1.5
    kurt = float(np.mean(centred ** 4)) / m2 ** 2 - 3.0
    return np.array([skew, kurt, float(count_peaks(y))])


# --- nearest better clustering ----------------------------------------------------


@dataclass(frozen=True, eq=False)
class NearestBetter:
    nn_dist: np.ndarray      # (n,)
    nb_dist: np.ndarray      # (n,), nan where no strictly better point exists
    nb_index: np.ndarray     # (n,), -1 where no strictly better point exists
    indegree: np.ndarray     # (n,)


def nearest_better(X: np.ndarray, y: np.ndarray, D: np.ndarray | None = None) -> NearestBetter:
    n = X.shape[0]
    if D is None:
        D = euclidean(X, X)
    off = D.copy()
    np.fill_diagonal(off, np.inf)
    nn = off.min(axis=1)
    better = y[None, :] < y[:, None]
    masked = np.where(better, D, np.inf)
    nb_index = np.argmin(masked, axis=1)
    has = better.any(axis=1)
    nb_dist = np.where(has, masked[np.arange(n), nb_index], np.nan)
    nb_index = np.where(has, nb_index, -1)
    indegree = np.bincount(nb_index[has], minlength=n).astype(float)
    return NearestBetter(nn, nb_dist, nb_index, indegree)


def nbc_from_graph(g: NearestBetter, y: np.ndarray) -> np.ndarray:
    has = g.nb_index >= 0
    nn, nb = g.nn_dist[has], g.nb_dist[has]
    if nn.size == 0:
        return np.array([MISSING] * 4 + [pearson(y, g.indegree)])
    sd_ratio = _ratio(_sd(nn), _sd(nb))
    mean_ratio = _ratio(float(np.mean(nn)), float(np.mean(nb)))
    cor = pearson(nn, nb)
    if np.any(nn == 0):
        cv = MISSING
    else:
        ratios = nb / nn
        cv = _ratio(_sd(ratios), float(np.mean(ratios)))
    return np.array([sd_ratio, mean_ratio, cor, cv, pearson(y, g.indegree)])


def nbc(sample_or_X, y=None, D: np.ndarray | None = None) -> np.ndarray:
    X, y = _xy(sample_or_X, y)
    if X.shape[0] < 3:
        raise SampleTooSmall("nearest-better features need n >= 3")
    return nbc_from_graph(nearest_better(X, y, D), y)


# --- dispersion -------------------------------------------------------------------


def best_subset_size(n: int, percent: int) -> int:
    return -(-percent * n // 100)


def best_indices(y: np.ndarray, size: int) -> np.ndarray:
    return np.argsort(y, kind="stable")[:size]


def dispersion(sample_or_X, y=None, D: np.ndarray | None = None) -> np.ndarray:
    X, y = _xy(sample_or_X, y)
    n = X.shape[0]
    if n < 2:
        raise SampleTooSmall("dispersion needs at least two points")
    if D is None:
        D = euclidean(X, X)
    iu = np.triu_indices(n, k=1)
    full = D[iu]
    full_mean, full_median = float(np.mean(full)), float(np.median(full))
    out = []
    for q in DISP_QUANTILES:
        size = best_subset_size(n, q)
        if size < 2:
            out.extend([MISSING] * 4)
            continue
        idx = best_indices(y, size)
        sub = D[np.ix_(idx, idx)][np.triu_indices(size, k=1)]
        s_mean, s_median = float(np.mean(sub)), float(np.median(sub))
        out.extend([
            _ratio(s_mean, full_mean),
            _ratio(s_median, full_median),
            s_mean - full_mean,
            s_median - full_median,
        ])
    return np.array(out)


# --- information content ----------------------------------------------------------


def nearest_neighbour_tour(X: np.ndarray, D: np.ndarray | None = None) -> np.ndarray:
    """Greedy tour from index 0, always stepping to the nearest unvisited point."""
    n = X.shape[0]
    if D is None:
        D = euclidean(X, X)
    visited = np.zeros(n, dtype=bool)
    tour = np.empty(n, dtype=np.int64)
    current = 0
    for step in range(n):
        tour[step] = current
        visited[current] = True
        if step == n - 1:
            break
        row = np.where(visited, np.inf, D[current])
        current = int(np.argmin(row))
    return tour


def symbol_strings(slopes: np.ndarray, eps_grid: np.ndarray) -> np.ndarray:
    """Rows of symbols in {-1, 0, 1}, one row per epsilon."""
    eps = np.asarray(eps_grid, dtype=float)[:, None]
    return (slopes[None, :] > eps).astype(np.int8) - (slopes[None, :] < -eps).astype(np.int8)


def entropy_of_changes(symbols: np.ndarray) -> np.ndarray:
    """Entropy (base 6) of consecutive unequal symbol pairs, per row."""
    m = symbols.shape[1]
    if m < 2:
        return np.zeros(symbols.shape[0])
    codes = (symbols[:, :-1] + 1) * 3 + (symbols[:, 1:] + 1)
    h = np.zeros(symbols.shape[0])
    for a in (-1, 0, 1):
        for b in (-1, 0, 1):
            if a == b:
                continue
            p = np.count_nonzero(codes == (a + 1) * 3 + (b + 1), axis=1) / (m - 1)
            with np.errstate(divide="ignore", invalid="ignore"):
                h -= np.where(p > 0, p * np.log(p) / np.log(6.0), 0.0)
    return h


def partial_information(symbols: np.ndarray) -> np.ndarray:
    """Length of the zero-free, repeat-free symbol string over the string length."""
    m = symbols.shape[1]
    out = np.empty(symbols.shape[0])
    for r, row in enumerate(symbols):
        nz = row[row != 0]
        mu = 0 if nz.size == 0 else 1 + int(np.count_nonzero(nz[1:] != nz[:-1]))
        out[r] = mu / m
    return out


def tour_slopes(X: np.ndarray, y: np.ndarray, D: np.ndarray | None = None) -> np.ndarray:
    if D is None:
        D = euclidean(X, X)
    tour = nearest_neighbour_tour(X, D)
    dy = np.diff(y[tour])
    step = D[tour[:-1], tour[1:]]
    with np.errstate(divide="ignore", invalid="ignore"):
        slopes = np.where(step > 0, dy / np.where(step > 0, step, 1.0), np.sign(dy) * np.inf)
    return slopes


def _log10_or_missing(eps: float) -> float:
    return math.log10(eps) if eps > 0 else MISSING


def info_content(sample_or_X, y=None, eps_grid=None, D: np.ndarray | None = None) -> np.ndarray:
    X, y = _xy(sample_or_X, y)
    if X.shape[0] < 3:
        raise SampleTooSmall("information content needs n >= 3")
    grid = np.sort(np.asarray(DEFAULT_EPS_GRID if eps_grid is None else eps_grid, dtype=float))
    if grid.size == 0 or grid[0] < 0:
        raise ValueError("epsilon grid must be non-empty and non-negative")
    symbols = symbol_strings(tour_slopes(X, y, D), grid)
    H = entropy_of_changes(symbols)
    M = partial_information(symbols)

    h_max = float(H.max())
    settled = np.flatnonzero(H < IC_SETTLING_THRESHOLD)
    eps_s = _log10_or_missing(grid[settled[0]]) if settled.size else MISSING
    eps_max = _log10_or_missing(grid[int(np.argmax(H))])
    zero = np.flatnonzero(grid == 0.0)
    m0 = float(M[zero[0]]) if zero.size else MISSING
    if math.isnan(m0):
        eps_ratio = MISSING
    else:
        halved = np.flatnonzero(M < 0.5 * m0)
        eps_ratio = _log10_or_missing(grid[halved[0]]) if halved.size else MISSING
    return np.array([h_max, eps_s, eps_max, m0, eps_ratio])


# --- fitness distance correlation -------------------------------------------------


def fdc(sample_or_X, y=None) -> np.ndarray:
    X, y = _xy(sample_or_X, y)
    if X.shape[0] < 3:
        raise SampleTooSmall("fitness-distance features need n >= 3")
    b = int(np.argmin(y))
    dist = euclidean(X, X[b:b + 1])[:, 0]
    return np.array([
        pearson(dist, y),
        float(np.mean(dist)),
        _sd(dist),
        float(np.max(dist)),
        float(np.mean(y - y[b])),
        _sd(y),
    ])


# --- PCA / misc ---------------------------------------------------------------------


def _explained(matrix: np.ndarray) -> tuple[float, float]:
    evals = np.sort(np.linalg.eigvalsh(matrix))[::-1]
    evals = np.clip(evals, 0.0, None)
    total = float(evals.sum())
    if not total > 0:
        return MISSING, MISSING
    cum = np.cumsum(evals) / total
    needed = int(np.argmax(cum >= 0.9 - 1e-12)) + 1
    return needed / len(evals), float(evals[0] / total)


def pca_misc(sample_or_X, y=None) -> np.ndarray:
    X, y = _xy(sample_or_X, y)
    n, d = X.shape
    if n <= d + 1:
        raise SampleTooSmall("PCA features need n > d + 1")
    Xy = np.column_stack([X, y])
    shares, pc1 = [], []
    for data in (X, Xy):
        shares_cov, pc1_cov = _explained(np.atleast_2d(np.cov(data, rowvar=False)))
        if np.any(np.ptp(data, axis=0) == 0):
            shares_cor, pc1_cor = MISSING, MISSING
        else:
            shares_cor, pc1_cor = _explained(np.atleast_2d(np.corrcoef(data, rowvar=False)))
        shares.append((shares_cov, shares_cor))
        pc1.append((pc1_cov, pc1_cor))
    return np.array([
        shares[0][0], shares[0][1], shares[1][0], shares[1][1],
        pc1[0][0], pc1[0][1], pc1[1][0], pc1[1][1],
        float(d),
    ])


# --- assembly -------------------------------------------------------------------------


def _guard(fn, size: int) -> np.ndarray:
    try:
        out = np.asarray(fn(), dtype=float)
    except (ValueError, np.linalg.LinAlgError, FloatingPointError):
        return np.full(size, MISSING)
    out[~np.isfinite(out)] = MISSING
    return out


def feature_vector(sample_or_X, y=None, eps_grid=None) -> FeatureVector:
    """All 53 features in the documented order; failing groups become Missing."""
    X, y = _xy(sample_or_X, y)
    D = euclidean(X, X)
    parts = [
        _guard(lambda: ela_meta(X, y), len(META_NAMES)),
        _guard(lambda: ela_distr(X, y), len(DISTR_NAMES)),
        _guard(lambda: nbc(X, y, D), len(NBC_NAMES)),
        _guard(lambda: dispersion(X, y, D), len(DISP_NAMES)),
        _guard(lambda: info_content(X, y, eps_grid, D), len(IC_NAMES)),
        _guard(lambda: fdc(X, y), len(FDC_NAMES)),
        _guard(lambda: pca_misc(X, y), len(PCA_NAMES)),
    ]
    return FeatureVector(FEATURE_NAMES, np.concatenate(parts))


def _fmt(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def write_features_csv(path, vectors, key_columns=None, keys=None) -> Path:
    """One row per vector; Missing as an empty cell.

    ``key_columns``/``keys`` optionally prefix identifying columns.
    """
    path = Path(path)
    vectors = list(vectors)
    names = vectors[0].names if vectors else FEATURE_NAMES
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(key_columns or []) + list(names))
        for i, vec in enumerate(vectors):
            prefix = [str(k) for k in keys[i]] if key_columns else []
            writer.writerow(prefix + [_fmt(v) for v in vec.values])
    return path


def read_features_csv(path, n_key_columns: int = 0):
    """Returns (names, keys, values) with Missing read back as nan."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    names = tuple(header[n_key_columns:])
    keys = [tuple(r[:n_key_columns]) for r in rows[1:]]
    values = np.array(
        [[float(c) if c != "" else MISSING for c in r[n_key_columns:]] for r in rows[1:]],
        dtype=float,
    ).reshape(len(rows) - 1, len(names))
    return names, keys, values
