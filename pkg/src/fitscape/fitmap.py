"""Fitness maps: 2D grayscale rasters of normalised fitness values.

Four constructions reduce a d-dimensional sample to the plane:

* ``PCA``: uncentred projection onto the two leading eigenvectors of X'X/n,
* ``PCAFunc``: the same on the design matrix with the normalised fitness appended,
* ``MC``: one channel per pair of decision variables (45 channels, padded),
* ``rMC``: the MC channels averaged per pixel over the channels occupied there.

A map stores values together with an occupancy mask; unoccupied pixels hold
1.0 (white).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from pathlib import Path

import numpy as np

from fitscape.errors import (
    DimensionMismatch,
    DimensionTooLarge,
    InvalidDimension,
    NumericalFailure,
    OutOfBounds,
)
from fitscape.sampling import Sample, normalize_design, normalize_fitness

RESOLUTION = 224
MC_CHANNELS = 45
MC_MAX_DIM = 10
BACKGROUND = 1.0


class MapMethod(str, Enum):
    PCA = "PCA"
    PCA_FUNC = "PCAFunc"
    MC = "MC"
    RMC = "rMC"

    @classmethod
    def parse(cls, name) -> "MapMethod":
        if isinstance(name, cls):
            return name
        key = str(name).replace("-", "").replace("_", "").lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ValueError(f"unknown map method {name!r}")


@dataclass(frozen=True, eq=False)
class FitnessMap:
    values: np.ndarray      # (R, R, c) float64
    occupancy: np.ndarray   # (R, R, c) bool
    method: MapMethod

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[2]

    def occupied_channels(self) -> int:
        return int(np.count_nonzero(self.occupancy.any(axis=(0, 1))))


@dataclass(frozen=True)
class PcaBasis:
    eigenvectors: np.ndarray  # (d, 2), columns orthonormal
    eigenvalues: np.ndarray   # (2,), descending


def _sign_fix(vectors: np.ndarray) -> np.ndarray:
    out = vectors.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        # first index of the largest magnitude, so exact ties are deterministic
        if col[np.argmax(np.abs(col))] < 0:
            out[:, k] = -col
    return out


def pca_basis(M: np.ndarray) -> tuple[PcaBasis, np.ndarray]:
    """Top-2 eigenpairs of the uncentred second-moment matrix M'M/n.

    Returns the basis and the full descending spectrum.
    """
    M = np.asarray(M, dtype=float)
    n, d = M.shape
    if d < 2:
        raise InvalidDimension("PCA projection needs at least 2 columns")
    S = M.T @ M / n
    try:
        evals, evecs = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(str(exc)) from exc
    if not np.all(np.isfinite(evals)):
        raise NumericalFailure("non-finite eigenvalues")
    evecs = _sign_fix(evecs)
    dominant_axis = np.argmax(np.abs(evecs), axis=0)
    # descending eigenvalue, ties broken by lowest dominant axis index
    order = np.lexsort((dominant_axis, -evals))
    evals, evecs = evals[order], evecs[:, order]
    return PcaBasis(evecs[:, :2].copy(), evals[:2].copy()), evals


def _project(M: np.ndarray, lower, upper) -> tuple[np.ndarray, PcaBasis, np.ndarray]:
    basis, _ = pca_basis(M)
    projected = M @ basis.eigenvectors
    normed = normalize_design(projected, (lower[:2], upper[:2]))
    keep = np.all((normed >= 0.0) & (normed <= 1.0), axis=1)
    return normed[keep], basis, keep


def _default_bounds(d):
    return np.full(d, -5.0), np.full(d, 5.0)


def project_pca(X, bounds=None) -> tuple[np.ndarray, PcaBasis, np.ndarray]:
    """Uncentred PCA projection of the raw design matrix.

    Projections are normalised with the problem bounds (the first two
    components' bounds) and rows falling outside [0, 1] are dropped.

    Returns:
        (kept normalised points n'x2, basis, boolean mask of kept rows)
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 2:
        raise InvalidDimension("project_pca needs an n x d matrix with d >= 2")
    lower, upper = bounds if bounds is not None else _default_bounds(X.shape[1])
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (X.shape[1],))
    upper = np.broadcast_to(np.asarray(upper, dtype=float), (X.shape[1],))
    return _project(X, lower, upper)


def project_pca_func(X, y_hat, bounds=None) -> tuple[np.ndarray, PcaBasis, np.ndarray]:
    """As :func:`project_pca`, on ``X`` with the normalised fitness as extra column."""
    X = np.asarray(X, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if X.ndim != 2 or X.shape[1] < 2:
        raise InvalidDimension("project_pca_func needs an n x d matrix with d >= 2")
    if y_hat.shape != (X.shape[0],):
        raise DimensionMismatch("y_hat must have one entry per row of X")
    lower, upper = bounds if bounds is not None else _default_bounds(X.shape[1])
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (X.shape[1],))
    upper = np.broadcast_to(np.asarray(upper, dtype=float), (X.shape[1],))
    return _project(np.column_stack([X, y_hat]), lower, upper)


def _pixel_indices(points: np.ndarray, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    cols = np.minimum(np.floor(points[:, 0] * resolution).astype(np.int64), resolution - 1)
    rows = np.minimum(np.floor(points[:, 1] * resolution).astype(np.int64), resolution - 1)
    return rows, cols


def _raster_channel(points: np.ndarray, y_hat: np.ndarray, resolution: int):
    rows, cols = _pixel_indices(points, resolution)
    flat = rows * resolution + cols
    size = resolution * resolution
    counts = np.bincount(flat, minlength=size)
    sums = np.bincount(flat, weights=y_hat, minlength=size)
    occ = counts > 0
    vals = np.full(size, BACKGROUND)
    vals[occ] = sums[occ] / counts[occ]
    return vals.reshape(resolution, resolution), occ.reshape(resolution, resolution)


def rasterize(points2d, y_hat, resolution: int = RESOLUTION,
              method: MapMethod = MapMethod.PCA) -> FitnessMap:
    """Place values at pixel (floor(p2*R), floor(p1*R)), clamped to R-1.

    Points sharing a pixel are averaged.
    """
    points = np.asarray(points2d, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2:
        raise DimensionMismatch("points must be an n x 2 array")
    if y_hat.shape != (points.shape[0],):
        raise DimensionMismatch("one value per point is required")
    if np.any(points < 0.0) or np.any(points > 1.0) or not np.all(np.isfinite(points)):
        raise OutOfBounds("points must lie in [0, 1]^2; drop out-of-range rows first")
    vals, occ = _raster_channel(points, y_hat, resolution)
    return FitnessMap(vals[:, :, None], occ[:, :, None], MapMethod.parse(method))


def dimension_pairs(d: int) -> list[tuple[int, int]]:
    return list(combinations(range(d), 2))


def _check_mc(X_hat, y_hat):
    X_hat = np.asarray(X_hat, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if X_hat.ndim != 2 or X_hat.shape[1] < 2:
        raise InvalidDimension("multi-channel maps need d >= 2")
    if X_hat.shape[1] > MC_MAX_DIM:
        raise DimensionTooLarge(
            f"d={X_hat.shape[1]} needs more than {MC_CHANNELS} channels")
    if y_hat.shape != (X_hat.shape[0],):
        raise DimensionMismatch("one value per point is required")
    if np.any(X_hat < 0.0) or np.any(X_hat > 1.0):
        raise OutOfBounds("normalised design must lie in [0, 1]")
    return X_hat, y_hat


def map_mc(X_hat, y_hat, resolution: int = RESOLUTION) -> FitnessMap:
    """One channel per variable pair (i, j), i < j, lexicographic; 45 channels total."""
    X_hat, y_hat = _check_mc(X_hat, y_hat)
    values = np.full((resolution, resolution, MC_CHANNELS), BACKGROUND)
    occupancy = np.zeros((resolution, resolution, MC_CHANNELS), dtype=bool)
    for t, (i, j) in enumerate(dimension_pairs(X_hat.shape[1])):
        vals, occ = _raster_channel(X_hat[:, [i, j]], y_hat, resolution)
        values[:, :, t] = vals
        occupancy[:, :, t] = occ
    return FitnessMap(values, occupancy, MapMethod.MC)


def reduce_channels(mc: FitnessMap) -> FitnessMap:
    """Per-pixel mean over the channels occupied at that pixel."""
    res = mc.resolution
    total = np.zeros((res, res))
    count = np.zeros((res, res), dtype=np.int64)
    for t in range(mc.channels):
        occ = mc.occupancy[:, :, t]
        total[occ] += mc.values[:, :, t][occ]
        count += occ
    hit = count > 0
    values = np.full((res, res), BACKGROUND)
    values[hit] = total[hit] / count[hit]
    return FitnessMap(values[:, :, None], hit[:, :, None], MapMethod.RMC)


def map_rmc(X_hat, y_hat, resolution: int = RESOLUTION) -> FitnessMap:
    return reduce_channels(map_mc(X_hat, y_hat, resolution))


def build_map(sample: Sample, method, resolution: int = RESOLUTION) -> FitnessMap:
    method = MapMethod.parse(method)
    y_hat = normalize_fitness(sample.y)
    if method is MapMethod.PCA:
        points, _, keep = project_pca(sample.X, sample.bounds)
        return rasterize(points, y_hat[keep], resolution, method)
    if method is MapMethod.PCA_FUNC:
        points, _, keep = project_pca_func(sample.X, y_hat, sample.bounds)
        return rasterize(points, y_hat[keep], resolution, method)
    X_hat = normalize_design(sample.X, sample.bounds)
    if method is MapMethod.MC:
        return map_mc(X_hat, y_hat, resolution)
    return map_rmc(X_hat, y_hat, resolution)


# --- export ------------------------------------------------------------------

FILL_POLICIES = ("white", "zero_padding")


def to_gray8(fmap: FitnessMap, channel: int = 0) -> np.ndarray:
    """8-bit encoding: occupied pixels round(v*254), background 255."""
    vals = fmap.values[:, :, channel]
    occ = fmap.occupancy[:, :, channel]
    out = np.full(vals.shape, 255, dtype=np.uint8)
    out[occ] = np.rint(np.clip(vals[occ], 0.0, 1.0) * 254).astype(np.uint8)
    return out


def pgm_bytes(fmap: FitnessMap, channel: int = 0) -> bytes:
    gray = to_gray8(fmap, channel)
    h, w = gray.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + gray.tobytes()


def write_pgm(fmap: FitnessMap, path, channel: int = 0) -> Path:
    path = Path(path)
    path.write_bytes(pgm_bytes(fmap, channel))
    return path


def read_pgm(path, method=MapMethod.PCA) -> FitnessMap:
    """Inverse of :func:`write_pgm` up to the 1/254 quantisation."""
    data = Path(path).read_bytes()
    fields = data.split(maxsplit=4)
    if len(fields) < 5 or fields[0] != b"P5" or int(fields[3]) != 255:
        raise ValueError(f"{path}: not an 8-bit binary PGM")
    w, h = int(fields[1]), int(fields[2])
    gray = np.frombuffer(fields[4][: w * h], dtype=np.uint8).reshape(h, w)
    occ = gray < 255
    vals = np.where(occ, gray / 254.0, BACKGROUND)
    return FitnessMap(vals[:, :, None], occ[:, :, None], MapMethod.parse(method))


def tensor_array(fmap: FitnessMap, fill_policy: str = "zero_padding") -> np.ndarray:
    """Channel-last float32 tensor.

    ``white`` writes 1.0 at every unoccupied pixel; ``zero_padding`` does the
    same except that channels without any occupied pixel are all zeros.
    """
    if fill_policy not in FILL_POLICIES:
        raise ValueError(f"fill_policy must be one of {FILL_POLICIES}")
    out = np.where(fmap.occupancy, fmap.values, BACKGROUND)
    if fill_policy == "zero_padding":
        empty = ~fmap.occupancy.any(axis=(0, 1))
        out[:, :, empty] = 0.0
    return out.astype(np.float32)


def write_tensor(fmap: FitnessMap, path, problem_ref=None, seed=None,
                 fill_policy: str = "zero_padding") -> Path:
    """Write ``<path>`` (raw float32), ``<path>.occ`` (packed mask) and ``<path>.json``."""
    path = Path(path)
    path.write_bytes(tensor_array(fmap, fill_policy).tobytes(order="C"))
    occ_path = path.with_name(path.name + ".occ")
    occ_path.write_bytes(np.packbits(fmap.occupancy.reshape(-1)).tobytes())
    sidecar = {
        "resolution": fmap.resolution,
        "channels": fmap.channels,
        "method": fmap.method.value,
        "fill_policy": fill_policy,
        "dtype": "float32",
        "layout": "row-major, channel-last (R, R, c)",
        "occupancy_file": occ_path.name,
        "problem_ref": list(problem_ref) if problem_ref is not None else None,
        "seed": seed,
    }
    path.with_name(path.name + ".json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_tensor(path) -> FitnessMap:
    path = Path(path)
    meta = json.loads(path.with_name(path.name + ".json").read_text(encoding="utf-8"))
    r, c = meta["resolution"], meta["channels"]
    vals = np.fromfile(path, dtype=np.float32).reshape(r, r, c).astype(float)
    occ_bits = np.frombuffer(path.with_name(meta["occupancy_file"]).read_bytes(), dtype=np.uint8)
    occ = np.unpackbits(occ_bits)[: r * r * c].astype(bool).reshape(r, r, c)
    vals = np.where(occ, vals, BACKGROUND)
    return FitnessMap(vals, occ, MapMethod.parse(meta["method"]))
