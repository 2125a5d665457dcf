"""Seeded BBOB-style benchmark functions with expert property labels.

Six functions are supported, chosen so that every label value of the three
high-level properties occurs at least once:

    F1  sphere                  F16 Weierstrass
    F3  separable Rastrigin     F20 Schwefel
    F8  Rosenbrock              F24 Lunacek bi-Rastrigin

Every function is written in shift form, ``f(x) = g(x - x_opt) + f_opt`` with
``g(0) = 0`` the global minimum, so that instance 0 (no shift, no offset,
identity rotations) is a valid member of each family.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from fitscape.errors import (
    DimensionMismatch,
    InvalidBounds,
    InvalidDimension,
    NonFiniteInput,
    UnsupportedFunction,
)

SUPPORTED_FUNCTIONS = ("F1", "F3", "F8", "F16", "F20", "F24")
DEFAULT_DIMS = (2, 3, 5, 10)
DEFAULT_LOWER = -5.0
DEFAULT_UPPER = 5.0

# optimum coordinate magnitude of the internal Schwefel, 2|x_opt| in BBOB terms
SCHWEFEL_OPT = 4.2096874633
LUNACEK_MU0 = 2.5
WEIERSTRASS_TERMS = 12


class Multimodality(str, Enum):
    NONE = "none"
    LOW = "low"
    MED = "med"
    HIGH = "high"


class GlobalStructure(str, Enum):
    NONE = "none"
    WEAK = "weak"
    MED = "med"
    STRONG = "strong"
    DECEPTIVE = "deceptive"


class Funnel(str, Enum):
    YES = "yes"
    NONE = "none"


PROPERTIES = ("multimodality", "global_structure", "funnel")

# fixed alphabet order; classifiers break ties towards the earlier class
ALPHABETS: dict[str, tuple[str, ...]] = {
    "multimodality": tuple(m.value for m in Multimodality),
    "global_structure": tuple(g.value for g in GlobalStructure),
    "funnel": tuple(f.value for f in Funnel),
}


@dataclass(frozen=True)
class PropertyLabels:
    multimodality: Multimodality
    global_structure: GlobalStructure
    funnel: Funnel

    def __post_init__(self):
        # coerce plain strings; an unknown value raises ValueError from Enum
        object.__setattr__(self, "multimodality", Multimodality(self.multimodality))
        object.__setattr__(self, "global_structure", GlobalStructure(self.global_structure))
        object.__setattr__(self, "funnel", Funnel(self.funnel))

    def as_tuple(self) -> tuple[str, str, str]:
        return (self.multimodality.value, self.global_structure.value, self.funnel.value)

    def __getitem__(self, prop: str) -> str:
        return getattr(self, prop).value


_LABELS = {
    "F1": PropertyLabels("none", "none", "yes"),
    "F3": PropertyLabels("high", "strong", "yes"),
    "F8": PropertyLabels("low", "none", "yes"),
    "F16": PropertyLabels("high", "med", "none"),
    "F20": PropertyLabels("med", "deceptive", "yes"),
    "F24": PropertyLabels("high", "weak", "yes"),
}


def labels(function_id: str) -> PropertyLabels:
    """Expert labels (multimodality, global structure, funnel) of a function."""
    try:
        return _LABELS[_check_function(function_id)]
    except KeyError:  # pragma: no cover - guarded by _check_function
        raise UnsupportedFunction(function_id)


def _check_function(function_id) -> str:
    fid = str(function_id).upper()
    if not fid.startswith("F"):
        fid = "F" + fid
    if fid not in SUPPORTED_FUNCTIONS:
        raise UnsupportedFunction(f"unsupported function id {function_id!r}")
    return fid


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """A concrete, immutable benchmark problem.

    ``rotation`` and ``rotation_inner`` are the two orthogonal matrices used by
    the rotated functions (R and Q in BBOB notation); they are identities for
    functions that do not rotate.  ``signs`` is the per-coordinate orientation
    used by F20 and F24 (all ones otherwise).
    """

    function_id: str
    dim: int
    instance_id: int
    lower: np.ndarray
    upper: np.ndarray
    x_opt: np.ndarray
    f_opt: float
    rotation: np.ndarray
    rotation_inner: np.ndarray = field(repr=False)
    signs: np.ndarray = field(repr=False)

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.lower, self.upper

    @property
    def labels(self) -> PropertyLabels:
        return labels(self.function_id)

    def __call__(self, x) -> float:
        return evaluate(self, x)


def _gram_schmidt(matrix: np.ndarray) -> np.ndarray:
    """Orthonormalise the rows of ``matrix`` (modified Gram-Schmidt, two passes)."""
    basis = np.array(matrix, dtype=float)
    d = basis.shape[0]
    for i in range(d):
        for _ in range(2):
            for j in range(i):
                basis[i] -= np.dot(basis[i], basis[j]) * basis[j]
        norm = np.sqrt(np.sum(basis[i] ** 2))
        basis[i] /= norm
    return basis


def _instance_rng(function_id: str, dim: int, instance_id: int) -> np.random.Generator:
    return np.random.default_rng([int(function_id[1:]), dim, instance_id])


def make_problem(function_id, dim: int, instance_id: int = 0,
                 lower: float | np.ndarray = DEFAULT_LOWER,
                 upper: float | np.ndarray = DEFAULT_UPPER) -> ProblemInstance:
    """Build a deterministic problem instance.

    Instance 0 is the untransformed function.  Any other instance draws, from a
    generator seeded by ``(function, dim, instance)``: the optimum location,
    ``f_opt`` uniform in [-100, 100], and Gram-Schmidt rotations of Gaussian
    matrices for F16 and F24.
    """
    fid = _check_function(function_id)
    if int(dim) != dim or dim < 2:
        raise InvalidDimension(f"dimension must be an integer >= 2, got {dim}")
    dim = int(dim)
    if int(instance_id) != instance_id or instance_id < 0:
        raise ValueError(f"instance_id must be a non-negative integer, got {instance_id}")
    instance_id = int(instance_id)

    lo = np.broadcast_to(np.asarray(lower, dtype=float), (dim,)).copy()
    hi = np.broadcast_to(np.asarray(upper, dtype=float), (dim,)).copy()
    if not np.all(lo < hi):
        raise InvalidBounds("lower bounds must be strictly below upper bounds")

    eye = np.eye(dim)
    signs = np.ones(dim)
    if instance_id == 0:
        x_opt = np.zeros(dim)
        f_opt = 0.0
        rot, rot_inner = eye.copy(), eye.copy()
    else:
        rng = _instance_rng(fid, dim, instance_id)
        if fid == "F20":
            signs = np.where(rng.uniform(-1.0, 1.0, dim) < 0, -1.0, 1.0)
            x_opt = signs * SCHWEFEL_OPT / 2
        elif fid == "F24":
            signs = np.where(rng.standard_normal(dim) < 0, -1.0, 1.0)
            x_opt = signs * LUNACEK_MU0 / 2
        elif fid == "F8":
            x_opt = 0.75 * rng.uniform(-4.0, 4.0, dim)
        else:
            x_opt = rng.uniform(-4.0, 4.0, dim)
        f_opt = float(rng.uniform(-100.0, 100.0))
        if fid in ("F16", "F24"):
            rot = _gram_schmidt(rng.standard_normal((dim, dim)))
            rot_inner = _gram_schmidt(rng.standard_normal((dim, dim)))
        else:
            rot, rot_inner = eye.copy(), eye.copy()

    for arr in (lo, hi, x_opt, rot, rot_inner, signs):
        arr.setflags(write=False)
    return ProblemInstance(fid, dim, instance_id, lo, hi, x_opt, f_opt, rot, rot_inner, signs)


# --- transformations -------------------------------------------------------


def _rotate(z: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    # row-wise matrix @ z_row, reduced elementwise so results do not depend on
    # the batch size (BLAS kernels may sum in shape-dependent order)
    return np.sum(z[:, None, :] * matrix[None, :, :], axis=-1)


def _t_osz(x: np.ndarray) -> np.ndarray:
    nz = x != 0
    xhat = np.zeros_like(x)
    xhat[nz] = np.log(np.abs(x[nz]))
    c1 = np.where(x > 0, 10.0, 5.5)
    c2 = np.where(x > 0, 7.9, 3.1)
    return np.sign(x) * np.exp(xhat + 0.049 * (np.sin(c1 * xhat) + np.sin(c2 * xhat)))


def _t_asy(x: np.ndarray, beta: float) -> np.ndarray:
    d = x.shape[1]
    ramp = np.linspace(0.0, 1.0, d) if d > 1 else np.zeros(1)
    out = x.copy()
    pos = x > 0
    expo = 1.0 + beta * ramp[None, :] * np.sqrt(np.where(pos, x, 0.0))
    out[pos] = np.power(x[pos], expo[pos])
    return out


def _lambda_diag(alpha: float, d: int) -> np.ndarray:
    ramp = np.linspace(0.0, 1.0, d) if d > 1 else np.zeros(1)
    return alpha ** (0.5 * ramp)


def _f_pen(x: np.ndarray) -> np.ndarray:
    return np.sum(np.maximum(0.0, np.abs(x) - 5.0) ** 2, axis=1)


# --- raw functions, each with its global minimum 0 at shifted = 0 -----------


def _sphere(p: ProblemInstance, x: np.ndarray) -> np.ndarray:
    z = x - p.x_opt
    return np.sum(z * z, axis=1)


def _rastrigin(p: ProblemInstance, x: np.ndarray) -> np.ndarray:
    d = p.dim
    z = _lambda_diag(10.0, d) * _t_asy(_t_osz(x - p.x_opt), 0.2)
    return 10.0 * (d - np.sum(np.cos(2 * np.pi * z), axis=1)) + np.sum(z * z, axis=1)


def _rosenbrock(p: ProblemInstance, x: np.ndarray) -> np.ndarray:
    z = max(1.0, np.sqrt(p.dim) / 8.0) * (x - p.x_opt) + 1.0
    head, tail = z[:, :-1], z[:, 1:]
    return np.sum(100.0 * (head ** 2 - tail) ** 2 + (head - 1.0) ** 2, axis=1)


_WEIER_A = 0.5 ** np.arange(WEIERSTRASS_TERMS)
_WEIER_B = 3.0 ** np.arange(WEIERSTRASS_TERMS)
_WEIER_F0 = float(np.sum(_WEIER_A * np.cos(np.pi * _WEIER_B)))


def _weierstrass(p: ProblemInstance, x: np.ndarray) -> np.ndarray:
    d = p.dim
    z = _rotate(_t_osz(_rotate(x - p.x_opt, p.rotation)), p.rotation_inner)
    z = _rotate(_lambda_diag(0.01, d) * z, p.rotation)
    terms = _WEIER_A * np.cos(2 * np.pi * _WEIER_B * (z[..., None] + 0.5))
    total = np.sum(np.sum(terms, axis=-1), axis=1)
    return 10.0 * (total / d - _WEIER_F0) ** 3 + 10.0 / d * _f_pen(x)


_SCHWEFEL_Z = 100.0 * SCHWEFEL_OPT
_SCHWEFEL_CONST = _SCHWEFEL_Z * np.sin(np.sqrt(_SCHWEFEL_Z)) / 100.0


def _schwefel(p: ProblemInstance, x: np.ndarray) -> np.ndarray:
    d = p.dim
    xhat = 2.0 * p.signs * (x - p.x_opt) + SCHWEFEL_OPT
    zhat = xhat.copy()
    zhat[:, 1:] += 0.25 * (xhat[:, :-1] - SCHWEFEL_OPT)
    z = 100.0 * (_lambda_diag(10.0, d) * (zhat - SCHWEFEL_OPT) + SCHWEFEL_OPT)
    core = -np.sum(z * np.sin(np.sqrt(np.abs(z))), axis=1) / (100.0 * d)
    return core + _SCHWEFEL_CONST + 100.0 * _f_pen(z / 100.0)


def _lunacek(p: ProblemInstance, x: np.ndarray) -> np.ndarray:
    d = p.dim
    s = 1.0 - 1.0 / (2.0 * np.sqrt(d + 20.0) - 8.2)
    mu1 = -np.sqrt((LUNACEK_MU0 ** 2 - 1.0) / s)
    xhat = 2.0 * p.signs * (x - p.x_opt) + LUNACEK_MU0
    first = np.sum((xhat - LUNACEK_MU0) ** 2, axis=1)
    second = d + s * np.sum((xhat - mu1) ** 2, axis=1)
    z = _rotate(xhat - LUNACEK_MU0, p.rotation)
    z = _rotate(_lambda_diag(100.0, d) * z, p.rotation_inner)
    rast = 10.0 * (d - np.sum(np.cos(2 * np.pi * z), axis=1))
    return np.minimum(first, second) + rast + 1e4 * _f_pen(x)


_RAW = {
    "F1": _sphere,
    "F3": _rastrigin,
    "F8": _rosenbrock,
    "F16": _weierstrass,
    "F20": _schwefel,
    "F24": _lunacek,
}


def evaluate_batch(problem: ProblemInstance, X) -> np.ndarray:
    """Evaluate every row of ``X`` (shape n x d)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != problem.dim:
        raise DimensionMismatch(
            f"expected rows of length {problem.dim}, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("decision vectors must be finite")
    return _RAW[problem.function_id](problem, X) + problem.f_opt


def evaluate(problem: ProblemInstance, x) -> float:
    """Fitness of a single decision vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != problem.dim:
        raise DimensionMismatch(
            f"expected a vector of length {problem.dim}, got shape {x.shape}")
    return float(evaluate_batch(problem, x[None, :])[0])
