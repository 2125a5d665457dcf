"""Binary-Relevance property classification and macro-F1 reporting.

One independent classifier per property (multimodality, global structure,
funnel), either k-nearest-neighbours or softmax logistic regression, trained on
standardised flattened representations.  Hyperparameters are chosen on the
validation split from a small fixed grid; test scores are reported per
property and dimension plus a pooled ``all`` row.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from fitscape import elafeat, fitcloud, fitmap
from fitscape.dataset import DatasetManifest, SplitData, load_all_splits, load_manifest
from fitscape.errors import DegenerateLabels, DimensionMismatch, EmptySplit, IoError
from fitscape.problems import ALPHABETS, PROPERTIES, PropertyLabels

DOWNSAMPLE = 8

_PGM_METHODS = {
    "map_pca": fitmap.MapMethod.PCA,
    "map_pcafunc": fitmap.MapMethod.PCA_FUNC,
    "map_rmc": fitmap.MapMethod.RMC,
}

KNN_GRID = tuple({"k": k} for k in (1, 5, 11))
LOGISTIC_GRID = tuple(
    {"learning_rate": 0.5, "iterations": 500, "l2": l2} for l2 in (0.0, 1e-3, 1e-1)
)

# --- flattening -----------------------------------------------------------------


def channel_summary(values: np.ndarray, occupancy: np.ndarray, blocks: int = DOWNSAMPLE) -> np.ndarray:
    """Occupied count, mean/sd/min/max of occupied values, blocks x blocks mean grid.

    Empty regions read as background (1.0); an empty channel has sd 0.
    """
    occ = occupancy.astype(bool)
    vals = values[occ]
    if vals.size:
        stats = [float(vals.size), vals.mean(), vals.std(), vals.min(), vals.max()]
    else:
        stats = [0.0, fitmap.BACKGROUND, 0.0, fitmap.BACKGROUND, fitmap.BACKGROUND]
    r = values.shape[0]
    edges = np.linspace(0, r, blocks + 1).astype(int)
    grid = np.full((blocks, blocks), fitmap.BACKGROUND)
    weighted = np.where(occ, values, 0.0)
    for a in range(blocks):
        for b in range(blocks):
            rs = slice(edges[a], edges[a + 1])
            cs = slice(edges[b], edges[b + 1])
            count = occ[rs, cs].sum()
            if count:
                grid[a, b] = weighted[rs, cs].sum() / count
    return np.concatenate([stats, grid.ravel()])


def flatten_map(fmap_: fitmap.FitnessMap) -> np.ndarray:
    return np.concatenate([
        channel_summary(fmap_.values[:, :, c], fmap_.occupancy[:, :, c])
        for c in range(fmap_.channels)
    ])


def flatten_cloud(embedded: np.ndarray) -> np.ndarray:
    embedded = np.asarray(embedded, dtype=float)
    return np.concatenate([embedded.mean(axis=0), embedded.std(axis=0)])


def flatten(artifact) -> np.ndarray:
    """Feature row from an in-memory representation."""
    if isinstance(artifact, elafeat.FeatureVector):
        return np.asarray(artifact.values, dtype=float)
    if isinstance(artifact, fitmap.FitnessMap):
        return flatten_map(artifact)
    if isinstance(artifact, fitcloud.CloudEmbedding):
        return flatten_cloud(artifact.embedded)
    return np.asarray(artifact, dtype=float).ravel()


def flatten_artifact(path, representation: str) -> np.ndarray:
    """Feature row from an artifact file written by the dataset builder."""
    path = Path(path)
    try:
        if representation == "ela":
            _, _, values = elafeat.read_features_csv(path)
            return values[0]
        if representation == "cloud":
            return flatten_cloud(fitcloud.read_cloud(path))
        if representation == "map_mc":
            return flatten_map(fitmap.read_tensor(path))
        if representation in _PGM_METHODS:
            return flatten_map(fitmap.read_pgm(path, _PGM_METHODS[representation]))
    except (OSError, ValueError) as exc:
        raise IoError(f"cannot read artifact {path}: {exc}", key=str(path)) from exc
    raise ValueError(f"unknown representation {representation!r}")


# --- base classifiers ---------------------------------------------------------------


@dataclass
class KnnClassifier:
    k: int
    n_classes: int
    X: np.ndarray = field(repr=False, default=None)
    y: np.ndarray = field(repr=False, default=None)

    def fit(self, X: np.ndarray, y: np.ndarray) -> "KnnClassifier":
        self.X, self.y = np.asarray(X, dtype=float), np.asarray(y, dtype=np.int64)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        k = min(self.k, len(self.y))
        out = np.empty(len(X), dtype=np.int64)
        for start in range(0, len(X), 512):
            chunk = X[start:start + 512]
            d2 = elafeat.euclidean(chunk, self.X)
            nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
            votes = np.zeros((len(chunk), self.n_classes), dtype=np.int64)
            np.add.at(votes, (np.repeat(np.arange(len(chunk)), k), self.y[nearest].ravel()), 1)
            # argmax returns the first maximum: ties go to the lowest class index
            out[start:start + len(chunk)] = np.argmax(votes, axis=1)
        return out


@dataclass
class LogisticClassifier:
    """Multinomial logistic regression by full-batch gradient descent from zero."""

    n_classes: int
    learning_rate: float = 0.5
    iterations: int = 500
    l2: float = 0.0
    W: np.ndarray = field(repr=False, default=None)
    b: np.ndarray = field(repr=False, default=None)

    def _init(self, p: int):
        self.W = np.zeros((p, self.n_classes))
        self.b = np.zeros(self.n_classes)

    def fit(self, X: np.ndarray, y: np.ndarray) -> "LogisticClassifier":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=np.int64)
        n, p = X.shape
        self._init(p)
        onehot = np.zeros((n, self.n_classes))
        onehot[np.arange(n), y] = 1.0
        for _ in range(self.iterations):
            proba = self.predict_proba(X)
            grad = proba - onehot
            self.W -= self.learning_rate * (X.T @ grad / n + self.l2 * self.W)
            self.b -= self.learning_rate * grad.mean(axis=0)
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.W is None:
            self._init(np.asarray(X).shape[1])
        logits = X @ self.W + self.b
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(np.asarray(X, dtype=float) @ self.W + self.b, axis=1)


def make_classifier(kind: str, prop: str, config: dict):
    n_classes = len(ALPHABETS[prop])
    if kind == "knn":
        return KnnClassifier(int(config.get("k", 1)), n_classes)
    if kind == "logistic":
        return LogisticClassifier(
            n_classes,
            float(config.get("learning_rate", 0.5)),
            int(config.get("iterations", 500)),
            float(config.get("l2", 0.0)),
        )
    raise ValueError(f"unknown base classifier {kind!r}")


# --- binary relevance -------------------------------------------------------------------


@dataclass
class BRModel:
    kind: str
    config: dict
    mean: np.ndarray
    scale: np.ndarray
    classifiers: dict

    @property
    def n_features(self) -> int:
        return len(self.mean)

    def standardize(self, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=float)
        if rows.ndim != 2 or rows.shape[1] != self.n_features:
            raise DimensionMismatch(
                f"expected rows with {self.n_features} features, got shape {rows.shape}")
        return (rows - self.mean) / self.scale


def encode(labels_: list, prop: str) -> np.ndarray:
    alphabet = ALPHABETS[prop]
    return np.array([alphabet.index(lab[prop]) for lab in labels_], dtype=np.int64)


def _fit_one(kind, prop, config, Z, labels_):
    y = encode(labels_, prop)
    if len(np.unique(y)) < 2:
        raise DegenerateLabels(f"property {prop!r} has a single class in the training rows")
    return make_classifier(kind, prop, config).fit(Z, y)


def train_br(rows, labels_: list, kind: str = "knn", config: dict | None = None) -> BRModel:
    config = dict(config or {})
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or len(rows) != len(labels_):
        raise DimensionMismatch("one label triple per training row is required")
    if not np.all(np.isfinite(rows)):
        raise ValueError("training rows must be finite")
    mean = rows.mean(axis=0)
    scale = rows.std(axis=0)
    scale[scale == 0] = 1.0
    model = BRModel(kind, config, mean, scale, {})
    Z = model.standardize(rows)
    for prop in PROPERTIES:
        model.classifiers[prop] = _fit_one(kind, prop, config, Z, labels_)
    return model


def retrain_property(model: BRModel, prop: str, rows, labels_: list,
                     config: dict | None = None) -> BRModel:
    """Copy of ``model`` with only ``prop``'s classifier refitted."""
    cfg = dict(model.config if config is None else config)
    Z = model.standardize(rows)
    classifiers = dict(model.classifiers)
    classifiers[prop] = _fit_one(model.kind, prop, cfg, Z, labels_)
    return replace(model, classifiers=classifiers)


def predict_codes(model: BRModel, rows) -> dict[str, np.ndarray]:
    Z = model.standardize(rows)
    return {prop: model.classifiers[prop].predict(Z) for prop in PROPERTIES}


def predict(model: BRModel, rows) -> list[PropertyLabels]:
    codes = predict_codes(model, rows)
    m = len(codes[PROPERTIES[0]])
    return [
        PropertyLabels(*(ALPHABETS[p][codes[p][i]] for p in PROPERTIES))
        for i in range(m)
    ]


# --- metrics ---------------------------------------------------------------------------------


def _as_values(labels_, prop):
    out = []
    for lab in labels_:
        if isinstance(lab, PropertyLabels):
            out.append(lab[prop])
        else:
            out.append(getattr(lab, "value", lab))
    return out


def per_class_f1(pred, truth, prop: str | None = None) -> dict[str, float]:
    """F1 of every class present in ``truth`` (0 when precision and recall are both 0)."""
    if len(pred) != len(truth):
        raise DimensionMismatch("pred and truth differ in length")
    if len(truth) == 0:
        raise ValueError("empty label vectors")
    pred = _as_values(pred, prop)
    truth = _as_values(truth, prop)
    scores = {}
    for cls in sorted(set(truth), key=lambda c: _class_rank(c, prop)):
        tp = sum(1 for p, t in zip(pred, truth) if p == cls and t == cls)
        fp = sum(1 for p, t in zip(pred, truth) if p == cls and t != cls)
        fn = sum(1 for p, t in zip(pred, truth) if p != cls and t == cls)
        scores[cls] = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
    return scores


def _class_rank(cls, prop):
    if prop is not None and cls in ALPHABETS[prop]:
        return (0, ALPHABETS[prop].index(cls), "")
    return (1, 0, str(cls))


def macro_f1(pred, truth, prop: str | None = None) -> float:
    scores = per_class_f1(pred, truth, prop)
    return sum(scores.values()) / len(scores)


def confusion_matrix(pred, truth, prop: str) -> np.ndarray:
    """Rows: true class, columns: predicted class, in alphabet order."""
    alphabet = ALPHABETS[prop]
    pred = _as_values(pred, prop)
    truth = _as_values(truth, prop)
    cm = np.zeros((len(alphabet), len(alphabet)), dtype=np.int64)
    for p, t in zip(pred, truth):
        cm[alphabet.index(t), alphabet.index(p)] += 1
    return cm


# --- protocol ----------------------------------------------------------------------------------


@dataclass
class MetricsReport:
    representation: str
    kind: str
    config: dict
    validation_score: float
    scores: dict          # (property, dim or "all") -> macro-F1
    confusion: dict       # property -> confusion matrix
    dims: tuple

    def rows(self) -> list[tuple[str, str, float]]:
        out = []
        for prop in PROPERTIES:
            for dim in list(self.dims) + ["all"]:
                out.append((prop, str(dim), self.scores[(prop, dim)]))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["property", "dim", "macro_f1", "representation", "classifier"])
        for prop, dim, score in self.rows():
            writer.writerow([prop, dim, f"{score:.4f}", self.representation, self.kind])
        return buf.getvalue()

    def to_table(self) -> str:
        head = f"{'High-level property':<20} {'Dim.':>5} {self.representation + ' / ' + self.kind:>24}"
        lines = [head, "-" * len(head)]
        for prop, dim, score in self.rows():
            lines.append(f"{prop:<20} {dim:>5} {score:>24.4f}")
        lines.append("")
        lines.append(f"selected config: {json.dumps(self.config, sort_keys=True)} "
                     f"(validation macro-F1 {self.validation_score:.4f})")
        return "\n".join(lines) + "\n"


def _grid_for(kind: str):
    if kind == "knn":
        return [("knn", c) for c in KNN_GRID]
    if kind == "logistic":
        return [("logistic", c) for c in LOGISTIC_GRID]
    if kind in ("best", "auto"):
        return _grid_for("knn") + _grid_for("logistic")
    raise ValueError(f"unknown base classifier {kind!r}")


def _mean_macro(model: BRModel, data: SplitData) -> float:
    pred = predict(model, data.rows)
    return float(np.mean([macro_f1(pred, data.labels, p) for p in PROPERTIES]))


def evaluate_splits(splits: dict[str, SplitData], representation: str, kind: str = "best",
                    grid=None) -> MetricsReport:
    for name in ("train", "validation", "test"):
        if not splits[name].keys:
            raise EmptySplit(f"split {name!r} has no rows")
    train, val, test = splits["train"], splits["validation"], splits["test"]
    candidates = list(grid) if grid is not None else _grid_for(kind)

    best = None
    for cand_kind, cfg in candidates:
        model = train_br(train.rows, train.labels, cand_kind, cfg)
        score = _mean_macro(model, val)
        if best is None or score > best[0]:
            best = (score, cand_kind, cfg, model)
    val_score, best_kind, best_cfg, model = best

    pred = predict(model, test.rows)
    dims = tuple(sorted(set(int(d) for d in test.dims)))
    test_dims = test.dims
    scores, confusion = {}, {}
    for prop in PROPERTIES:
        for dim in dims:
            idx = np.flatnonzero(test_dims == dim)
            scores[(prop, dim)] = macro_f1([pred[i] for i in idx], [test.labels[i] for i in idx], prop)
        scores[(prop, "all")] = macro_f1(pred, test.labels, prop)
        confusion[prop] = confusion_matrix(pred, test.labels, prop)
    return MetricsReport(representation, best_kind, dict(best_cfg), val_score, scores, confusion, dims)


def evaluate_protocol(manifest, representation: str | None = None, kind: str = "best",
                      grid=None) -> MetricsReport:
    """Select on validation, score on test.  ``manifest`` may be a dataset root."""
    if not isinstance(manifest, DatasetManifest):
        manifest = load_manifest(manifest)
    if representation is not None and representation != manifest.representation:
        raise ValueError(
            f"manifest holds {manifest.representation!r}, not {representation!r}")
    splits = load_all_splits(manifest)
    return evaluate_splits(splits, manifest.representation, kind, grid)
