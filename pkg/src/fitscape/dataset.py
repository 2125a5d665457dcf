"""Experiment corpus: problem grid x repetitions x representation, plus splits.

Every problem key ``(function_id, dim, instance_id, repetition)`` gets its own
sample seed, derived from the key and a global seed with a 64-bit BLAKE2b
hash, so artifacts do not depend on build order or worker count.  A build
writes one artifact (plus JSON sidecar) per key and a ``manifest.json`` that
indexes every artifact by relative path and SHA-256.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from fitscape import elafeat, fitcloud, fitmap
from fitscape.errors import EmptySplit, IoError, OutOfProtocol
from fitscape.problems import SUPPORTED_FUNCTIONS, labels, make_problem
from fitscape.sampling import draw_sample

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"
PARTIAL_NAME = "manifest.partial.jsonl"
SEED_RULE = "blake2b-64(f'{function_id}|{dim}|{instance_id}|{repetition}|{global_seed}'), little-endian"
DEFAULT_GLOBAL_SEED = 20220527
SEED_ENV = "LANDSCAPE_SEED"

REPRESENTATIONS = ("map_pca", "map_pcafunc", "map_mc", "map_rmc", "cloud", "ela")
_MAP_METHODS = {
    "map_pca": fitmap.MapMethod.PCA,
    "map_pcafunc": fitmap.MapMethod.PCA_FUNC,
    "map_mc": fitmap.MapMethod.MC,
    "map_rmc": fitmap.MapMethod.RMC,
}

SPLITS = ("train", "validation", "test")


@dataclass(frozen=True)
class ProblemKey:
    function_id: str
    dim: int
    instance_id: int
    repetition: int

    def as_tuple(self) -> tuple:
        return (self.function_id, self.dim, self.instance_id, self.repetition)

    @property
    def stem(self) -> str:
        return f"{self.function_id}_d{self.dim:02d}_i{self.instance_id:03d}_r{self.repetition:02d}"

    def sort_key(self) -> tuple:
        return (int(self.function_id[1:]), self.dim, self.instance_id, self.repetition)


def derive_seed(key: ProblemKey, global_seed: int) -> int:
    text = f"{key.function_id}|{key.dim}|{key.instance_id}|{key.repetition}|{int(global_seed)}"
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def resolve_global_seed(value=None) -> int:
    """Explicit value, else ``LANDSCAPE_SEED``, else the package default."""
    if value is not None:
        return int(value)
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env, 10)
        except ValueError:
            raise ValueError(f"{SEED_ENV} must be a decimal integer, got {env!r}") from None
    return DEFAULT_GLOBAL_SEED


# --- splits ------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitProtocol:
    """Inclusive instance-id ranges per split.

    ``outside`` is ``"reject"`` (raise OutOfProtocol) or ``"train"``.
    """

    train: tuple[int, int] = (1, 100)
    validation: tuple[int, int] = (101, 125)
    test: tuple[int, int] = (126, 150)
    outside: str = "reject"

    @classmethod
    def scaled(cls, lo: int, hi: int) -> "SplitProtocol":
        """Same 4:1:1 proportions on the instance range [lo, hi]."""
        count = hi - lo + 1
        n_train = round(count * 4 / 6)
        n_val = round(count / 6)
        return cls(
            (lo, lo + n_train - 1),
            (lo + n_train, lo + n_train + n_val - 1),
            (lo + n_train + n_val, hi),
        )

    def to_dict(self) -> dict:
        return {"train": list(self.train), "validation": list(self.validation),
                "test": list(self.test), "outside": self.outside}

    @classmethod
    def from_dict(cls, data: dict) -> "SplitProtocol":
        return cls(tuple(data["train"]), tuple(data["validation"]), tuple(data["test"]),
                   data.get("outside", "reject"))


CANONICAL_SPLITS = SplitProtocol()


def assign_split(instance_id: int, protocol: SplitProtocol = CANONICAL_SPLITS) -> str:
    for name in SPLITS:
        lo, hi = getattr(protocol, name)
        if lo <= instance_id <= hi:
            return name
    if protocol.outside == "train":
        return "train"
    raise OutOfProtocol(f"instance {instance_id} lies outside the split protocol")


# --- configuration -------------------------------------------------------------------


@dataclass(frozen=True)
class DatasetConfig:
    suite: tuple[str, ...] = SUPPORTED_FUNCTIONS
    dims: tuple[int, ...] = (2, 3)
    instance_range: tuple[int, int] = (1, 60)
    repetitions: int = 2
    representation: str = "ela"
    # None selects the per-representation default, see sample_size_for
    sample_size: int | None = None
    global_seed: int = DEFAULT_GLOBAL_SEED
    cloud_k: int = 3
    cloud_p: str = "inf"
    cloud_delta_max: float = 1.5
    splits: SplitProtocol = field(default_factory=lambda: SplitProtocol.scaled(1, 60))

    def __post_init__(self):
        object.__setattr__(self, "suite", tuple(str(f).upper() for f in self.suite))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "instance_range", tuple(int(i) for i in self.instance_range))
        if self.representation not in REPRESENTATIONS:
            raise ValueError(f"representation must be one of {REPRESENTATIONS}")
        for fid in self.suite:
            if fid not in SUPPORTED_FUNCTIONS:
                raise ValueError(f"unsupported function {fid}")
        lo, hi = self.instance_range
        if lo < 1 or hi < lo:
            raise ValueError("instance range must satisfy 1 <= lo <= hi")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")

    def sample_size_for(self, dim: int) -> int:
        if self.sample_size is not None:
            return int(self.sample_size)
        if self.representation == "ela":
            return 250 * dim
        if self.representation == "cloud":
            return 100
        return 1000

    def sample_size_policy(self) -> str:
        if self.sample_size is not None:
            return f"fixed:{int(self.sample_size)}"
        return {"ela": "250*dim", "cloud": "fixed:100"}.get(self.representation, "fixed:1000")

    def keys(self) -> list[ProblemKey]:
        lo, hi = self.instance_range
        return [
            ProblemKey(fid, d, i, r)
            for fid in self.suite
            for d in self.dims
            for i in range(lo, hi + 1)
            for r in range(1, self.repetitions + 1)
        ]

    def to_dict(self) -> dict:
        data = asdict(self)
        data["suite"] = list(self.suite)
        data["dims"] = list(self.dims)
        data["instance_range"] = list(self.instance_range)
        data["splits"] = self.splits.to_dict()
        data["sample_size_policy"] = self.sample_size_policy()
        data["seed_rule"] = SEED_RULE
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetConfig":
        data = dict(data)
        data.pop("sample_size_policy", None)
        data.pop("seed_rule", None)
        if "splits" in data and isinstance(data["splits"], dict):
            data["splits"] = SplitProtocol.from_dict(data["splits"])
        for name in ("suite", "dims", "instance_range"):
            if name in data:
                data[name] = tuple(data[name])
        return cls(**data)


DESK_CONFIG = DatasetConfig()


def expected_entries(n_functions: int, n_dims: int, instance_range: tuple[int, int],
                     repetitions: int) -> int:
    lo, hi = instance_range
    return n_functions * n_dims * (hi - lo + 1) * repetitions


# --- manifest -------------------------------------------------------------------------


@dataclass
class ManifestEntry:
    key: ProblemKey
    seed: int
    path: str            # primary artifact, relative to the dataset root
    files: list[str]     # every file of the entry, relative, sorted
    sha256: str          # over the concatenated bytes of ``files``

    def to_dict(self) -> dict:
        return {
            "key": {"function_id": self.key.function_id, "dim": self.key.dim,
                    "instance_id": self.key.instance_id, "repetition": self.key.repetition},
            "seed": str(self.seed),
            "path": self.path,
            "files": list(self.files),
            "sha256": self.sha256,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ManifestEntry":
        k = data["key"]
        key = ProblemKey(k["function_id"], int(k["dim"]), int(k["instance_id"]), int(k["repetition"]))
        return cls(key, int(data["seed"]), data["path"], list(data["files"]), data["sha256"])


@dataclass
class DatasetManifest:
    config: DatasetConfig
    entries: list[ManifestEntry]
    root: Path | None = None

    @property
    def representation(self) -> str:
        return self.config.representation

    def to_json(self) -> str:
        payload = {
            "schema_version": SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "entries": [e.to_dict() for e in self.entries],
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str, root: Path | None = None) -> "DatasetManifest":
        payload = json.loads(text)
        version = payload.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported manifest schema version {version!r}")
        config = DatasetConfig.from_dict(payload["config"])
        entries = [ManifestEntry.from_dict(e) for e in payload["entries"]]
        return cls(config, entries, root)

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()

    def save(self, root=None) -> Path:
        root = Path(root or self.root)
        path = root / MANIFEST_NAME
        path.write_text(self.to_json(), encoding="utf-8")
        return path

    def verify(self) -> list[ProblemKey]:
        """Keys whose files are missing or do not match their hash."""
        bad = []
        for e in self.entries:
            try:
                if _hash_files(self.root, e.files) != e.sha256:
                    bad.append(e.key)
            except OSError:
                bad.append(e.key)
        return bad


def load_manifest(root) -> DatasetManifest:
    root = Path(root)
    path = root / MANIFEST_NAME
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"no dataset manifest at {path}", key=str(path)) from exc
    return DatasetManifest.from_json(text, root)


def _hash_files(root: Path, files: Iterable[str]) -> str:
    h = hashlib.sha256()
    for rel in files:
        h.update((Path(root) / rel).read_bytes())
    return h.hexdigest()


# --- artifact production ------------------------------------------------------------------


def _write_sidecar(path: Path, payload: dict) -> Path:
    side = path.with_name(path.name + ".json")
    side.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return side


def produce_artifact(config: DatasetConfig, key: ProblemKey, root: Path) -> ManifestEntry:
    """Draw the key's sample, build its representation and write the files."""
    seed = derive_seed(key, config.global_seed)
    problem = make_problem(key.function_id, key.dim, key.instance_id)
    sample = draw_sample(problem, config.sample_size_for(key.dim), seed, key.repetition)
    rep = config.representation
    subdir = root / rep
    subdir.mkdir(parents=True, exist_ok=True)
    ref = key.as_tuple()
    # json can't hold a 64-bit seed losslessly in every reader; store as text
    seed_text = str(seed)

    if rep == "ela":
        path = subdir / f"{key.stem}.csv"
        elafeat.write_features_csv(path, [elafeat.feature_vector(sample)])
        files = [path, _write_sidecar(path, {"problem_ref": list(ref), "seed": seed_text,
                                             "n": sample.n, "representation": rep})]
    elif rep == "cloud":
        cfg = fitcloud.CloudConfig(config.cloud_k, config.cloud_p, config.cloud_delta_max)
        emb = fitcloud.embed_cloud(sample.X, sample.y, cfg, sample.bounds)
        path = fitcloud.write_cloud(emb, subdir / f"{key.stem}.f32", ref, seed_text)
        files = [path, path.with_name(path.name + ".json")]
    else:
        method = _MAP_METHODS[rep]
        fmap_ = fitmap.build_map(sample, method)
        if method is fitmap.MapMethod.MC:
            path = fitmap.write_tensor(fmap_, subdir / f"{key.stem}.f32", ref, seed_text)
            files = [path, path.with_name(path.name + ".occ"), path.with_name(path.name + ".json")]
        else:
            path = fitmap.write_pgm(fmap_, subdir / f"{key.stem}.pgm")
            files = [path, _write_sidecar(path, {"problem_ref": list(ref), "seed": seed_text,
                                                 "method": method.value, "n": sample.n,
                                                 "resolution": fmap_.resolution})]
    rel = sorted(str(f.relative_to(root).as_posix()) for f in files)
    return ManifestEntry(key, seed, path.relative_to(root).as_posix(), rel, _hash_files(root, rel))


def _worker(args) -> dict:
    config_dict, key_tuple, root = args
    config = DatasetConfig.from_dict(config_dict)
    key = ProblemKey(*key_tuple)
    try:
        return produce_artifact(config, key, Path(root)).to_dict()
    except OSError as exc:
        raise IoError(f"failed to write artifact for {key}: {exc}", key=key_tuple) from exc


def _load_resume_entries(root: Path, config: DatasetConfig) -> dict[ProblemKey, ManifestEntry]:
    done: dict[ProblemKey, ManifestEntry] = {}
    final = root / MANIFEST_NAME
    if final.exists():
        try:
            manifest = DatasetManifest.from_json(final.read_text(encoding="utf-8"), root)
            if manifest.config == config:
                done.update((e.key, e) for e in manifest.entries)
        except (ValueError, KeyError):
            pass
    partial = root / PARTIAL_NAME
    if partial.exists():
        lines = partial.read_text(encoding="utf-8").splitlines()
        if lines and json.loads(lines[0]) == config.to_dict():
            for line in lines[1:]:
                try:
                    entry = ManifestEntry.from_dict(json.loads(line))
                except (ValueError, KeyError):
                    continue  # torn final line of an interrupted build
                done[entry.key] = entry
    verified = {}
    for key, entry in done.items():
        try:
            if _hash_files(root, entry.files) == entry.sha256:
                verified[key] = entry
        except OSError:
            pass
    return verified


def build_dataset(config: DatasetConfig, root, jobs: int = 1) -> DatasetManifest:
    """Build (or resume) the dataset under ``root``; output is independent of ``jobs``."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    keys = sorted(config.keys(), key=ProblemKey.sort_key)
    done = _load_resume_entries(root, config)
    todo = [k for k in keys if k not in done]
    log.info("dataset %s: %d keys, %d to build, jobs=%d",
             config.representation, len(keys), len(todo), jobs)

    partial = root / PARTIAL_NAME
    with partial.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps(config.to_dict(), sort_keys=True) + "\n")
        for k in keys:
            if k in done:
                fh.write(json.dumps(done[k].to_dict(), sort_keys=True) + "\n")
        fh.flush()
        args = [(config.to_dict(), k.as_tuple(), str(root)) for k in todo]
        if jobs > 1 and len(args) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = pool.map(_worker, args, chunksize=max(1, len(args) // (jobs * 8)))
                for res in results:
                    entry = ManifestEntry.from_dict(res)
                    done[entry.key] = entry
                    fh.write(json.dumps(res, sort_keys=True) + "\n")
        else:
            for a in args:
                res = _worker(a)
                entry = ManifestEntry.from_dict(res)
                done[entry.key] = entry
                fh.write(json.dumps(res, sort_keys=True) + "\n")

    manifest = DatasetManifest(config, [done[k] for k in keys], root)
    manifest.save()
    partial.unlink()
    return manifest


# --- split loading ------------------------------------------------------------------------


@dataclass
class SplitData:
    rows: np.ndarray                 # (m, p) design rows
    labels: list                     # PropertyLabels per row
    keys: list[ProblemKey]
    feature_names: tuple[str, ...] | None = None

    @property
    def dims(self) -> np.ndarray:
        return np.array([k.dim for k in self.keys])


def _read_rows(manifest: DatasetManifest, entries: list[ManifestEntry]):
    from fitscape.evalharness import flatten_artifact  # evalharness imports this module

    rows = []
    for e in entries:
        path = Path(manifest.root) / e.path
        rows.append(flatten_artifact(path, manifest.representation))
    return rows


def load_all_splits(manifest: DatasetManifest, label_source=labels) -> dict[str, SplitData]:
    """Rows of every split; for ELA, columns Missing anywhere are dropped everywhere."""
    if manifest.root is None:
        raise IoError("manifest has no root directory")
    protocol = manifest.config.splits
    raw = _read_rows(manifest, manifest.entries)
    matrix = np.vstack(raw) if raw else np.empty((0, 0))
    names = None
    if manifest.representation == "ela":
        keep = ~np.any(np.isnan(matrix), axis=0)
        matrix = matrix[:, keep]
        names = tuple(n for n, k in zip(elafeat.FEATURE_NAMES, keep) if k)
    out = {}
    assignment = [assign_split(e.key.instance_id, protocol) for e in manifest.entries]
    for split in SPLITS:
        idx = [i for i, s in enumerate(assignment) if s == split]
        keys = [manifest.entries[i].key for i in idx]
        out[split] = SplitData(
            matrix[idx] if idx else np.empty((0, matrix.shape[1] if matrix.ndim == 2 else 0)),
            [label_source(k.function_id) for k in keys],
            keys,
            names,
        )
    return out


def load_split(manifest: DatasetManifest, split: str, label_source=labels) -> SplitData:
    if split not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}")
    data = load_all_splits(manifest, label_source)[split]
    if not data.keys:
        raise EmptySplit(f"split {split!r} has no rows")
    return data
