"""Command-line entry point: ``fitscape <subcommand> [flags]``.

Every subcommand accepts ``--config FILE`` (a flat JSON object whose keys are
flag names with dashes replaced by underscores); explicit flags override file
values.  The fully resolved configuration is written to
``<out>/resolved_config.json``.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from fitscape import dataset, elafeat, evalharness, fitcloud, fitmap
from fitscape.dataset import DatasetConfig, ProblemKey, SplitProtocol
from fitscape.errors import FitscapeError
from fitscape.problems import SUPPORTED_FUNCTIONS, make_problem
from fitscape.sampling import draw_sample

log = logging.getLogger("fitscape")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
RESOLVED_NAME = "resolved_config.json"

_PROBLEM_DEFAULTS = {"function": "F1", "dim": 2, "instance": 1, "rep": 1, "seed": None, "out": "."}

DEFAULTS = {
    "sample": {**_PROBLEM_DEFAULTS, "n": 1000},
    "map": {**_PROBLEM_DEFAULTS, "n": 1000, "method": "pca", "resolution": fitmap.RESOLUTION},
    "cloud": {**_PROBLEM_DEFAULTS, "n": 100, "k": 3, "p": "inf", "delta_max": 1.5},
    "features": {**_PROBLEM_DEFAULTS, "n": None},
    "dataset": {
        "suite": list(SUPPORTED_FUNCTIONS), "dims": [2, 3], "instances": "1-60", "reps": 2,
        "representation": "ela", "n": None, "seed": None, "out": "dataset", "jobs": 1,
        "k": 3, "p": "inf", "delta_max": 1.5,
    },
    "eval": {"out": "dataset", "classifier": "best", "representation": None},
    "inspect": {"path": None, "out": None},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors routed to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [t.upper() for t in text.replace(",", " ").split()]


def _range(text) -> tuple[int, int]:
    if isinstance(text, (list, tuple)) and len(text) == 2:
        lo, hi = text
    else:
        parts = str(text).split("-")
        if len(parts) == 1:
            parts = parts * 2
        if len(parts) != 2:
            raise UsageError(f"instance range must look like LO-HI, got {text!r}")
        lo, hi = parts
    try:
        return int(lo), int(hi)
    except ValueError:
        raise UsageError(f"instance range must look like LO-HI, got {text!r}") from None


def _add_problem_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--function", help="benchmark function, one of "
                   + ", ".join(SUPPORTED_FUNCTIONS) + " (default: F1)")
    p.add_argument("--dim", type=int, help="search-space dimension (default: 2)")
    p.add_argument("--instance", type=int, help="instance id, 0 is untransformed (default: 1)")
    p.add_argument("--rep", type=int, help="repetition index used for seeding (default: 1)")
    p.add_argument("--seed", type=int,
                   help="global seed (default: $LANDSCAPE_SEED, else the package default)")


def _add_common(p: argparse.ArgumentParser, out_help: str) -> None:
    p.add_argument("--config", help="JSON file with default values for these flags")
    p.add_argument("--out", help=out_help)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fitscape", description="Landscape representations of benchmark samples.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    kw = {"argument_default": argparse.SUPPRESS}

    p = sub.add_parser("sample", help="draw an LHS sample and write it as JSON", **kw)
    _add_problem_flags(p)
    p.add_argument("--n", type=int, help="sample size (default: 1000)")
    _add_common(p, "output directory (default: .)")

    p = sub.add_parser("map", help="build a fitness map", **kw)
    _add_problem_flags(p)
    p.add_argument("--n", type=int, help="sample size (default: 1000)")
    p.add_argument("--method", choices=("pca", "pcafunc", "mc", "rmc"),
                   help="reduction method (default: pca)")
    p.add_argument("--resolution", type=int, help=f"raster size R (default: {fitmap.RESOLUTION})")
    _add_common(p, "output directory (default: .)")

    p = sub.add_parser("cloud", help="build a fitness-cloud embedding", **kw)
    _add_problem_flags(p)
    p.add_argument("--n", type=int, help="number of points (default: 100)")
    p.add_argument("--k", type=int, help="neighbourhood size including the point itself (default: 3)")
    p.add_argument("--p", help="distance norm: 1, 2 or inf (default: inf)")
    p.add_argument("--delta-max", type=float, help="neighbour distance limit (default: 1.5)")
    _add_common(p, "output directory (default: .)")

    p = sub.add_parser("features", help="compute the ELA feature vector as CSV", **kw)
    _add_problem_flags(p)
    p.add_argument("--n", type=int, help="sample size (default: 250*dim)")
    _add_common(p, "output directory (default: .)")

    p = sub.add_parser("dataset", help="build a dataset and its manifest", **kw)
    p.add_argument("--suite", type=_str_list, help="comma-separated function ids (default: all six)")
    p.add_argument("--dims", type=_int_list, help="comma-separated dimensions (default: 2,3)")
    p.add_argument("--instances", help="inclusive instance range LO-HI (default: 1-60)")
    p.add_argument("--reps", type=int, help="repetitions per problem (default: 2)")
    p.add_argument("--representation", choices=dataset.REPRESENTATIONS,
                   help="artifact type (default: ela)")
    p.add_argument("--n", type=int, help="fixed sample size (default: per representation)")
    p.add_argument("--seed", type=int,
                   help="global seed (default: $LANDSCAPE_SEED, else the package default)")
    p.add_argument("--jobs", type=int, help="worker processes; output does not depend on it (default: 1)")
    p.add_argument("--k", type=int, help="cloud neighbourhood size (default: 3)")
    p.add_argument("--p", help="cloud distance norm (default: inf)")
    p.add_argument("--delta-max", type=float, help="cloud neighbour distance limit (default: 1.5)")
    _add_common(p, "dataset root (default: dataset)")

    p = sub.add_parser("eval", help="train and score the property classifiers", **kw)
    p.add_argument("--classifier", choices=("knn", "logistic", "best"),
                   help="base classifier; best searches both grids (default: best)")
    p.add_argument("--representation", choices=dataset.REPRESENTATIONS,
                   help="expected representation of the dataset (default: whatever it holds)")
    _add_common(p, "dataset root; the report is written there (default: dataset)")

    p = sub.add_parser("inspect", help="summarise a dataset or an artifact file", **kw)
    p.add_argument("path", help="dataset root or artifact file")
    _add_common(p, "directory for resolved_config.json (default: none)")
    return parser


def resolve(command: str, namespace: argparse.Namespace) -> dict:
    """Defaults, then config-file values, then explicit flags."""
    explicit = {k: v for k, v in vars(namespace).items()
                if k not in ("command", "config", "verbose")}
    resolved = dict(DEFAULTS[command])
    config_path = getattr(namespace, "config", None)
    if config_path:
        try:
            data = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise UsageError(f"cannot read config file {config_path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {config_path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = sorted(set(data) - set(resolved))
        if unknown:
            raise UsageError(f"unknown key(s) for '{command}' in config file: {', '.join(unknown)}")
        resolved.update(data)
    resolved.update(explicit)
    if "seed" in resolved:
        resolved["seed"] = dataset.resolve_global_seed(resolved["seed"])
    return resolved


def _write_resolved(out: Path, command: str, resolved: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    payload = {"command": command, **resolved}
    (out / RESOLVED_NAME).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")


def _problem_sample(cfg: dict, n: int):
    key = ProblemKey(str(cfg["function"]).upper(), int(cfg["dim"]), int(cfg["instance"]), int(cfg["rep"]))
    problem = make_problem(key.function_id, key.dim, key.instance_id)
    seed = dataset.derive_seed(key, cfg["seed"])
    return key, draw_sample(problem, n, seed, key.repetition)


def cmd_sample(cfg: dict, out: Path) -> int:
    key, sample = _problem_sample(cfg, int(cfg["n"]))
    payload = {
        "problem_ref": list(sample.problem_ref),
        "seed": str(sample.seed),
        "lower": sample.lower.tolist(),
        "upper": sample.upper.tolist(),
        "X": sample.X.tolist(),
        "y": sample.y.tolist(),
    }
    path = out / f"{key.stem}.sample.json"
    path.write_text(json.dumps(payload) + "\n", encoding="utf-8")
    print(f"{path}: n={sample.n} d={sample.dim} min(y)={sample.y.min():.6g}")
    return EXIT_OK


def cmd_map(cfg: dict, out: Path) -> int:
    key, sample = _problem_sample(cfg, int(cfg["n"]))
    method = fitmap.MapMethod.parse(cfg["method"])
    fmap_ = fitmap.build_map(sample, method, int(cfg["resolution"]))
    ref = key.as_tuple()
    if method is fitmap.MapMethod.MC:
        path = fitmap.write_tensor(fmap_, out / f"{key.stem}.mc.f32", ref, str(sample.seed))
    else:
        path = fitmap.write_pgm(fmap_, out / f"{key.stem}.{method.value.lower()}.pgm")
        side = {"problem_ref": list(ref), "seed": str(sample.seed), "method": method.value,
                "n": sample.n, "resolution": fmap_.resolution}
        path.with_name(path.name + ".json").write_text(
            json.dumps(side, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    occupied = int(fmap_.occupancy.sum())
    print(f"{path}: method={method.value} channels={fmap_.channels} "
          f"occupied_channels={fmap_.occupied_channels()} occupied_pixels={occupied}")
    return EXIT_OK


def cmd_cloud(cfg: dict, out: Path) -> int:
    key, sample = _problem_sample(cfg, int(cfg["n"]))
    ccfg = fitcloud.CloudConfig(int(cfg["k"]), cfg["p"], float(cfg["delta_max"]))
    emb = fitcloud.embed_cloud(sample.X, sample.y, ccfg, sample.bounds)
    path = fitcloud.write_cloud(emb, out / f"{key.stem}.cloud.f32", key.as_tuple(), str(sample.seed))
    print(f"{path}: rows={emb.n_points} width={emb.embedded.shape[1]}")
    return EXIT_OK


def cmd_features(cfg: dict, out: Path) -> int:
    n = cfg["n"] if cfg["n"] is not None else 250 * int(cfg["dim"])
    key, sample = _problem_sample(cfg, int(n))
    vec = elafeat.feature_vector(sample)
    path = out / f"{key.stem}.ela.csv"
    elafeat.write_features_csv(path, [vec], ("function_id", "dim", "instance_id", "repetition"),
                               [key.as_tuple()])
    print(f"{path}: {len(vec.values)} features, {int(vec.missing.sum())} missing")
    return EXIT_OK


def dataset_config(cfg: dict) -> DatasetConfig:
    lo, hi = _range(cfg["instances"])
    suite = cfg["suite"]
    dims = cfg["dims"]
    if isinstance(suite, str):
        suite = _str_list(suite)
    if isinstance(dims, (str, int)):
        dims = _int_list(str(dims))
    return DatasetConfig(
        suite=tuple(suite), dims=tuple(dims), instance_range=(lo, hi),
        repetitions=int(cfg["reps"]), representation=cfg["representation"],
        sample_size=cfg["n"], global_seed=int(cfg["seed"]),
        cloud_k=int(cfg["k"]), cloud_p=str(cfg["p"]), cloud_delta_max=float(cfg["delta_max"]),
        splits=SplitProtocol.scaled(lo, hi),
    )


def cmd_dataset(cfg: dict, out: Path) -> int:
    config = dataset_config(cfg)
    manifest = dataset.build_dataset(config, out, jobs=int(cfg["jobs"]))
    print(f"{out / dataset.MANIFEST_NAME}: {len(manifest.entries)} entries, "
          f"representation={config.representation}, sha256={manifest.digest()}")
    return EXIT_OK


def cmd_eval(cfg: dict, out: Path) -> int:
    manifest = dataset.load_manifest(out)
    report = evalharness.evaluate_protocol(manifest, cfg["representation"], cfg["classifier"])
    (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    (out / "report.txt").write_text(report.to_table(), encoding="utf-8")
    sys.stdout.write(report.to_table())
    return EXIT_OK


def _summarise_manifest(root: Path) -> list[str]:
    manifest = dataset.load_manifest(root)
    cfg = manifest.config
    counts = {s: 0 for s in dataset.SPLITS}
    for e in manifest.entries:
        counts[dataset.assign_split(e.key.instance_id, cfg.splits)] += 1
    bad = manifest.verify()
    return [
        f"dataset: {root}",
        f"representation: {cfg.representation}",
        f"suite: {', '.join(cfg.suite)}",
        f"dims: {', '.join(map(str, cfg.dims))}",
        f"instances: {cfg.instance_range[0]}-{cfg.instance_range[1]}, repetitions: {cfg.repetitions}",
        f"sample size: {cfg.sample_size_policy()}",
        f"entries: {len(manifest.entries)} "
        + " ".join(f"{s}={c}" for s, c in counts.items()),
        f"integrity: {'ok' if not bad else f'{len(bad)} entries missing or modified'}",
        f"sha256: {manifest.digest()}",
    ]


def _summarise_file(path: Path) -> list[str]:
    lines = [f"file: {path}", f"bytes: {path.stat().st_size}"]
    side = path.with_name(path.name + ".json")
    if side.exists():
        meta = json.loads(side.read_text(encoding="utf-8"))
        lines += [f"{k}: {meta[k]}" for k in sorted(meta)]
    suffix = path.suffix
    if suffix == ".pgm":
        fmap_ = fitmap.read_pgm(path)
        lines.append(f"occupied pixels: {int(fmap_.occupancy.sum())}")
    elif suffix == ".csv":
        names, _, values = elafeat.read_features_csv(path, _key_columns(path))
        lines.append(f"features: {len(names)}, rows: {len(values)}, "
                     f"missing: {int(np.isnan(values).sum())}")
    elif suffix == ".f32" and side.exists():
        meta = json.loads(side.read_text(encoding="utf-8"))
        if "occupancy_file" in meta:
            fmap_ = fitmap.read_tensor(path)
            lines.append(f"occupied channels: {fmap_.occupied_channels()}")
        else:
            emb = fitcloud.read_cloud(path)
            lines.append(f"matrix: {emb.shape[0]} x {emb.shape[1]}")
    return lines


def _key_columns(path: Path) -> int:
    header = path.read_text(encoding="utf-8").split("\n", 1)[0].split(",")
    return sum(1 for h in header if h in ("function_id", "dim", "instance_id", "repetition"))


def cmd_inspect(cfg: dict, out: Path | None) -> int:
    path = Path(cfg["path"])
    if path.is_dir():
        lines = _summarise_manifest(path)
    elif path.exists():
        lines = _summarise_file(path)
    else:
        raise FileNotFoundError(f"no such file or directory: {path}")
    print("\n".join(lines))
    return EXIT_OK


COMMANDS = {
    "sample": cmd_sample, "map": cmd_map, "cloud": cmd_cloud, "features": cmd_features,
    "dataset": cmd_dataset, "eval": cmd_eval, "inspect": cmd_inspect,
}


def _validate(command: str, cfg: dict) -> None:
    if "function" in cfg and str(cfg["function"]).upper() not in SUPPORTED_FUNCTIONS:
        raise UsageError(f"--function must be one of {', '.join(SUPPORTED_FUNCTIONS)}")
    if "method" in cfg and str(cfg["method"]).lower() not in ("pca", "pcafunc", "mc", "rmc"):
        raise UsageError("--method must be one of pca, pcafunc, mc, rmc")
    if "p" in cfg:
        try:
            fitcloud.parse_norm(cfg["p"])
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    for name in ("n", "k", "jobs", "reps", "dim", "resolution"):
        if cfg.get(name) is not None and int(cfg[name]) < 1:
            raise UsageError(f"--{name} must be positive")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    command = ns.command
    logging.basicConfig(level=logging.INFO if getattr(ns, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(command, ns)
        _validate(command, cfg)
    except (UsageError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"fitscape {command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    out = Path(cfg["out"]) if cfg.get("out") is not None else None
    try:
        if out is not None and command != "eval":
            out.mkdir(parents=True, exist_ok=True)
        if command == "eval" and not (out / dataset.MANIFEST_NAME).exists():
            dataset.load_manifest(out)  # raises with the manifest path in the message
        if out is not None:
            _write_resolved(out, command, cfg)
        return COMMANDS[command](cfg, out)
    except (FitscapeError, OSError, ValueError, KeyError) as exc:
        print(f"fitscape {command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
