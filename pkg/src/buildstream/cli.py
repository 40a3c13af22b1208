"""Command-line entry point: ``buildstream {gen,smote,pipeline,export-tree}``.

Every long option can also be set through an environment variable named
``BUILDSTREAM_`` plus the option name upper-cased with dashes turned into
underscores (``--smote-percent`` -> ``BUILDSTREAM_SMOTE_PERCENT``).  Command
line values win over the environment.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

from . import __version__
from .adwin import AdwinDetector
from .datagen import GenSpec, generate_stream
from .evaluation import RunConfig, prequential_run
from .hoeffding import HoeffdingTree, SplitConfig, export_dot
from .smote import RNG_ALGORITHM, SmoteConfig, SmoteError, double_smote
from .stream import DEFAULT_SCHEMA, LabeledStream, StreamError, StreamSchema, parse_stream, serialize_stream, sort_by_date

ENV_PREFIX = "BUILDSTREAM_"
EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

SERIES_FILE = "series.csv"
SUMMARY_FILE = "summary.json"
TREE_FILE = "tree.dot"
TREE_STATS_FILE = "tree_stats.json"
MANIFEST_FILE = "manifest.json"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _env_defaults(parser: argparse.ArgumentParser, environ) -> None:
    for action in parser._actions:
        long_opts = [o for o in action.option_strings if o.startswith("--")]
        if not long_opts or action.dest == "help":
            continue
        key = ENV_PREFIX + long_opts[0][2:].upper().replace("-", "_")
        if key not in environ:
            continue
        raw = environ[key]
        try:
            value = action.type(raw) if action.type else raw
        except (TypeError, ValueError):
            raise UsageError(f"environment variable {key}={raw!r} is not valid for {long_opts[0]}") from None
        if action.choices is not None and value not in action.choices:
            raise UsageError(f"environment variable {key}={raw!r} must be one of {list(action.choices)}")
        action.default = value
        action.required = False


def _add_smote_flags(p: argparse.ArgumentParser, percent_flag: str, default_percent: int) -> None:
    p.add_argument(percent_flag, dest="percent", type=int, default=default_percent, help="oversampling amount, multiple of 100")
    p.add_argument("--k", type=int, default=5, help="nearest neighbours per seed")
    p.add_argument("--normalization", choices=("minmax", "none"), default="minmax", help="distance scaling")


def _add_tree_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--delta", type=float, default=1e-7, help="split confidence complement")
    p.add_argument("--tau", type=float, default=0.05, help="tie threshold")
    p.add_argument("--grace", type=int, default=200, help="grace period between split checks")
    p.add_argument("--candidates", type=int, default=10, help="candidate thresholds per attribute")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="buildstream", description="Stream mining of build outcomes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", help="write a synthetic build stream")
    gen.add_argument("--output", "-o", required=True)
    gen.add_argument("--n", type=int, default=199)
    gen.add_argument("--success", type=int, default=None, help="success count (default keeps the 127:72 ratio)")
    gen.add_argument("--overlap", type=float, default=1.0, help="class separation in standard deviations")
    gen.add_argument("--informative", type=int, default=5, help="number of informative columns")
    gen.add_argument("--shift-point", type=int, default=None)
    gen.add_argument("--post-shift-prob", type=float, default=None)
    gen.add_argument("--step-seconds", type=int, default=86400)
    gen.add_argument("--seed", type=int, default=0)

    sm = sub.add_parser("smote", help="augment a stream with the two-pass SMOTE protocol")
    sm.add_argument("--input", "-i", required=True)
    sm.add_argument("--output", "-o", required=True)
    sm.add_argument("--schema", default=None, help="JSON schema override")
    _add_smote_flags(sm, "--percent", 900)
    sm.add_argument("--seed", type=int, default=0)

    pipe = sub.add_parser("pipeline", help="sort, oversample, run prequentially, export")
    pipe.add_argument("--input", "-i", default=None)
    pipe.add_argument("--out-dir", "-o", default="out")
    pipe.add_argument("--schema", default=None, help="JSON schema override")
    _add_smote_flags(pipe, "--smote-percent", 900)
    _add_tree_flags(pipe)
    pipe.add_argument("--window", type=int, default=100, help="window for windowed metrics")
    pipe.add_argument("--adwin-delta", type=float, default=0.002)
    pipe.add_argument("--drift-action", choices=("record", "reset-tree"), default="record")
    pipe.add_argument("--seed", type=int, default=0)
    pipe.add_argument("--repeat", type=int, default=1, help="runs with seeds seed, seed+1, ...")
    pipe.add_argument("--jobs", type=int, default=1)
    pipe.add_argument("--replay", default=None, help="re-run the configuration recorded in a manifest")

    ex = sub.add_parser("export-tree", help="train on a stream and print the final tree as DOT")
    ex.add_argument("--input", "-i", required=True)
    ex.add_argument("--output", "-o", default=None, help="DOT file (default stdout)")
    ex.add_argument("--stats", default=None, help="write tree stats JSON here (default stderr)")
    ex.add_argument("--schema", default=None, help="JSON schema override")
    _add_smote_flags(ex, "--smote-percent", 0)
    _add_tree_flags(ex)
    ex.add_argument("--seed", type=int, default=0)
    return parser


def _parse_args(argv: Sequence[str] | None, environ) -> argparse.Namespace:
    parser = build_parser()
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for p in subparsers.choices.values():
        _env_defaults(p, environ)
    return parser.parse_args(argv)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _load_schema(path: str | None) -> StreamSchema:
    if path is None:
        return DEFAULT_SCHEMA
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if "metric_columns" in raw:
            raw["metric_columns"] = tuple(raw["metric_columns"])
        return StreamSchema(**raw)
    except (OSError, ValueError, TypeError) as exc:
        raise UsageError(f"cannot load schema {path}: {exc}") from None


def _read_input(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None


def _write_atomic(files: dict[Path, bytes]) -> None:
    """Write every file or none: stage in temp files, then rename into place."""
    staged = []
    try:
        for path, data in files.items():
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            staged.append((tmp, path))
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, path in staged:
        os.replace(tmp, path)


def _configs(args) -> tuple[SmoteConfig, SplitConfig, RunConfig]:
    try:
        smote = SmoteConfig(k=args.k, percent=args.percent, seed=args.seed, distance_normalization=args.normalization)
        split = SplitConfig(delta=args.delta, tau=args.tau, grace_period=args.grace, candidate_thresholds=args.candidates)
        run = RunConfig(
            window_size=getattr(args, "window", 100),
            drift_action=getattr(args, "drift_action", "record"),
            seed=args.seed,
            split=split,
            smote=smote,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return smote, split, run


def run_pipeline(data: bytes, schema: StreamSchema, run: RunConfig, adwin_delta: float = 0.002) -> dict[str, bytes]:
    """Run the full pipeline on CSV bytes and return the output files by name."""
    stream = sort_by_date(parse_stream(data, schema))
    augmented = double_smote(stream, run.smote.percent, run.smote)
    tree = HoeffdingTree(schema.n_features, run.split, schema.metric_columns)
    series = prequential_run(augmented, tree, AdwinDetector(adwin_delta), run)
    dot, stats = export_dot(tree)
    summary = series.summary()
    summary["class_counts"] = {"before": list(stream.class_counts()), "after": list(augmented.class_counts())}
    return {
        SERIES_FILE: series.to_csv().encode(),
        SUMMARY_FILE: (json.dumps(summary, sort_keys=True) + "\n").encode(),
        TREE_FILE: dot.encode(),
        TREE_STATS_FILE: (json.dumps(stats.as_dict()) + "\n").encode(),
    }


def _pipeline_job(payload: tuple) -> dict[str, bytes]:
    data, schema, run, adwin_delta = payload
    return run_pipeline(data, schema, run, adwin_delta)


def _resolved_config(args, schema: StreamSchema, run: RunConfig) -> dict:
    return {
        "schema": {
            "metric_columns": list(schema.metric_columns),
            "date_column": schema.date_column,
            "outcome_column": schema.outcome_column,
            "id_column": schema.id_column,
        },
        "smote": dataclasses.asdict(run.smote),
        "split": dataclasses.asdict(run.split),
        "window_size": run.window_size,
        "drift_action": run.drift_action,
        "adwin_delta": args.adwin_delta,
        "seed": run.seed,
        "repeat": args.repeat,
    }


def _apply_manifest(args) -> None:
    try:
        manifest = json.loads(Path(args.replay).read_text(encoding="utf-8"))
        cfg = manifest["config"]
        args.input = manifest["input"]["path"]
        args.schema_dict = cfg["schema"]
        args.percent = cfg["smote"]["percent"]
        args.k = cfg["smote"]["k"]
        args.normalization = cfg["smote"]["distance_normalization"]
        args.delta = cfg["split"]["delta"]
        args.tau = cfg["split"]["tau"]
        args.grace = cfg["split"]["grace_period"]
        args.candidates = cfg["split"]["candidate_thresholds"]
        args.window = cfg["window_size"]
        args.drift_action = cfg["drift_action"]
        args.adwin_delta = cfg["adwin_delta"]
        args.seed = cfg["seed"]
        args.repeat = cfg["repeat"]
        args.expected_input_sha256 = manifest["input"]["sha256"]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot replay manifest {args.replay}: {exc}") from None


def cmd_pipeline(args) -> int:
    schema = _load_schema(args.schema)
    if args.replay:
        _apply_manifest(args)
        schema_dict = dict(args.schema_dict)
        schema_dict["metric_columns"] = tuple(schema_dict["metric_columns"])
        schema = StreamSchema(**schema_dict)
    if args.input is None:
        raise UsageError("pipeline: --input is required")
    if args.repeat < 1 or args.jobs < 1:
        raise UsageError("--repeat and --jobs must be >= 1")
    if not 0 < args.adwin_delta < 1:
        raise UsageError("--adwin-delta must lie in (0, 1)")
    _, _, run = _configs(args)
    data = _read_input(args.input)
    digest = _sha256(data)
    if getattr(args, "expected_input_sha256", digest) != digest:
        raise DataError(f"input {args.input} does not match the manifest hash")

    runs = [dataclasses.replace(run, seed=run.seed + i, smote=dataclasses.replace(run.smote, seed=run.seed + i)) for i in range(args.repeat)]
    payloads = [(data, schema, r, args.adwin_delta) for r in runs]
    try:
        if args.jobs > 1 and len(runs) > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                results = list(pool.map(_pipeline_job, payloads))
        else:
            results = [_pipeline_job(p) for p in payloads]
    except (StreamError, SmoteError) as exc:
        raise DataError(str(exc)) from None

    out_dir = Path(args.out_dir)
    files: dict[Path, bytes] = {}
    for i, result in enumerate(results):
        sub = out_dir if len(results) == 1 else out_dir / f"run-{i:03d}"
        for name, blob in result.items():
            files[sub / name] = blob
    manifest = {
        "tool": "buildstream",
        "version": __version__,
        "command": "pipeline",
        "config": _resolved_config(args, schema, run),
        "input": {"path": args.input, "sha256": digest},
        "seed": run.seed,
        "rng": RNG_ALGORITHM,
        "outputs": [
            {"file": path.relative_to(out_dir).as_posix(), "sha256": _sha256(blob)} for path, blob in files.items()
        ],
    }
    files[out_dir / MANIFEST_FILE] = (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode()
    _write_atomic(files)
    summary = json.loads(results[0][SUMMARY_FILE])
    print(
        f"{summary['instances']} instances, final accuracy {summary['cumulative_accuracy']['end']:.4f}, "
        f"outputs in {out_dir}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_gen(args) -> int:
    success = args.success if args.success is not None else round(args.n * 127 / 199)
    try:
        spec = GenSpec(
            n_instances=args.n,
            success_count=success,
            failure_count=args.n - success,
            overlap=args.overlap,
            n_informative=args.informative,
            shift_point=args.shift_point,
            post_shift_success_prob=args.post_shift_prob,
            seed=args.seed,
            step_seconds=args.step_seconds,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    text = serialize_stream(generate_stream(spec))
    _write_atomic({Path(args.output): text.encode()})
    return EXIT_OK


def _load_stream(path: str, schema: StreamSchema) -> LabeledStream:
    try:
        return sort_by_date(parse_stream(_read_input(path), schema))
    except StreamError as exc:
        raise DataError(f"{path}: {exc}") from None


def cmd_smote(args) -> int:
    schema = _load_schema(args.schema)
    try:
        config = SmoteConfig(k=args.k, percent=args.percent, seed=args.seed, distance_normalization=args.normalization)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    stream = _load_stream(args.input, schema)
    try:
        augmented = double_smote(stream, config.percent, config)
    except SmoteError as exc:
        raise DataError(str(exc)) from None
    text = serialize_stream(augmented, provenance=True)
    _write_atomic({Path(args.output): text.encode()})
    return EXIT_OK


def cmd_export_tree(args) -> int:
    schema = _load_schema(args.schema)
    smote, split, _ = _configs(args)
    stream = _load_stream(args.input, schema)
    try:
        stream = double_smote(stream, smote.percent, smote)
    except SmoteError as exc:
        raise DataError(str(exc)) from None
    tree = HoeffdingTree(schema.n_features, split, schema.metric_columns)
    X, y = stream.feature_matrix(), stream.labels()
    for xi, yi in zip(X, y):
        tree.learn_one(xi, int(yi))
    dot, stats = export_dot(tree)
    stats_line = json.dumps(stats.as_dict()) + "\n"
    files = {}
    if args.output:
        files[Path(args.output)] = dot.encode()
    if args.stats:
        files[Path(args.stats)] = stats_line.encode()
    _write_atomic(files)
    if not args.output:
        sys.stdout.write(dot)
    if not args.stats:
        sys.stderr.write(stats_line)
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "smote": cmd_smote, "pipeline": cmd_pipeline, "export-tree": cmd_export_tree}


def main(argv: Sequence[str] | None = None, environ=None) -> int:
    environ = os.environ if environ is None else environ
    try:
        args = _parse_args(argv, environ)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
