"""Command-line interface.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 runtime error.
"""

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .conformal import ConformalRuleModel
from .data import PRNG_ALGORITHM, SplitSpec, load_dataset, random_split
from .decision import DecisionConfig, Mode, decide_array
from .errors import ConfigError, DataError
from .evaluation import (
    DEFAULT_ABSTENTION_GRID, DEFAULT_THETA_GRID, ExperimentConfig, ExperimentResult,
    conformity_dump_csv, dump_conformity_distributions, evaluate_split, run_experiment,
)
from .rules import DEFAULT_MIN_WIDTH, DEFAULT_STEPS, SearchSchedule

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class _Stage(Exception):
    def __init__(self, stage, exc):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage
        self.exc = exc


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_data_options(p, with_test=False):
    p.add_argument("--data", required=True, help="training data (.arff or .csv)")
    if with_test:
        p.add_argument("--test-data", help="optional pre-split test file; disables random splitting")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--labels-xml", help="Mulan label XML listing label attributes")
    group.add_argument("--labels", help="comma-separated label attribute names")
    group.add_argument("--n-labels", type=int, help="number of trailing label columns (CSV)")
    p.add_argument("--schedule-min", type=float, default=DEFAULT_MIN_WIDTH)
    p.add_argument("--schedule-max", type=float, default=1.0)
    p.add_argument("--schedule-steps", type=int, default=DEFAULT_STEPS)
    p.add_argument("--config", help="flat key=value file supplying defaults for flags")


def build_parser():
    parser = argparse.ArgumentParser(prog="conformal-rules",
                                     description="Conformal lazy rule learning for multi-label data.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="parse a dataset and print its shape")
    _add_data_options(p)

    p = sub.add_parser("experiment", help="repeated random-split evaluation")
    _add_data_options(p, with_test=True)
    p.add_argument("--splits", type=int, default=50)
    p.add_argument("--train-size", type=int, default=400)
    p.add_argument("--seed", type=int, default=2020)
    p.add_argument("--theta", type=float, default=1.0, help="theta used by the rejection curve")
    p.add_argument("--theta-grid", type=_float_list, default=list(DEFAULT_THETA_GRID))
    p.add_argument("--abstain-grid", type=_float_list, default=list(DEFAULT_ABSTENTION_GRID))
    p.add_argument("--dump-label", default="0", help="label (name or index) for conformity_dump.csv")
    p.add_argument("--jobs", type=int, default=1, help="worker processes; 0 = all cores")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("predict", help="per-label plausibilities and decisions for query rows")
    _add_data_options(p)
    p.add_argument("--query", required=True, help="CSV of feature rows (optional header, no labels)")
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.FORCE.value)
    p.add_argument("--abstain-threshold", type=float, default=0.1)
    p.add_argument("--out", help="output CSV (default: standard output)")

    p = sub.add_parser("dump-conformity", help="leave-one-out conformity scores and plausibilities")
    _add_data_options(p)
    p.add_argument("--label", required=True, help="label name or 0-based index")
    p.add_argument("--seed", type=int, default=2020)
    p.add_argument("--train-size", type=int, help="draw a random training split of this size (default: all rows)")
    p.add_argument("--out", help="output CSV (default: standard output)")
    return parser


def _read_config_file(path):
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}, line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.lstrip("-").replace("-", "_")] = value
    return values


def parse_args(argv):
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    early, _ = pre.parse_known_args(argv)
    sub = parser._subparsers._group_actions[0].choices.get(early.command)
    if early.config and sub is not None:
        if not Path(early.config).is_file():
            raise ConfigError(f"config file not found: {early.config}")
        defaults = _read_config_file(early.config)
        known = {a.dest: a for a in sub._actions}
        unknown = sorted(set(defaults) - set(known))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        converted = {}
        for key, text in defaults.items():
            action = known[key]
            converted[key] = action.type(text) if action.type else text
            action.required = False  # explicit flags still override
        sub.set_defaults(**converted)
    return parser.parse_args(argv)


def _label_names(args):
    if args.labels:
        return [s.strip() for s in args.labels.split(",") if s.strip()]
    return None


def _load(args, path):
    if not Path(path).is_file():
        raise DataError(f"data file not found: {path}")
    if args.labels_xml and not Path(args.labels_xml).is_file():
        raise DataError(f"label XML not found: {args.labels_xml}")
    return load_dataset(path, label_names=_label_names(args), labels_xml=args.labels_xml,
                        n_labels=args.n_labels)


def _schedule(args):
    return SearchSchedule.linear(args.schedule_min, args.schedule_max, args.schedule_steps)


def _resolve_label(dataset, label):
    if label in dataset.label_names:
        return dataset.label_names.index(label)
    try:
        idx = int(label)
    except ValueError:
        idx = None
    if idx is None or not 0 <= idx < dataset.n_labels:
        raise ConfigError(f"unknown label {label!r}; available labels: {', '.join(dataset.label_names)}")
    return idx


def _write_text(path, text):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def cmd_inspect(args):
    ds = _load(args, args.data)
    print(f"N={ds.n_instances} d={ds.n_features} K={ds.n_labels}")
    print("labels: " + ", ".join(ds.label_names))
    print("label frequencies: " + ", ".join(f"{m:.4f}" for m in ds.labels.mean(axis=0)))
    return EXIT_OK


def cmd_experiment(args):
    out = Path(args.out)
    for path in [args.data, args.test_data, args.labels_xml]:
        if path is not None and not Path(path).is_file():
            raise DataError(f"input file not found: {path}")
    config = ExperimentConfig(
        n_splits=args.splits, n_train=args.train_size, base_seed=args.seed,
        theta_grid=tuple(args.theta_grid), abstention_grid=tuple(args.abstain_grid),
        rejection_theta=args.theta, schedule=_schedule(args),
    )
    if args.jobs < 0:
        raise ConfigError("--jobs must be >= 0")

    try:
        dataset = _load(args, args.data)
        test = _load(args, args.test_data) if args.test_data else None
        if test is not None and test.label_names != dataset.label_names:
            raise DataError("test data labels differ from training data labels")
        dump_label = _resolve_label(dataset, args.dump_label)
    except (ConfigError, DataError) as exc:
        raise _Stage("loading data", exc)

    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": "experiment",
        "version": __version__,
        "config": config.as_dict(),
        "data": str(args.data),
        "test_data": args.test_data,
        "prng": PRNG_ALGORITHM,
        "N": dataset.n_instances,
        "d": dataset.n_features,
        "K": dataset.n_labels,
        "label_names": list(dataset.label_names),
        "dump_label": dataset.label_names[dump_label],
        "jobs": args.jobs,
    }
    manifest["config_sha256"] = hashlib.sha256(
        json.dumps(manifest["config"], sort_keys=True).encode()).hexdigest()
    partial = out / "manifest.json.partial"
    partial.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    written = [partial]
    started = time.perf_counter()
    try:
        try:
            if test is None:
                result = run_experiment(dataset, config, jobs=args.jobs)
                train_idx, _ = random_split(dataset.n_instances, SplitSpec(config.base_seed, config.n_train, 0))
                dump = dump_conformity_distributions(dataset, train_idx, dump_label, config.schedule)
            else:
                result = ExperimentResult(config, [evaluate_split(dataset, test, config)])
                dump = dump_conformity_distributions(dataset, np.arange(dataset.n_instances),
                                                     dump_label, config.schedule)
        except (ConfigError, DataError) as exc:
            raise _Stage("experiment", exc)
        for name, text in [("theta_curve.csv", result.theta_curve_csv()),
                           ("rejection_curve.csv", result.rejection_curve_csv()),
                           ("conformity_dump.csv", conformity_dump_csv(dump))]:
            path = out / name
            written.append(path)
            path.write_text(text, encoding="utf-8")
        manifest["wall_time_seconds"] = round(time.perf_counter() - started, 3)
        partial.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
        partial.replace(out / "manifest.json")
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    print(f"wrote {out}/theta_curve.csv, rejection_curve.csv, conformity_dump.csv, manifest.json")
    return EXIT_OK


def _read_queries(path, n_features):
    rows = list(csv.reader(io.StringIO(Path(path).read_text(encoding="utf-8"))))
    rows = [r for r in rows if r and any(t.strip() for t in r)]
    if rows:
        try:
            [float(t) for t in rows[0]]
        except ValueError:
            rows = rows[1:]  # header
    try:
        queries = np.array([[float(t) for t in r] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    if queries.size == 0:
        raise DataError(f"{path}: no query rows")
    if queries.shape[1] != n_features:
        raise DataError(f"{path}: queries have {queries.shape[1]} features, training data has {n_features}")
    return queries


def cmd_predict(args):
    config = DecisionConfig(theta=args.theta, abstention_threshold=args.abstain_threshold, mode=Mode(args.mode))
    if not Path(args.query).is_file():
        raise DataError(f"query file not found: {args.query}")
    dataset = _load(args, args.data)
    queries = _read_queries(args.query, dataset.n_features)
    model = ConformalRuleModel(_schedule(args)).fit(dataset)
    pairs = model.plausibilities(queries)
    codes = decide_array(pairs, config)
    buf = io.StringIO()
    buf.write("instance_id,label,q0,q1,decision\n")
    for i in range(queries.shape[0]):
        for k, name in enumerate(dataset.label_names):
            decision = "abstain" if codes[i, k] < 0 else str(int(codes[i, k]))
            buf.write(f"{i},{name},{pairs[i, k, 0]:.6g},{pairs[i, k, 1]:.6g},{decision}\n")
    _write_text(args.out, buf.getvalue())
    return EXIT_OK


def cmd_dump_conformity(args):
    dataset = _load(args, args.data)
    label = _resolve_label(dataset, args.label)
    if args.train_size is None:
        train_idx = np.arange(dataset.n_instances)
    else:
        train_idx, _ = random_split(dataset.n_instances, SplitSpec(args.seed, args.train_size, 0))
    rows = dump_conformity_distributions(dataset, train_idx, label, _schedule(args))
    _write_text(args.out, conformity_dump_csv(rows))
    return EXIT_OK


COMMANDS = {
    "inspect": cmd_inspect,
    "experiment": cmd_experiment,
    "predict": cmd_predict,
    "dump-conformity": cmd_dump_conformity,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except _Stage as exc:
        print(f"error during {exc.stage}: {exc.exc}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(exc.exc, ConfigError) else EXIT_DATA
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
