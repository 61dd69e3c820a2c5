"""Command-line interface.

Exit codes: 0 on success, 2 on validation errors (bad arguments, unreadable
or inconsistent inputs), 3 when some per-fit runs of a benchmark failed and
a partial report was written. The STAGEDTREE_SEED environment variable
supplies the default seed when --seed / --master-seed is omitted.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bn import model_from_dag, parse_dag_file, staging_from_dag
from .classify import evaluate, posterior_batch
from .data import CategoricalDataset, load_csv, read_levels_file, tree_counts
from .datasets import titanic_csv, titanic_dataset
from .errors import DatasetError, StagedTreeError
from .experiments import (
    ExperimentSpec,
    aggregate_reports,
    format_table,
    parse_algorithm,
    report_csv,
    run_experiment,
    xor_experiment,
)
from .learn import ALGORITHMS, LearnConfig, learn
from .modelio import load_model, save_model
from .ordering import cmi_order
from .scoring import fit_model
from .tree import (
    EventTree,
    free_parameter_count,
    read_class_conditional_independencies,
    read_marginal_independencies,
)


def _default_seed() -> int:
    return int(os.environ.get("STAGEDTREE_SEED", "0"))


def _load_dataset(
    args: argparse.Namespace, pin_variables=()
) -> CategoricalDataset:
    """Load --data; level orders of ``pin_variables`` (for example a model's
    variables) override file-appearance order so encodings stay aligned."""
    if args.data == "titanic":
        return titanic_dataset()
    level_order = dict(
        read_levels_file(args.levels) if getattr(args, "levels", None) else {}
    )
    for var in pin_variables:
        level_order[var.name] = var.levels
    return load_csv(args.data, args.class_column, level_order or None)


def _data_digest(args: argparse.Namespace) -> str:
    if args.data == "titanic":
        payload = titanic_csv().encode("utf-8")
    else:
        payload = Path(args.data).read_bytes()
    return hashlib.sha256(payload).hexdigest()


def _resolve_order(dataset: CategoricalDataset, args: argparse.Namespace) -> tuple[str, ...]:
    if args.order == "cmi":
        return cmi_order(dataset, args.smoothing).order
    if args.order == "asis":
        return tuple(v.name for v in dataset.feature_vars)
    if not args.order_file:
        raise DatasetError("--order file requires --order-file")
    names = [
        line.strip()
        for line in Path(args.order_file).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    for name in names:
        dataset.variable(name)
    if sorted(names) != sorted(v.name for v in dataset.feature_vars):
        raise DatasetError("--order-file must list every feature exactly once")
    return tuple(names)


def _add_data_arguments(parser: argparse.ArgumentParser, with_class: bool = True) -> None:
    parser.add_argument("--data", required=True, help="CSV path, or 'titanic' for the embedded dataset")
    if with_class:
        parser.add_argument("--class-column", default="Survived", help="name of the class variable")
    parser.add_argument("--levels", help="optional sidecar file pinning level orders")


def cmd_train(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args)
    order = _resolve_order(dataset, args)
    tree = EventTree(dataset.class_var, tuple(dataset.variable(n) for n in order))
    counts = tree_counts(dataset, tree)
    config = LearnConfig(
        algorithm=args.algorithm,
        kl_threshold=args.kl_threshold,
        max_search_depth=args.max_search_depth,
        seed=args.seed,
        smoothing=args.smoothing,
        kmeans_restarts=args.restarts,
        kl_eps=args.kl_eps,
    )
    model, trace = learn(counts, config)
    provenance = {
        "algorithm": args.algorithm,
        "seed": args.seed,
        "flags": {
            "order": args.order,
            "smoothing": args.smoothing,
            "kl_threshold": args.kl_threshold,
            "kl_eps": args.kl_eps,
            "max_search_depth": args.max_search_depth,
            "restarts": args.restarts,
        },
        "data_digest": _data_digest(args),
    }
    save_model(model, args.output, provenance)
    print(f"trained {args.algorithm} on {dataset.n_records} records")
    print(f"feature order: {', '.join(order)}")
    print(f"free parameters: {free_parameter_count(model)}")
    print(f"search moves: {len(trace.steps)}  ({trace.wall_time:.3f}s)")
    print(f"model written to {args.output}")
    return 0


def _read_feature_rows(
    path: str, model_vars: list
) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        rows = list(reader)
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    missing = [v.name for v in model_vars if v.name not in header]
    if missing:
        raise DatasetError(f"{path}: missing feature column(s) {missing}")
    return header, rows


def cmd_predict(args: argparse.Namespace) -> int:
    model, _ = load_model(args.model)
    feature_vars = list(model.tree.feature_vars)
    header, rows = _read_feature_rows(args.data, feature_vars)
    col_of = {name: j for j, name in enumerate(header)}
    features = np.empty((len(rows), len(feature_vars)), dtype=np.int64)
    for i, row in enumerate(rows):
        for d, var in enumerate(feature_vars):
            features[i, d] = var.level_index(row[col_of[var.name]])
    posteriors, _ = posterior_batch(model, features)
    predicted = posteriors.argmax(axis=1)
    class_var = model.tree.class_var

    out = sys.stdout if args.output == "-" else open(args.output, "w", newline="", encoding="utf-8")
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(header + ["predicted"] + [f"p_{lv}" for lv in class_var.levels])
        for i, row in enumerate(rows):
            writer.writerow(
                row
                + [class_var.levels[predicted[i]]]
                + [repr(float(p)) for p in posteriors[i]]
            )
    finally:
        if out is not sys.stdout:
            out.close()
    if out is not sys.stdout:
        print(f"wrote {len(rows)} predictions to {args.output}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    model, _ = load_model(args.model)
    dataset = _load_dataset(args, pin_variables=model.tree.variables)
    metrics = evaluate(model, dataset, args.positive_class)
    print(f"n_test: {metrics.n_test}")
    print(f"accuracy: {metrics.accuracy:.6f}")
    print(f"balanced_accuracy: {metrics.balanced_accuracy:.6f}")
    print(f"auc: {metrics.auc:.6f}")
    print(f"fallback predictions: {metrics.n_fallback}")
    print("confusion (rows = truth, columns = predicted):")
    header = " ".join(f"{lv:>10}" for lv in metrics.class_levels)
    print(f"{'':>10} {header}")
    for i, lv in enumerate(metrics.class_levels):
        cells = " ".join(f"{metrics.confusion[i, j]:>10.4f}" for j in range(len(metrics.class_levels)))
        print(f"{lv:>10} {cells}")
    return 0


def cmd_show_ci(args: argparse.Namespace) -> int:
    model, provenance = load_model(args.model)
    statements = read_marginal_independencies(model) + read_class_conditional_independencies(model)
    if provenance.get("algorithm"):
        print(f"# model trained by {provenance['algorithm']}")
    if not statements:
        print("no independence statements encoded by the staging")
        return 0
    for st in statements:
        print(f"[{st.kind}] {st}")
    return 0


def cmd_order(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args)
    result = cmi_order(dataset, args.smoothing)
    for name, score in zip(result.order, result.scores):
        print(f"{name}\t{score:.6f}")
    return 0


def cmd_benchmark(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args)
    algorithms = tuple(
        parse_algorithm(a, smoothing=args.smoothing, restarts=args.restarts)
        for a in args.algorithms.split(",")
    )
    fixed_order = None
    order_mode = args.order
    if args.order == "file":
        fixed_order = _resolve_order(dataset, args)
        order_mode = "fixed"
    spec = ExperimentSpec(
        algorithms=algorithms,
        replications=args.replications,
        train_fraction=args.train_fraction,
        master_seed=args.master_seed,
        order_mode=order_mode,
        fixed_order=fixed_order,
        positive_class=args.positive_class,
        cmi_smoothing=args.smoothing,
    )
    reports = run_experiment(dataset, spec)
    if args.output:
        Path(args.output).write_text(report_csv(reports), encoding="utf-8")
        print(f"per-fit report written to {args.output}")
    print(format_table(aggregate_reports(reports)))
    failures = [r for r in reports if r.error is not None]
    for r in failures:
        print(
            f"FAILED {r.algorithm} replication {r.replication}: {r.error}",
            file=sys.stderr,
        )
    return 3 if failures else 0


def cmd_xor(args: argparse.Namespace) -> int:
    reports = xor_experiment(
        n_features=args.features,
        n_train=args.train,
        n_test=args.test,
        n_seeds=args.seeds,
        master_seed=args.master_seed,
        smoothing=args.smoothing,
        algorithms=tuple(args.algorithms.split(",")),
    )
    if args.output:
        Path(args.output).write_text(report_csv(reports), encoding="utf-8")
        print(f"per-fit report written to {args.output}")
    print(format_table(aggregate_reports(reports)))
    return 0


def cmd_convert_dag(args: argparse.Namespace) -> int:
    dag = parse_dag_file(args.dag)
    if dag.cpts is not None:
        model = model_from_dag(dag)
        provenance = {"algorithm": "dag-exact", "source": str(args.dag)}
    else:
        if not args.data:
            raise DatasetError(
                "DAG file has no CPTs; provide --data to fit the staging from counts"
            )
        dataset = _load_dataset(args, pin_variables=dag.variables)
        tree = EventTree(dag.variables[0], dag.variables[1:])
        counts = tree_counts(dataset, tree)
        model = fit_model(counts, staging_from_dag(dag, tree), args.smoothing)
        provenance = {
            "algorithm": "dag-fitted",
            "source": str(args.dag),
            "flags": {"smoothing": args.smoothing},
            "data_digest": _data_digest(args),
        }
    save_model(model, args.output, provenance)
    print(f"model written to {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stagedtree",
        description="Staged tree classifiers over categorical data",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="learn a model and write it to a JSON file")
    _add_data_arguments(p)
    p.add_argument("--algorithm", required=True, choices=ALGORITHMS)
    p.add_argument("--order", choices=("cmi", "asis", "file"), default="cmi")
    p.add_argument("--order-file", help="explicit feature order, one name per line")
    p.add_argument("--smoothing", type=float, default=0.0)
    p.add_argument("--kl-threshold", type=float, default=0.01)
    p.add_argument("--kl-eps", type=float, default=1e-12)
    p.add_argument("--max-search-depth", type=int, default=None)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write per-record predictions as CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="CSV with at least the feature columns")
    p.add_argument("--output", default="-", help="output CSV path ('-' for stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="metrics of a model on labelled data")
    p.add_argument("--model", required=True)
    _add_data_arguments(p)
    p.add_argument("--positive-class", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("show-ci", help="independence statements encoded by a model")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_show_ci)

    p = sub.add_parser("order", help="print the CMI feature order of a dataset")
    _add_data_arguments(p)
    p.add_argument("--smoothing", type=float, default=0.0)
    p.set_defaults(func=cmd_order)

    p = sub.add_parser("benchmark", help="repeated-split comparison of algorithms")
    _add_data_arguments(p)
    p.add_argument(
        "--algorithms",
        default="bj:0.01,hc_full,naive_km,nb",
        help="comma list of learner tags; bj takes an optional ':threshold'",
    )
    p.add_argument("--replications", type=int, default=10)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--master-seed", type=int, default=_default_seed())
    p.add_argument("--order", choices=("cmi", "asis", "file"), default="cmi")
    p.add_argument("--order-file")
    p.add_argument("--positive-class", default=None)
    p.add_argument("--smoothing", type=float, default=0.0)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--output", help="per-fit CSV report path")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("xor-experiment", help="parity simulation study")
    p.add_argument("--features", type=int, default=10)
    p.add_argument("--train", type=int, default=200)
    p.add_argument("--test", type=int, default=10000)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--master-seed", type=int, default=_default_seed())
    p.add_argument("--smoothing", type=float, default=0.0)
    p.add_argument("--algorithms", default="naive_hc,naive_km,nb")
    p.add_argument("--output", help="per-fit CSV report path")
    p.set_defaults(func=cmd_xor)

    p = sub.add_parser("convert-dag", help="staged tree model from a DAG file")
    p.add_argument("--dag", required=True)
    p.add_argument("--data", help="fit florets from this data when the DAG has no CPTs")
    p.add_argument("--class-column", default="Survived")
    p.add_argument("--levels")
    p.add_argument("--smoothing", type=float, default=0.0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_convert_dag)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except StagedTreeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
