"""Experiment harness: repeated-split benchmarks and the bundled studies.

Every run is a pure function of (spec, master seed, input data): per-fit
seeds derive from the master seed by hashing, so algorithm comparisons are
paired across identical splits and reruns are byte-identical. Wall times
are reported on the human-readable table only, never in the CSV artifact,
which keeps the CSV deterministic.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .bn import naive_dag, staging_from_dag
from .classify import evaluate
from .data import CategoricalDataset, TreeCounts, split, tree_counts
from .errors import DatasetError, StagedTreeError
from .learn import ALGORITHMS, LearnConfig, learn
from .ordering import cmi_order
from .scoring import fit_model
from .simulate import generate_parity, generate_parity_noise
from .tree import EventTree, StagedTreeModel, free_parameter_count

#: Search-depth caps applied by the benchmark runner unless overridden,
#: restricting the costliest searches to the leading features of the order.
DEFAULT_DEPTH_CAPS = {"hc_full": 5, "bhc": 7, "hc_indep": 7}


@dataclass(frozen=True)
class AlgorithmSpec:
    """One algorithm entry of a benchmark: a learner tag plus its knobs.

    ``learner`` is one of the structure-learning tags, or ``nb`` for the
    naive-Bayes baseline obtained by fitting the DAG-induced staging.
    """

    label: str
    learner: str
    kl_threshold: float = 0.01
    max_search_depth: int | None = None
    smoothing: float = 0.0
    restarts: int = 10

    def __post_init__(self) -> None:
        if self.learner not in ALGORITHMS + ("nb",):
            raise DatasetError(f"unknown algorithm {self.learner!r}")


def parse_algorithm(text: str, smoothing: float = 0.0, restarts: int = 10) -> AlgorithmSpec:
    """Parse 'name' or 'bj:<threshold>' into an AlgorithmSpec with the
    benchmark depth caps of the costly searches applied."""
    name, _, arg = text.strip().partition(":")
    kl = 0.01
    if arg:
        if name != "bj":
            raise DatasetError(f"only bj takes a threshold argument, got {text!r}")
        kl = float(arg)
    return AlgorithmSpec(
        label=text.strip(),
        learner=name,
        kl_threshold=kl,
        max_search_depth=DEFAULT_DEPTH_CAPS.get(name),
        smoothing=smoothing,
        restarts=restarts,
    )


@dataclass(frozen=True)
class ExperimentSpec:
    """Protocol of one repeated-split benchmark."""

    algorithms: tuple[AlgorithmSpec, ...]
    replications: int = 10
    train_fraction: float = 0.8
    master_seed: int = 0
    order_mode: str = "cmi"  # "cmi" | "asis" | "fixed"
    fixed_order: tuple[str, ...] | None = None
    positive_class: str | None = None
    cmi_smoothing: float = 0.0

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise DatasetError("replications must be >= 1")
        if self.order_mode not in ("cmi", "asis", "fixed"):
            raise DatasetError(f"unknown order mode {self.order_mode!r}")
        if self.order_mode == "fixed" and not self.fixed_order:
            raise DatasetError("fixed order mode needs an explicit order")


@dataclass(frozen=True)
class FitReport:
    """Outcome of one (algorithm, replication) fit."""

    algorithm: str
    replication: int
    seed: int
    order: tuple[str, ...]
    n_params: int
    accuracy: float
    balanced_accuracy: float
    auc: float
    n_fallback: int
    fit_seconds: float
    error: str | None = None


def derive_seed(master_seed: int, *parts: object) -> int:
    """Stable per-task seed from the master seed and a context tag."""
    text = ":".join([str(master_seed), *map(str, parts)])
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1


def fit_algorithm(
    algo: AlgorithmSpec, counts: TreeCounts, seed: int
) -> StagedTreeModel:
    """Fit one algorithm (including the nb baseline) on tree counts."""
    if algo.learner == "nb":
        dag = naive_dag(counts.tree.class_var, counts.tree.feature_vars)
        return fit_model(counts, staging_from_dag(dag, counts.tree), algo.smoothing)
    config = LearnConfig(
        algorithm=algo.learner,
        kl_threshold=algo.kl_threshold,
        max_search_depth=algo.max_search_depth,
        seed=seed,
        smoothing=algo.smoothing,
        kmeans_restarts=algo.restarts,
    )
    model, _ = learn(counts, config)
    return model


def _choose_order(
    train: CategoricalDataset, spec: ExperimentSpec
) -> tuple[str, ...]:
    if spec.order_mode == "cmi":
        return cmi_order(train, spec.cmi_smoothing).order
    if spec.order_mode == "fixed":
        return tuple(spec.fixed_order)
    return tuple(v.name for v in train.feature_vars)


def run_experiment(dataset: CategoricalDataset, spec: ExperimentSpec) -> list[FitReport]:
    """Run the full (algorithm x replication) grid; per-fit failures are
    recorded as error rows and the run continues."""
    reports: list[FitReport] = []
    for rep in range(spec.replications):
        seed = derive_seed(spec.master_seed, "split", rep)
        train, test = split(dataset, spec.train_fraction, seed)
        order = _choose_order(train, spec)
        tree = EventTree(
            train.class_var, tuple(train.variable(name) for name in order)
        )
        counts = tree_counts(train, tree)
        for algo in spec.algorithms:
            fit_seed = derive_seed(spec.master_seed, "fit", rep, algo.label)
            t0 = time.perf_counter()
            try:
                model = fit_algorithm(algo, counts, fit_seed)
                metrics = evaluate(model, test, spec.positive_class)
                reports.append(
                    FitReport(
                        algorithm=algo.label,
                        replication=rep,
                        seed=seed,
                        order=order,
                        n_params=free_parameter_count(model),
                        accuracy=metrics.accuracy,
                        balanced_accuracy=metrics.balanced_accuracy,
                        auc=metrics.auc,
                        n_fallback=metrics.n_fallback,
                        fit_seconds=time.perf_counter() - t0,
                    )
                )
            except StagedTreeError as exc:
                reports.append(
                    FitReport(
                        algorithm=algo.label,
                        replication=rep,
                        seed=seed,
                        order=order,
                        n_params=0,
                        accuracy=math.nan,
                        balanced_accuracy=math.nan,
                        auc=math.nan,
                        n_fallback=0,
                        fit_seconds=time.perf_counter() - t0,
                        error=str(exc),
                    )
                )
    return reports


def xor_experiment(
    n_features: int = 10,
    n_train: int = 200,
    n_test: int = 10000,
    n_seeds: int = 10,
    master_seed: int = 0,
    smoothing: float = 0.0,
    algorithms: tuple[str, ...] = ("naive_hc", "naive_km", "nb"),
) -> list[FitReport]:
    """Parity study: fresh train/test draws per seed, class = product of all
    sign features. Features are exchangeable here, so trees use the
    generator's feature order directly."""
    specs = [replace(parse_algorithm(a, smoothing=smoothing)) for a in algorithms]
    reports: list[FitReport] = []
    for i in range(n_seeds):
        train = generate_parity(n_features, n_train, derive_seed(master_seed, "xor-train", i))
        test = generate_parity(n_features, n_test, derive_seed(master_seed, "xor-test", i))
        tree = EventTree(train.class_var, train.feature_vars)
        counts = tree_counts(train, tree)
        order = tuple(v.name for v in train.feature_vars)
        for algo in specs:
            fit_seed = derive_seed(master_seed, "xor-fit", i, algo.label)
            t0 = time.perf_counter()
            model = fit_algorithm(algo, counts, fit_seed)
            metrics = evaluate(model, test, positive_class="+1")
            reports.append(
                FitReport(
                    algorithm=algo.label,
                    replication=i,
                    seed=fit_seed,
                    order=order,
                    n_params=free_parameter_count(model),
                    accuracy=metrics.accuracy,
                    balanced_accuracy=metrics.balanced_accuracy,
                    auc=metrics.auc,
                    n_fallback=metrics.n_fallback,
                    fit_seconds=time.perf_counter() - t0,
                )
            )
    return reports


def ordering_effect_study(
    n_records: int = 500,
    n_seeds: int = 10,
    n_random_orders: int = 20,
    master_seed: int = 0,
    algorithm: str = "fbhc",
) -> list[dict]:
    """Per seed: test accuracy of one learner under the CMI order versus a
    panel of random feature orders on the two-sign-parity-plus-noise data."""
    out = []
    for i in range(n_seeds):
        data = generate_parity_noise(n_records, derive_seed(master_seed, "ord-data", i))
        train, test = split(data, 0.8, derive_seed(master_seed, "ord-split", i))
        feature_names = [v.name for v in train.feature_vars]

        def accuracy_for(order: tuple[str, ...]) -> float:
            tree = EventTree(
                train.class_var, tuple(train.variable(n) for n in order)
            )
            counts = tree_counts(train, tree)
            model = fit_algorithm(
                parse_algorithm(algorithm), counts, derive_seed(master_seed, "ord-fit", i)
            )
            return evaluate(model, test).accuracy

        cmi_acc = accuracy_for(cmi_order(train).order)
        rng = np.random.default_rng(derive_seed(master_seed, "ord-perms", i))
        random_accs = [
            accuracy_for(tuple(np.array(feature_names)[rng.permutation(len(feature_names))]))
            for _ in range(n_random_orders)
        ]
        out.append({"seed": i, "cmi_accuracy": cmi_acc, "random_accuracies": random_accs})
    return out


def report_csv(reports: list[FitReport]) -> str:
    """Deterministic CSV of per-fit rows (timings intentionally excluded)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        [
            "algorithm",
            "replication",
            "seed",
            "order",
            "n_params",
            "accuracy",
            "balanced_accuracy",
            "auc",
            "n_fallback",
            "error",
        ]
    )
    for r in reports:
        writer.writerow(
            [
                r.algorithm,
                r.replication,
                r.seed,
                " ".join(r.order),
                r.n_params,
                repr(r.accuracy),
                repr(r.balanced_accuracy),
                repr(r.auc),
                r.n_fallback,
                r.error or "",
            ]
        )
    return buf.getvalue()


def aggregate_reports(reports: list[FitReport]) -> list[dict]:
    """Mean and standard deviation per algorithm over successful fits."""
    order: list[str] = []
    for r in reports:
        if r.algorithm not in order:
            order.append(r.algorithm)
    out = []
    for label in order:
        rows = [r for r in reports if r.algorithm == label]
        ok = [r for r in rows if r.error is None]
        entry = {
            "algorithm": label,
            "n_fits": len(rows),
            "n_failures": len(rows) - len(ok),
        }
        for metric in ("accuracy", "balanced_accuracy", "auc"):
            values = np.array([getattr(r, metric) for r in ok], dtype=float)
            values = values[~np.isnan(values)]
            entry[f"{metric}_mean"] = float(values.mean()) if values.size else math.nan
            entry[f"{metric}_sd"] = (
                float(values.std(ddof=1)) if values.size > 1 else 0.0
            )
        entry["n_params_mean"] = (
            float(np.mean([r.n_params for r in ok])) if ok else math.nan
        )
        entry["fit_seconds_mean"] = (
            float(np.mean([r.fit_seconds for r in ok])) if ok else math.nan
        )
        out.append(entry)
    return out


def format_table(aggregates: list[dict]) -> str:
    """Human-readable summary table (the only place wall times appear)."""
    header = (
        f"{'algorithm':<14} {'auc':>15} {'balanced acc':>15} "
        f"{'accuracy':>15} {'params':>8} {'fit s':>8} {'fail':>5}"
    )
    lines = [header, "-" * len(header)]
    for a in aggregates:

        def ms(metric: str) -> str:
            mean, sd = a[f"{metric}_mean"], a[f"{metric}_sd"]
            return "--" if math.isnan(mean) else f"{mean:.4f}±{sd:.4f}"

        lines.append(
            f"{a['algorithm']:<14} {ms('auc'):>15} {ms('balanced_accuracy'):>15} "
            f"{ms('accuracy'):>15} {a['n_params_mean']:>8.1f} "
            f"{a['fit_seconds_mean']:>8.3f} {a['n_failures']:>5d}"
        )
    return "\n".join(lines)
