"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -s tests/test_acceptance.py`` to see the per-criterion
lines as they complete. Criterion 1's first clause asserts the parity
study's reference accuracy at its stated sample regime; that regime cannot
reach the bar for this model class (the same code reaches it with more
coverage), so that single assertion is expected to fail and prints its full
diagnosis.
"""

import math
import time

import numpy as np
import pytest

from stagedtree.bn import bn_joint_oracle, model_from_dag, staging_from_dag, DagSpec
from stagedtree.classify import evaluate
from stagedtree.data import CategoricalDataset, split, tree_counts
from stagedtree.datasets import titanic_dataset
from stagedtree.experiments import (
    ExperimentSpec,
    aggregate_reports,
    derive_seed,
    ordering_effect_study,
    parse_algorithm,
    run_experiment,
    xor_experiment,
)
from stagedtree.learn import LearnConfig, backward_join, learn, learn_baseline, learn_naive
from stagedtree.modelio import deserialize_model, serialize_model
from stagedtree.scoring import bic_score
from stagedtree.simulate import generate_parity
from stagedtree.tree import (
    EventTree,
    VariableSpec,
    atom_probability,
    build_event_tree,
    free_parameter_count,
    joint_probabilities,
)

from conftest import (
    binary_tree,
    binary_vars,
    exhaustive_best_bic,
    random_dag,
    random_dataset,
    random_model,
    staging_from_maps,
)


def report(number: int, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    print(f"\nACCEPTANCE {number} [{status}] {detail}")


def test_criterion_1_xor_reproduction():
    """Parity study at the reference regime: staged tree vs naive Bayes."""
    t0 = time.perf_counter()
    rows = xor_experiment(
        n_features=10, n_train=200, n_test=10000, n_seeds=10, master_seed=0,
        algorithms=("naive_hc", "nb"),
    )
    elapsed = time.perf_counter() - t0
    means = {
        a["algorithm"]: a["accuracy_mean"] for a in aggregate_reports(rows)
    }
    staged_ok = means["naive_hc"] >= 0.85
    nb_ok = means["nb"] <= 0.65
    detail = (
        f"xor n=10 N_train=200: naive staged tree mean accuracy "
        f"{means['naive_hc']:.4f} (target >= 0.85, reference 0.894), naive "
        f"Bayes {means['nb']:.4f} (target <= 0.65, reference 0.536); "
        f"{elapsed:.1f}s"
    )
    report(1, staged_ok and nb_ok, detail)
    if not staged_ok:
        print(
            "  note: unattainable at the stated regime for this model class; "
            "uniform unobserved stages leave the final tree depth as the only "
            "parity-informative one and 200 records cover ~18% of its 1024 "
            "vertices, bounding accuracy near 0.66. The same code reaches the "
            "reference value once coverage is adequate (two corroborating "
            "regimes below)."
        )
        for nf, ntr in ((8, 200), (10, 780)):
            extra = xor_experiment(
                n_features=nf, n_train=ntr, n_test=10000, n_seeds=10,
                master_seed=0, algorithms=("naive_hc",),
            )
            mean = aggregate_reports(extra)[0]["accuracy_mean"]
            print(f"  corroboration: n={nf} N_train={ntr} -> {mean:.4f}")
    assert elapsed < 120
    assert nb_ok
    assert staged_ok, detail


def test_criterion_2_bn_equivalence_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240)
    worst = 0.0
    for _ in range(200):
        dag = random_dag(rng, max_vars=4, max_card=3)
        model = model_from_dag(dag)
        for outcome in model.tree.iter_atoms():
            diff = abs(bn_joint_oracle(dag, outcome) - atom_probability(model, outcome))
            worst = max(worst, diff)
    elapsed = time.perf_counter() - t0
    passed = worst < 1e-12 and elapsed < 10
    report(
        2,
        passed,
        f"BN equivalence over 200 random DAGs: max atom discrepancy "
        f"{worst:.2e} (< 1e-12); {elapsed:.1f}s (< 10s)",
    )
    assert worst < 1e-12
    assert elapsed < 10


def test_criterion_3_strict_containment_witness():
    t0 = time.perf_counter()
    tree = binary_tree("x1 x2 x3")
    cross = staging_from_maps([[0], [0, 1], [0, 1, 1, 0]])
    matches = []
    for p2 in ((), (0,)):
        for p3 in ((), (0,), (1,), (0, 1)):
            dag = DagSpec(tree.variables, ((), p2, p3))
            if staging_from_dag(dag, tree) == cross:
                matches.append((p2, p3))
    elapsed = time.perf_counter() - t0
    report(
        3,
        not matches and elapsed < 1,
        f"cross staging matched {len(matches)} of 8 DAG stagings (expect 0); "
        f"{elapsed:.3f}s (< 1s)",
    )
    assert matches == []
    assert elapsed < 1


def _fully_observed_dataset(rng, cards):
    variables = [
        VariableSpec(f"v{i}", tuple(str(j) for j in range(card)))
        for i, card in enumerate(cards)
    ]
    atoms = np.indices(cards).reshape(len(cards), -1).T
    extra_rows = np.column_stack(
        [rng.integers(0, card, size=3 * len(atoms)) for card in cards]
    )
    records = np.concatenate([atoms, extra_rows])
    return CategoricalDataset(tuple(variables), records, "v0")


def test_criterion_4_naive_parameter_parity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(77)
    n_exact = n_less = 0
    cases = []
    while len(cases) < 100:
        n_classes = int(rng.integers(2, 5))
        p = int(rng.integers(1, 7))
        cards = [n_classes] + [int(rng.integers(2, 6)) for _ in range(p)]
        if np.prod(cards) <= 4000:
            cases.append(cards)
    cases.append(None)  # deterministic degenerate case exercising "strictly less"
    for cards in cases:
        if cards is None:
            cards = [2, 2, 2]
            variables = [
                VariableSpec(f"v{i}", tuple(str(j) for j in range(c)))
                for i, c in enumerate(cards)
            ]
            atoms = np.indices(cards).reshape(len(cards), -1).T
            ds = CategoricalDataset(
                tuple(variables), np.repeat(atoms, 2, axis=0), "v0"
            )
        else:
            ds = _fully_observed_dataset(rng, cards)
        tree = EventTree(ds.variables[0], ds.variables[1:])
        counts = tree_counts(ds, tree)
        model, _ = learn_naive(counts, method="hclust")
        n_classes = tree.class_var.cardinality
        formula = (n_classes - 1) + sum(
            n_classes * (v.cardinality - 1) for v in tree.feature_vars
        )
        distinct_ok = True
        for d in range(1, tree.n_depths):
            florets = counts.per_depth[d] / counts.per_depth[d].sum(1, keepdims=True)
            if len(np.unique(florets, axis=0)) < n_classes:
                distinct_ok = False
        got = free_parameter_count(model)
        if distinct_ok:
            assert got == formula, (cards, got, formula)
            n_exact += 1
        else:
            assert got < formula, (cards, got, formula)
            n_less += 1
    elapsed = time.perf_counter() - t0
    report(
        4,
        elapsed < 30,
        f"naive parameter parity on 101 profiles: {n_exact} exact matches of "
        f"the closed form, {n_less} strictly-less degenerate; {elapsed:.1f}s (< 30s)",
    )
    assert n_exact + n_less == 101
    assert n_less >= 1
    assert elapsed < 30


def test_criterion_5_score_monotonicity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(555)
    checked = 0
    datasets = [
        random_dataset(rng, binary_vars("c a b d"), int(rng.integers(15, 120)))
        for _ in range(12)
    ]
    datasets.append(split(titanic_dataset(), 0.8, seed=1)[0])
    for ds in datasets:
        tree = EventTree(ds.class_var, ds.feature_vars)
        counts = tree_counts(ds, tree)
        start_score = bic_score(learn_baseline(counts, "full"), counts).score
        indep_score = bic_score(learn_baseline(counts, "indep"), counts).score
        for algorithm in ("hc_indep", "hc_full", "bhc", "fbhc", "bj"):
            model, trace = learn(
                counts, LearnConfig(algorithm=algorithm, kl_threshold=0.01)
            )
            assert trace.scores_strictly_increase(), algorithm
            final = bic_score(model, counts).score
            baseline = indep_score if algorithm == "hc_indep" else start_score
            assert final >= baseline - 1e-9, (algorithm, final, baseline)
            if algorithm == "bj":
                assert all(step.value < 0.01 for step in trace.steps)
            checked += 1
    elapsed = time.perf_counter() - t0
    report(
        5,
        elapsed < 60,
        f"strictly increasing search traces and final >= initial score on "
        f"{checked} fits; {elapsed:.1f}s (< 60s)",
    )
    assert elapsed < 60


def test_criterion_6_exhaustive_search_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(12345)
    hits = 0
    for _ in range(100):
        p = int(rng.integers(1, 3))
        names = ["c"] + [f"x{i}" for i in range(1, p + 1)]
        ds = random_dataset(rng, binary_vars(names), int(rng.integers(5, 51)))
        tree = EventTree(ds.variables[0], ds.variables[1:])
        counts = tree_counts(ds, tree)
        model, _ = learn(counts, LearnConfig(algorithm="bhc"))
        got = bic_score(model, counts).score
        best = exhaustive_best_bic(counts)
        assert got <= best + 1e-9
        if got >= best - 1e-9:
            hits += 1
    elapsed = time.perf_counter() - t0
    report(
        6,
        hits >= 95 and elapsed < 60,
        f"join-only hill climbing reached the enumerated BIC optimum on "
        f"{hits}/100 datasets (>= 95); {elapsed:.1f}s (< 60s)",
    )
    assert hits >= 95
    assert elapsed < 60


def test_criterion_7_normalization_and_round_trip():
    t0 = time.perf_counter()
    rng = np.random.default_rng(9001)
    n_cases = 10_000
    for _ in range(n_cases):
        model = random_model(rng, max_features=3, max_card=3, unobserved=True)
        assert abs(joint_probabilities(model).sum() - 1.0) <= 1e-9
        restored, _ = deserialize_model(serialize_model(model))
        assert restored.structurally_equal(model)
    elapsed = time.perf_counter() - t0
    report(
        7,
        elapsed < 60,
        f"{n_cases} random models: atom sums within 1e-9 and bit-exact "
        f"serialization round trips; {elapsed:.1f}s (< 60s)",
    )
    assert elapsed < 60


def test_criterion_8_ordering_effect():
    t0 = time.perf_counter()
    rows = ordering_effect_study(
        n_records=500, n_seeds=10, n_random_orders=20, master_seed=0,
        algorithm="fbhc",
    )
    wins = sum(
        r["cmi_accuracy"] >= float(np.median(r["random_accuracies"])) for r in rows
    )
    elapsed = time.perf_counter() - t0
    report(
        8,
        wins >= 8 and elapsed < 120,
        f"CMI order at or above the random-order median accuracy on "
        f"{wins}/10 seeds (>= 8); {elapsed:.1f}s (< 120s)",
    )
    assert wins >= 8
    assert elapsed < 120


def test_criterion_9_titanic_case_study(tmp_path, capsys):
    t0 = time.perf_counter()
    data = titanic_dataset()

    # context-specific read-out through the CLI surface
    from stagedtree.cli import main

    model_path = tmp_path / "titanic_bj.json"
    assert (
        main(
            [
                "train", "--data", "titanic", "--algorithm", "bj",
                "--kl-threshold", "0.01", "--output", str(model_path),
            ]
        )
        == 0
    )
    assert main(["show-ci", "--model", str(model_path)]) == 0
    out = capsys.readouterr().out
    context_lines = [
        line
        for line in out.splitlines()
        if line.startswith("[context-conditional]") and "Survived" in line
    ]

    # repeated-split comparison against the naive-Bayes baseline
    spec = ExperimentSpec(
        algorithms=(parse_algorithm("bj:0.01"), parse_algorithm("nb")),
        replications=10,
        train_fraction=0.8,
        master_seed=0,
    )
    agg = {a["algorithm"]: a for a in aggregate_reports(run_experiment(data, spec))}
    bj_bal = agg["bj:0.01"]["balanced_accuracy_mean"]
    nb_bal = agg["nb"]["balanced_accuracy_mean"]
    elapsed = time.perf_counter() - t0
    passed = bool(context_lines) and bj_bal >= nb_bal - 0.05 and elapsed < 60
    report(
        9,
        passed,
        f"Titanic: {len(context_lines)} context-specific statement(s) "
        f"involving Survived (e.g. {context_lines[0] if context_lines else 'none'}); "
        f"bj balanced accuracy {bj_bal:.4f} vs naive Bayes {nb_bal:.4f} "
        f"(tolerance -0.05); {elapsed:.1f}s (< 60s)",
    )
    assert context_lines, "no context-specific statement involving Survived"
    assert bj_bal >= nb_bal - 0.05
    assert elapsed < 60
