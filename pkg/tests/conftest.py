"""Shared fixtures and independent oracles for the test suite.

The oracles here deliberately recompute quantities by routes different from
the library's: joint probabilities by dictionary-based chain-rule walks over
prefix tuples, global BIC optima by exhaustive per-depth partition
enumeration, AUC by pairwise comparison. Tests freeze values produced by
these routes and compare the library against them.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from stagedtree.data import CategoricalDataset, TreeCounts
from stagedtree.scoring import stage_log_likelihood
from stagedtree.tree import (
    EventTree,
    StagedTreeModel,
    Staging,
    VariableSpec,
    full_staging,
)


def binary_vars(names: str | list[str]) -> list[VariableSpec]:
    if isinstance(names, str):
        names = names.split()
    return [VariableSpec(name, ("0", "1")) for name in names]


def binary_tree(names: str = "c x1 x2 x3") -> EventTree:
    variables = binary_vars(names)
    return EventTree(variables[0], tuple(variables[1:]))


@pytest.fixture
def tree3() -> EventTree:
    return binary_tree("c x1 x2 x3")


def staging_from_maps(maps, unobserved=None) -> Staging:
    maps = tuple(np.asarray(m, dtype=np.int64) for m in maps)
    if unobserved is None:
        unobserved = (None,) * len(maps)
    return Staging(maps, tuple(unobserved))


def random_staging(tree: EventTree, rng: np.random.Generator) -> Staging:
    maps = []
    for d in range(tree.n_depths):
        n = tree.n_vertices(d)
        k = int(rng.integers(1, n + 1))
        maps.append(rng.integers(0, k, size=n))
    return staging_from_maps(maps).canonicalize()


def random_model(
    rng: np.random.Generator,
    max_features: int = 3,
    max_card: int = 3,
    unobserved: bool = False,
) -> StagedTreeModel:
    n_features = int(rng.integers(0, max_features + 1))
    cards = [int(rng.integers(2, max_card + 1)) for _ in range(n_features + 1)]
    variables = [
        VariableSpec(f"v{i}", tuple(str(j) for j in range(card)))
        for i, card in enumerate(cards)
    ]
    tree = EventTree(variables[0], tuple(variables[1:]))
    staging = random_staging(tree, rng)
    if unobserved:
        maps, unobs = [], []
        for d in range(tree.n_depths):
            stage_map = staging.stage_maps[d].copy()
            if tree.n_vertices(d) > 1 and rng.random() < 0.5:
                victim = int(rng.integers(0, tree.n_vertices(d)))
                fresh = int(stage_map.max()) + 1
                stage_map[victim] = fresh
                maps.append(stage_map)
                unobs.append(fresh)
            else:
                maps.append(stage_map)
                unobs.append(None)
        staging = staging_from_maps(maps, unobs).canonicalize()
    florets = []
    for d in range(tree.n_depths):
        rows = rng.dirichlet(np.ones(tree.cardinalities[d]), size=staging.n_stages(d))
        u = staging.unobserved[d]
        if u is not None:
            rows[u] = 1.0 / tree.cardinalities[d]
        florets.append(rows)
    return StagedTreeModel(tree, staging, tuple(florets))


def random_dataset(
    rng: np.random.Generator,
    variables: list[VariableSpec],
    n_records: int,
    class_column: str | None = None,
) -> CategoricalDataset:
    records = np.column_stack(
        [rng.integers(0, v.cardinality, size=n_records) for v in variables]
    )
    return CategoricalDataset(
        tuple(variables), records, class_column or variables[0].name
    )


def chain_rule_joint(model: StagedTreeModel) -> dict[tuple[int, ...], float]:
    """Joint table via an explicit prefix-dictionary chain-rule walk."""
    tree = model.tree
    stage_of = []
    for d in range(tree.n_depths):
        prefixes = itertools.product(*(range(c) for c in tree.cardinalities[:d]))
        stage_of.append(dict(zip(prefixes, model.staging.stage_maps[d].tolist())))
    out = {}
    for outcome in itertools.product(*(range(c) for c in tree.cardinalities)):
        prob = 1.0
        for d in range(tree.n_depths):
            prob *= float(model.floret_probs[d][stage_of[d][outcome[:d]], outcome[d]])
        out[outcome] = prob
    return out


def mutual_information_of(
    joint: np.ndarray, axes_a: tuple[int, ...], axes_b: tuple[int, ...]
) -> float:
    """Exact mutual information between two groups of axes of a joint array."""
    all_axes = tuple(range(joint.ndim))
    pa = joint.sum(axis=tuple(a for a in all_axes if a not in axes_a))
    pb = joint.sum(axis=tuple(a for a in all_axes if a not in axes_b))
    pab = joint.sum(axis=tuple(a for a in all_axes if a not in axes_a + axes_b))
    mi = 0.0
    for idx in itertools.product(*(range(s) for s in pab.shape)):
        p = pab[idx]
        if p <= 0:
            continue
        ia = idx[: len(axes_a)]
        ib = idx[len(axes_a) :]
        mi += p * math.log(p / (pa[ia] * pb[ib]))
    return mi


def set_partitions(items: list):
    """All partitions of a list into nonempty blocks."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [part[i] + [first]] + part[i + 1 :]
        yield [[first]] + part


def exhaustive_best_bic(counts: TreeCounts, smoothing: float = 0.0) -> float:
    """Globally optimal BIC score by per-depth partition enumeration of the
    observed vertices (the score decomposes over depths)."""
    log_n = math.log(counts.n_records)
    total = 0.0
    for d in range(counts.tree.n_depths):
        card = counts.tree.cardinalities[d]
        rows = counts.per_depth[d]
        observed = [v for v in range(rows.shape[0]) if rows[v].sum() > 0]
        best = -math.inf
        for part in set_partitions(observed):
            ll = sum(
                stage_log_likelihood(
                    np.sum([rows[v] for v in block], axis=0), smoothing
                )
                for block in part
            )
            score = ll - 0.5 * len(part) * (card - 1) * log_n
            best = max(best, score)
        total += best
    return total


def random_dag(rng: np.random.Generator, max_vars: int = 4, max_card: int = 3):
    """Random DAG with random parent sets and Dirichlet CPT rows."""
    from stagedtree.bn import DagSpec

    n = int(rng.integers(2, max_vars + 1))
    variables = tuple(
        VariableSpec(
            f"v{k}", tuple(str(j) for j in range(int(rng.integers(2, max_card + 1))))
        )
        for k in range(n)
    )
    parent_sets = tuple(
        tuple(sorted(j for j in range(k) if rng.random() < 0.5)) for k in range(n)
    )
    cpts = []
    for k, var in enumerate(variables):
        n_cfg = int(
            np.prod([variables[j].cardinality for j in parent_sets[k]], initial=1)
        )
        cpts.append(rng.dirichlet(np.ones(var.cardinality), size=n_cfg))
    return DagSpec(variables, parent_sets, tuple(cpts))


def pairwise_auc(scores: np.ndarray, positive: np.ndarray) -> float:
    """AUC by direct pairwise comparison (ties worth one half)."""
    pos = scores[positive]
    neg = scores[~positive]
    wins = sum((p > n) + 0.5 * (p == n) for p in pos for n in neg)
    return float(wins) / (len(pos) * len(neg))


def fit_full(dataset: CategoricalDataset, tree: EventTree):
    from stagedtree.data import tree_counts
    from stagedtree.scoring import fit_model, mark_unobserved

    counts = tree_counts(dataset, tree)
    staging = mark_unobserved(full_staging(tree), counts)
    return fit_model(counts, staging), counts
