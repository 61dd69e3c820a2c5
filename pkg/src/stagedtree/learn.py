"""Structure search for staged tree classifiers.

Learners operate on tree counts and return a fitted model plus a search
trace. Zero-reach vertices are pooled into per-depth unobserved stages
before any search and stay out of every move neighborhood.

Score-driven searches maximize the BIC score of ``scoring.bic_score``;
because the score decomposes over depths, every candidate move is evaluated
by a local delta on the affected stages only. Tie-breaking is everywhere by
the lowest (depth, vertex index, stage id) tuple, which makes all searches
reproducible bit-for-bit.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import pdist

from .data import TreeCounts
from .errors import EstimationError
from .scoring import (
    KL_EPS,
    fit_model,
    mark_unobserved,
    stage_log_likelihood,
    symmetrized_kl,
)
from .tree import StagedTreeModel, Staging, full_staging, indep_staging

ALGORITHMS = (
    "full",
    "indep",
    "hc_indep",
    "hc_full",
    "bhc",
    "fbhc",
    "bj",
    "naive_hc",
    "naive_km",
)

#: Minimum score gain for a move to count as an improvement (guards float noise).
SCORE_TOL = 1e-9


@dataclass(frozen=True)
class LearnConfig:
    """Configuration of one structure-learning run."""

    algorithm: str
    kl_threshold: float = 0.01
    max_search_depth: int | None = None
    seed: int = 0
    smoothing: float = 0.0
    kmeans_restarts: int = 10
    hclust_linkage: str = "average"
    cluster_metric: str = "totvar"
    kl_eps: float = KL_EPS

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise EstimationError(
                f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}"
            )
        if self.algorithm == "bj" and not self.kl_threshold > 0:
            raise EstimationError("bj requires kl_threshold > 0")
        if self.max_search_depth is not None and self.max_search_depth < 1:
            raise EstimationError("max_search_depth must be >= 1")
        if self.kmeans_restarts < 1:
            raise EstimationError("kmeans_restarts must be >= 1")


@dataclass(frozen=True)
class TraceStep:
    """One accepted search move."""

    description: str
    score_before: float | None = None
    score_after: float | None = None
    value: float | None = None


@dataclass(frozen=True)
class SearchTrace:
    """Accepted moves of one search, in order, plus wall time in seconds."""

    steps: tuple[TraceStep, ...]
    wall_time: float

    def scores_strictly_increase(self) -> bool:
        last = -math.inf
        for step in self.steps:
            if step.score_before is None or step.score_after is None:
                continue
            if not (step.score_after > step.score_before >= last - 1e-12):
                return False
            last = step.score_after
        return True


class _DepthState:
    """Mutable stage structure of one depth during search."""

    def __init__(self, vertex_counts: np.ndarray, stage_map: np.ndarray,
                 unobserved: int | None, smoothing: float):
        self.vertex_counts = vertex_counts
        self.card = vertex_counts.shape[1]
        self.smoothing = smoothing
        self.unobserved = unobserved
        self.stage_of = stage_map.copy()
        n_stages = int(stage_map.max()) + 1
        self.rows: list[np.ndarray | None] = [None] * n_stages
        self.members: list[int] = [0] * n_stages
        self.ll: list[float] = [0.0] * n_stages
        for s in range(n_stages):
            mask = stage_map == s
            self.members[s] = int(mask.sum())
            self.rows[s] = vertex_counts[mask].sum(axis=0)
            self.ll[s] = stage_log_likelihood(self.rows[s], smoothing)
        if unobserved is not None:
            self.rows[unobserved] = None  # excluded from search and likelihood
            self.ll[unobserved] = 0.0
        self.observed_vertices = (
            np.flatnonzero(stage_map != unobserved)
            if unobserved is not None
            else np.arange(len(stage_map))
        )

    def alive_stages(self) -> list[int]:
        return [s for s, row in enumerate(self.rows) if row is not None]

    @property
    def n_alive(self) -> int:
        return sum(row is not None for row in self.rows)

    def loglik(self) -> float:
        return sum(self.ll[s] for s in self.alive_stages())

    def merge_delta(self, s1: int, s2: int) -> float:
        merged = stage_log_likelihood(self.rows[s1] + self.rows[s2], self.smoothing)
        return merged - self.ll[s1] - self.ll[s2]

    def apply_merge(self, s1: int, s2: int) -> None:
        self.rows[s1] = self.rows[s1] + self.rows[s2]
        self.ll[s1] = stage_log_likelihood(self.rows[s1], self.smoothing)
        self.members[s1] += self.members[s2]
        self.stage_of[self.stage_of == s2] = s1
        self.rows[s2] = None
        self.members[s2] = 0
        self.ll[s2] = 0.0

    def move_delta(self, vertex: int, target: int | None) -> float:
        """Log-likelihood delta of moving one vertex (None = fresh stage)."""
        source = int(self.stage_of[vertex])
        row_v = self.vertex_counts[vertex]
        out = stage_log_likelihood(self.rows[source] - row_v, self.smoothing)
        delta = out - self.ll[source]
        if target is None:
            delta += stage_log_likelihood(row_v, self.smoothing)
        else:
            grown = stage_log_likelihood(self.rows[target] + row_v, self.smoothing)
            delta += grown - self.ll[target]
        return delta

    def apply_move(self, vertex: int, target: int | None) -> None:
        source = int(self.stage_of[vertex])
        row_v = self.vertex_counts[vertex]
        self.rows[source] = self.rows[source] - row_v
        self.members[source] -= 1
        self.ll[source] = stage_log_likelihood(self.rows[source], self.smoothing)
        if target is None:
            target = len(self.rows)
            self.rows.append(row_v.copy())
            self.members.append(1)
            self.ll.append(stage_log_likelihood(row_v, self.smoothing))
        else:
            self.rows[target] = self.rows[target] + row_v
            self.members[target] += 1
            self.ll[target] = stage_log_likelihood(self.rows[target], self.smoothing)
        self.stage_of[vertex] = target
        if self.members[source] == 0:
            self.rows[source] = None
            self.ll[source] = 0.0

    def to_stage_map(self) -> tuple[np.ndarray, int | None]:
        return self.stage_of.copy(), self.unobserved


def _build_states(
    staging: Staging, counts: TreeCounts, smoothing: float
) -> list[_DepthState]:
    return [
        _DepthState(
            counts.per_depth[d], staging.stage_maps[d], staging.unobserved[d], smoothing
        )
        for d in range(counts.tree.n_depths)
    ]


def _assemble(
    states: list[_DepthState], counts: TreeCounts, smoothing: float
) -> StagedTreeModel:
    maps, unobs = zip(*(st.to_stage_map() for st in states))
    staging = Staging(maps, unobs).canonicalize()
    return fit_model(counts, staging, smoothing)


def _total_score(states: list[_DepthState], counts: TreeCounts) -> float:
    log_n = math.log(counts.n_records)
    ll = sum(st.loglik() for st in states)
    # unobserved stages are not alive rows, so n_alive counts observed stages only
    n_params = sum(st.n_alive * (st.card - 1) for st in states)
    return ll - 0.5 * n_params * log_n


def _searchable_depths(n_depths: int, max_search_depth: int | None) -> range:
    if max_search_depth is None:
        return range(n_depths)
    return range(min(n_depths, max_search_depth + 1))


def learn_baseline(
    counts: TreeCounts, mode: str, smoothing: float = 0.0
) -> StagedTreeModel:
    """'full' (singleton stages) or 'indep' (one stage per depth) baseline,
    with unobserved vertices pooled either way."""
    if mode == "full":
        staging = full_staging(counts.tree)
    elif mode == "indep":
        staging = indep_staging(counts.tree)
    else:
        raise EstimationError(f"unknown baseline mode {mode!r}")
    return fit_model(counts, mark_unobserved(staging, counts), smoothing)


def hill_climb(
    start: StagedTreeModel,
    counts: TreeCounts,
    direction: str = "free",
    first_improvement: bool = False,
    max_search_depth: int | None = None,
    smoothing: float = 0.0,
) -> tuple[StagedTreeModel, SearchTrace]:
    """Greedy BIC ascent over stagings.

    ``free`` moves one vertex per iteration to another stage or a fresh one
    (the smallest neighborhood that reaches every staging); ``join_only``
    merges one pair of same-depth stages per iteration, taking the best pair
    or, with ``first_improvement``, the first improving pair encountered.
    Depths beyond ``max_search_depth`` keep their starting staging.
    """
    if direction not in ("free", "join_only"):
        raise EstimationError(f"unknown direction {direction!r}")
    t0 = time.perf_counter()
    staging = mark_unobserved(start.staging, counts)
    states = _build_states(staging, counts, smoothing)
    log_n = math.log(counts.n_records)
    penalty = lambda st: 0.5 * (st.card - 1) * log_n  # noqa: E731
    score = _total_score(states, counts)
    steps: list[TraceStep] = []
    depths = _searchable_depths(counts.tree.n_depths, max_search_depth)

    improved = True
    while improved:
        improved = False
        best: tuple[float, int, object] | None = None
        for d in depths:
            st = states[d]
            if direction == "join_only":
                alive = st.alive_stages()
                for i, s1 in enumerate(alive):
                    for s2 in alive[i + 1 :]:
                        delta = st.merge_delta(s1, s2) + penalty(st)
                        if delta > SCORE_TOL and (best is None or delta > best[0]):
                            best = (delta, d, (s1, s2))
                            if first_improvement:
                                break
                    if first_improvement and best is not None:
                        break
            else:
                for v in st.observed_vertices:
                    source = int(st.stage_of[v])
                    targets: list[int | None] = [
                        t for t in st.alive_stages() if t != source
                    ]
                    if st.members[source] > 1:
                        targets.append(None)
                    for t in targets:
                        delta = st.move_delta(int(v), t)
                        if t is None:
                            delta -= penalty(st)
                        elif st.members[source] == 1:
                            delta += penalty(st)
                        if delta > SCORE_TOL and (best is None or delta > best[0]):
                            best = (delta, d, (int(v), t))
                            if first_improvement:
                                break
                    if first_improvement and best is not None:
                        break
            if first_improvement and best is not None:
                break
        if best is None:
            break
        delta, d, move = best
        st = states[d]
        if direction == "join_only":
            s1, s2 = move
            st.apply_merge(s1, s2)
            desc = f"depth {d}: join stages {s1} and {s2}"
        else:
            v, t = move
            st.apply_move(v, t)
            desc = f"depth {d}: move vertex {v} to " + (
                "a fresh stage" if t is None else f"stage {t}"
            )
        steps.append(TraceStep(desc, score, score + delta))
        score += delta
        improved = True

    model = _assemble(states, counts, smoothing)
    return model, SearchTrace(tuple(steps), time.perf_counter() - t0)


def backward_join(
    start: StagedTreeModel,
    counts: TreeCounts,
    kl_threshold: float,
    smoothing: float = 0.0,
    kl_eps: float = KL_EPS,
    max_search_depth: int | None = None,
) -> tuple[StagedTreeModel, SearchTrace]:
    """Merge, within each depth, the closest pair of observed stages by
    symmetrized KL divergence of their fitted florets, while that minimum
    stays below the threshold. Florets are refitted after every merge."""
    if not kl_threshold > 0:
        raise EstimationError("kl_threshold must be > 0")
    t0 = time.perf_counter()
    staging = mark_unobserved(start.staging, counts)
    states = _build_states(staging, counts, smoothing)
    steps: list[TraceStep] = []

    def fitted(st: _DepthState, s: int) -> np.ndarray:
        row = st.rows[s]
        total = row.sum()
        return (row + st.smoothing) / (total + st.smoothing * st.card)

    for d in _searchable_depths(counts.tree.n_depths, max_search_depth):
        st = states[d]
        while True:
            alive = st.alive_stages()
            if len(alive) < 2:
                break
            florets = {s: fitted(st, s) for s in alive}
            best: tuple[float, int, int] | None = None
            for i, s1 in enumerate(alive):
                for s2 in alive[i + 1 :]:
                    div = symmetrized_kl(florets[s1], florets[s2], eps=kl_eps)
                    if best is None or div < best[0]:
                        best = (div, s1, s2)
            if best is None or not best[0] < kl_threshold:
                break
            div, s1, s2 = best
            st.apply_merge(s1, s2)
            steps.append(
                TraceStep(f"depth {d}: join stages {s1} and {s2}", value=div)
            )

    model = _assemble(states, counts, smoothing)
    return model, SearchTrace(tuple(steps), time.perf_counter() - t0)


def _kmeans_labels(
    points: np.ndarray, k: int, rng: np.random.Generator, restarts: int
) -> np.ndarray:
    """Seeded Lloyd iterations on probability vectors; best inertia wins.

    Empty clusters are re-seeded from the point farthest from its assigned
    centroid.
    """
    m = len(points)
    best_labels, best_inertia = None, np.inf
    for _ in range(restarts):
        centroids = points[rng.choice(m, size=k, replace=False)]
        labels = np.full(m, -1)
        for _ in range(100):
            d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
            new_labels = d2.argmin(axis=1)
            assigned_d2 = d2[np.arange(m), new_labels]
            for _ in range(k):
                empties = [c for c in range(k) if not np.any(new_labels == c)]
                if not empties:
                    break
                for empty in empties:
                    farthest = int(assigned_d2.argmax())
                    new_labels[farthest] = empty
                    assigned_d2[farthest] = 0.0
            if np.array_equal(new_labels, labels):
                break
            labels = new_labels
            centroids = np.stack(
                [
                    points[labels == c].mean(axis=0)
                    if np.any(labels == c)
                    else centroids[c]
                    for c in range(k)
                ]
            )
        inertia = float(((points - centroids[labels]) ** 2).sum())
        if inertia < best_inertia:
            best_labels, best_inertia = labels, inertia
    return best_labels


def _hclust_labels(
    points: np.ndarray, k: int, method: str, metric: str
) -> np.ndarray:
    if metric == "totvar":
        condensed = 0.5 * pdist(points, metric="cityblock")
    elif metric == "euclidean":
        condensed = pdist(points, metric="euclidean")
    else:
        raise EstimationError(f"unknown cluster metric {metric!r}")
    tree = linkage(condensed, method=method)
    return fcluster(tree, t=k, criterion="maxclust") - 1


def learn_naive(
    counts: TreeCounts,
    method: str = "hclust",
    smoothing: float = 0.0,
    seed: int = 0,
    restarts: int = 10,
    hclust_linkage: str = "average",
    cluster_metric: str = "totvar",
) -> tuple[StagedTreeModel, SearchTrace]:
    """Staged tree with at most one stage per class level per depth, found by
    clustering the per-vertex empirical florets of the observed vertices.

    Exact duplicate florets are merged before clustering; each depth asks
    for min(number of class levels, number of distinct florets) stages, so
    degenerate depths come out with fewer stages (recorded in the trace).
    """
    if method not in ("hclust", "kmeans"):
        raise EstimationError(f"unknown naive method {method!r}")
    t0 = time.perf_counter()
    tree = counts.tree
    n_classes = tree.class_var.cardinality
    rng = np.random.default_rng(seed)
    steps: list[TraceStep] = []

    maps: list[np.ndarray] = [np.zeros(1, dtype=np.int64)]
    unobs: list[int | None] = [None]
    for d in range(1, tree.n_depths):
        vertex_counts = counts.per_depth[d]
        reach = vertex_counts.sum(axis=1)
        observed = np.flatnonzero(reach > 0)
        stage_map = np.zeros(tree.n_vertices(d), dtype=np.int64)
        if observed.size == 0:
            maps.append(stage_map)
            unobs.append(0)
            steps.append(TraceStep(f"depth {d}: no observed vertices"))
            continue
        florets = vertex_counts[observed] / reach[observed, None]
        distinct, inverse = np.unique(florets, axis=0, return_inverse=True)
        k = min(n_classes, len(distinct))
        if k == len(distinct):
            labels = np.arange(len(distinct))
        elif method == "hclust":
            labels = _hclust_labels(distinct, k, hclust_linkage, cluster_metric)
        else:
            labels = _kmeans_labels(distinct, k, rng, restarts)
        stage_map[observed] = labels[inverse]
        unobserved_id = None
        if observed.size < tree.n_vertices(d):
            unobserved_id = int(labels.max()) + 1
            mask = np.ones(tree.n_vertices(d), dtype=bool)
            mask[observed] = False
            stage_map[mask] = unobserved_id
        maps.append(stage_map)
        unobs.append(unobserved_id)
        steps.append(
            TraceStep(
                f"depth {d}: clustered {len(distinct)} distinct florets "
                f"({observed.size} observed vertices) into {int(labels.max()) + 1} stages"
            )
        )

    staging = Staging(tuple(maps), tuple(unobs)).canonicalize()
    model = fit_model(counts, staging, smoothing)
    return model, SearchTrace(tuple(steps), time.perf_counter() - t0)


def learn(counts: TreeCounts, config: LearnConfig) -> tuple[StagedTreeModel, SearchTrace]:
    """Run the configured algorithm and return (model, trace)."""
    algo = config.algorithm
    if algo in ("full", "indep"):
        t0 = time.perf_counter()
        model = learn_baseline(counts, algo, config.smoothing)
        return model, SearchTrace((), time.perf_counter() - t0)
    if algo in ("hc_full", "hc_indep"):
        start = learn_baseline(
            counts, "full" if algo == "hc_full" else "indep", config.smoothing
        )
        return hill_climb(
            start,
            counts,
            direction="free",
            max_search_depth=config.max_search_depth,
            smoothing=config.smoothing,
        )
    if algo in ("bhc", "fbhc"):
        start = learn_baseline(counts, "full", config.smoothing)
        return hill_climb(
            start,
            counts,
            direction="join_only",
            first_improvement=(algo == "fbhc"),
            max_search_depth=config.max_search_depth,
            smoothing=config.smoothing,
        )
    if algo == "bj":
        start = learn_baseline(counts, "full", config.smoothing)
        return backward_join(
            start,
            counts,
            kl_threshold=config.kl_threshold,
            smoothing=config.smoothing,
            kl_eps=config.kl_eps,
            max_search_depth=config.max_search_depth,
        )
    method = "hclust" if algo == "naive_hc" else "kmeans"
    return learn_naive(
        counts,
        method=method,
        smoothing=config.smoothing,
        seed=config.seed,
        restarts=config.kmeans_restarts,
        hclust_linkage=config.hclust_linkage,
        cluster_metric=config.cluster_metric,
    )
