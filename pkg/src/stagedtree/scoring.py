"""Floret estimation, likelihood, BIC scoring and floret divergences.

Unobserved vertices (zero reach count) are pooled per depth into a reserved
stage whose floret is fixed uniform; that stage is excluded from search and
contributes no free parameters and no likelihood.

The score maximized throughout the package is
``log_likelihood - (n_params / 2) * ln(n_records)``; maximizing it is
order-equivalent to minimizing the classical BIC.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import TreeCounts
from .errors import EstimationError
from .tree import EventTree, StagedTreeModel, Staging, free_parameter_count

#: Default probability floor applied before Kullback-Leibler divergences.
KL_EPS = 1e-12


@dataclass(frozen=True)
class ScoreValue:
    """Log-likelihood, parameter count and sample size behind a BIC score."""

    log_likelihood: float
    n_params: int
    n_records: int

    @property
    def score(self) -> float:
        return self.log_likelihood - 0.5 * self.n_params * math.log(self.n_records)


@dataclass(frozen=True, eq=False)
class StageCounts:
    """Level counts aggregated over each stage's vertices, per depth."""

    staging: Staging
    per_depth: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "per_depth", tuple(self.per_depth))


def stage_counts(counts: TreeCounts, staging: Staging) -> StageCounts:
    """Aggregate vertex-level counts into stage-level counts."""
    out = []
    for d in range(counts.tree.n_depths):
        n_stages = staging.n_stages(d)
        acc = np.zeros((n_stages, counts.tree.cardinalities[d]), dtype=np.int64)
        np.add.at(acc, staging.stage_maps[d], counts.per_depth[d])
        acc.setflags(write=False)
        out.append(acc)
    return StageCounts(staging, tuple(out))


def mark_unobserved(staging: Staging, counts: TreeCounts) -> Staging:
    """Move every zero-reach vertex into its depth's reserved unobserved stage.

    Observed vertices never end up in the unobserved stage: any observed
    vertex found in a designated unobserved stage is split off into its own
    fresh stage. The result is canonical (unobserved stage last).
    """
    maps = []
    unobs_ids = []
    for d in range(counts.tree.n_depths):
        reach = counts.reach_counts(d)
        stage_map = staging.stage_maps[d].copy()
        old_unobs = staging.unobserved[d]
        fresh = int(stage_map.max()) + 1
        if old_unobs is not None:
            for v in np.flatnonzero((stage_map == old_unobs) & (reach > 0)):
                stage_map[v] = fresh
                fresh += 1
        unobserved_mask = reach == 0
        if unobserved_mask.any():
            stage_map[unobserved_mask] = fresh
            unobs_ids.append(fresh)
        else:
            unobs_ids.append(None)
        maps.append(stage_map)
    return Staging(tuple(maps), tuple(unobs_ids)).canonicalize()


def fit_floret_probabilities(
    counts: StageCounts, smoothing: float = 0.0
) -> tuple[np.ndarray, ...]:
    """Per-stage probability vectors from aggregated counts.

    Observed stage s over an L-level variable gets
    ``(count_l + smoothing) / (total + smoothing * L)``; unobserved stages
    get the exact uniform vector.
    """
    if not math.isfinite(smoothing) or smoothing < 0:
        raise EstimationError(f"smoothing must be finite and >= 0, got {smoothing}")
    florets = []
    for d, stage_rows in enumerate(counts.per_depth):
        n_stages, card = stage_rows.shape
        totals = stage_rows.sum(axis=1)
        unobs = counts.staging.unobserved[d]
        observed = np.ones(n_stages, dtype=bool)
        if unobs is not None:
            observed[unobs] = False
        if smoothing == 0.0 and np.any(totals[observed] == 0):
            raise EstimationError(
                f"depth {d}: observed stage with zero total at smoothing 0 "
                "(mark_unobserved must precede fitting)"
            )
        numer = stage_rows + smoothing
        denom = (totals + smoothing * card)[:, None]
        with np.errstate(invalid="ignore"):
            probs = np.where(denom > 0, numer / np.where(denom == 0, 1.0, denom), 0.0)
        if unobs is not None:
            probs[unobs] = 1.0 / card
        florets.append(probs)
    return tuple(florets)


def fit_model(
    counts: TreeCounts, staging: Staging, smoothing: float = 0.0
) -> StagedTreeModel:
    """Fit floret probabilities for a staging and assemble the model."""
    canonical = staging.canonicalize()
    florets = fit_floret_probabilities(stage_counts(counts, canonical), smoothing)
    return StagedTreeModel(counts.tree, canonical, florets)


def log_likelihood(model: StagedTreeModel, counts: TreeCounts) -> float:
    """Multinomial log-likelihood of counts under the model, in nats.

    Zero counts contribute nothing (0 * ln 0 := 0); a positive count on a
    zero-probability edge yields -inf, never a silent overflow.
    """
    total = 0.0
    for d in range(model.tree.n_depths):
        probs = model.floret_probs[d][model.staging.stage_maps[d]]
        cts = counts.per_depth[d]
        mask = cts > 0
        if not mask.any():
            continue
        p = probs[mask]
        if np.any(p == 0.0):
            return float("-inf")
        total += float(np.sum(cts[mask] * np.log(p)))
    return total


def bic_score(model: StagedTreeModel, counts: TreeCounts) -> ScoreValue:
    """BIC score of a fitted model on the counts it was fitted from."""
    if counts.n_records < 1:
        raise EstimationError("BIC needs at least one record")
    return ScoreValue(
        log_likelihood=log_likelihood(model, counts),
        n_params=free_parameter_count(model),
        n_records=counts.n_records,
    )


def stage_log_likelihood(stage_row: np.ndarray, smoothing: float = 0.0) -> float:
    """Log-likelihood contribution of one stage fitted from its own counts."""
    total = int(stage_row.sum())
    if total == 0:
        return 0.0
    nz = stage_row[stage_row > 0]
    if smoothing == 0.0:
        return float(np.sum(nz * np.log(nz / total)))
    denom = total + smoothing * len(stage_row)
    probs = (nz + smoothing) / denom
    return float(np.sum(nz * np.log(probs)))


def depth_scores(
    model: StagedTreeModel, counts: TreeCounts, smoothing: float = 0.0
) -> list[float]:
    """Per-depth decomposition of the BIC score of a freshly fitted staging.

    Each depth contributes its stages' log-likelihood minus its own share of
    the parameter penalty; the values sum to the global score, which is what
    makes single-depth search moves locally scorable.
    """
    agg = stage_counts(counts, model.staging)
    log_n = math.log(counts.n_records)
    out = []
    for d in range(model.tree.n_depths):
        unobs = model.staging.unobserved[d]
        ll = sum(
            stage_log_likelihood(agg.per_depth[d][s], smoothing)
            for s in range(model.staging.n_stages(d))
            if s != unobs
        )
        penalty = (
            0.5
            * model.staging.n_observed_stages(d)
            * (model.tree.cardinalities[d] - 1)
            * log_n
        )
        out.append(ll - penalty)
    return out


def _floor_and_renormalize(p: np.ndarray, eps: float) -> np.ndarray:
    floored = np.maximum(np.asarray(p, dtype=np.float64), eps)
    return floored / floored.sum()


def symmetrized_kl(
    p: np.ndarray, q: np.ndarray, eps: float = KL_EPS
) -> float:
    """Sum of both Kullback-Leibler directions after eps-flooring, in nats.

    Entries are floored at ``eps`` and renormalized first, so boundary
    (zero) probabilities produce large finite values. Computed termwise as
    (p - q) * (ln p - ln q), which is exactly symmetric in its arguments.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise EstimationError(f"length mismatch: {p.shape} vs {q.shape}")
    pf = _floor_and_renormalize(p, eps)
    qf = _floor_and_renormalize(q, eps)
    return float(np.sum((pf - qf) * (np.log(pf) - np.log(qf))))


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    """Total variation distance between two probability vectors, in [0, 1]."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise EstimationError(f"length mismatch: {p.shape} vs {q.shape}")
    return float(0.5 * np.abs(p - q).sum())
