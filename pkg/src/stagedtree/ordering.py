"""Feature ordering by greedy conditional mutual information.

The order is built by repeatedly picking the feature with the largest
plug-in conditional mutual information with the class, given all features
picked so far. Estimates come from (optionally pseudo-count smoothed)
empirical frequencies in natural-log units; ties break by dataset column
order, which makes the result deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import CategoricalDataset
from .errors import DatasetError

#: Cells above which a conditioning table is refused (guards pathological inputs).
MAX_CMI_CELLS = 10**7


@dataclass(frozen=True)
class OrderingResult:
    """A feature permutation and the CMI value that selected each step."""

    order: tuple[str, ...]
    scores: tuple[float, ...]


def conditional_mutual_information(
    dataset: CategoricalDataset,
    x: str,
    c: str,
    given: tuple[str, ...] = (),
    smoothing: float = 0.0,
    max_cells: int = MAX_CMI_CELLS,
) -> float:
    """Plug-in estimate of I(X; C | given) in nats.

    Cells of the (given, x, c) contingency table get ``smoothing`` added
    before normalization. Conditioning cells with zero mass contribute 0,
    as does any zero joint cell (0 * ln 0 := 0).
    """
    if x in given:
        raise DatasetError(f"feature {x!r} cannot condition on itself")
    if c == x or c in given:
        raise DatasetError(f"class {c!r} overlaps the query variables")
    names = (*given, x, c)
    cards = tuple(dataset.variable(n).cardinality for n in names)
    n_cells = int(np.prod(cards, dtype=np.int64))
    if n_cells > max_cells:
        raise DatasetError(
            f"contingency table of {n_cells} cells exceeds the cap of {max_cells}"
        )
    cols = np.stack([dataset.column(n) for n in names], axis=0)
    flat = np.ravel_multi_index(cols, cards)
    table = np.bincount(flat, minlength=n_cells).astype(np.float64)
    table = table.reshape(cards) + smoothing

    n_z = len(given)
    joint = table / table.sum()  # p(z, x, c)
    p_z = joint.sum(axis=(n_z, n_z + 1), keepdims=True)
    p_xz = joint.sum(axis=n_z + 1, keepdims=True)
    p_cz = joint.sum(axis=n_z, keepdims=True)
    mask = joint > 0
    ratio = np.ones_like(joint)
    denom = (p_xz * p_cz)[mask]
    ratio[mask] = joint[mask] * np.broadcast_to(p_z, joint.shape)[mask] / denom
    return float(np.sum(joint[mask] * np.log(ratio[mask])))


def cmi_order(dataset: CategoricalDataset, smoothing: float = 0.0) -> OrderingResult:
    """Greedy CMI feature order for the dataset's class variable."""
    features = [v.name for v in dataset.feature_vars]
    if not features:
        raise DatasetError("ordering needs at least one feature")
    c = dataset.class_column
    chosen: list[str] = []
    scores: list[float] = []
    remaining = list(features)
    while remaining:
        best_name, best_score = None, -np.inf
        for name in remaining:  # dataset column order; strict > keeps the first max
            score = conditional_mutual_information(
                dataset, name, c, tuple(chosen), smoothing
            )
            if score > best_score:
                best_name, best_score = name, score
        chosen.append(best_name)
        scores.append(best_score)
        remaining.remove(best_name)
    return OrderingResult(tuple(chosen), tuple(scores))
