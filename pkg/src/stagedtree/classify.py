"""Bayes classification with a staged tree model, plus evaluation metrics.

Prediction follows the generative rule: the posterior over class levels is
the vector of joint path products p(c, x), normalized. When every class
path has probability zero (possible with unsmoothed florets), the class
marginal is used instead so the classifier always answers; such fallbacks
are flagged on the prediction and counted in evaluation reports.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .data import CategoricalDataset
from .errors import EvaluationError, VariableError
from .tree import StagedTreeModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Prediction:
    """Predicted class level and the posterior it came from."""

    predicted: str
    posterior: np.ndarray
    used_fallback: bool = False


@dataclass(frozen=True)
class MetricsReport:
    """Evaluation summary over a test set.

    ``confusion`` holds proportions with rows indexing the true class and
    columns the predicted class; accuracy is its trace. Balanced accuracy
    averages per-class recalls over the classes present in the test set.
    AUC is the midrank Mann-Whitney statistic of the positive-class
    posterior (binary class only; NaN when a class is absent).
    """

    class_levels: tuple[str, ...]
    confusion: np.ndarray
    accuracy: float
    balanced_accuracy: float
    auc: float
    n_test: int
    n_fallback: int = 0


def posterior_batch(
    model: StagedTreeModel, features: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Posteriors over class levels for a batch of feature assignments.

    ``features`` holds one level index per feature per row, in tree order.
    Returns (posteriors, fallback mask).
    """
    tree = model.tree
    features = np.asarray(features, dtype=np.int64)
    if features.ndim != 2 or features.shape[1] != tree.n_features:
        raise VariableError(
            f"feature matrix must have shape (n, {tree.n_features})"
        )
    for d in range(tree.n_features):
        col = features[:, d]
        if col.size and (col.min() < 0 or col.max() >= tree.cardinalities[d + 1]):
            raise VariableError(
                f"level index out of range for feature {tree.feature_vars[d].name!r}"
            )
    n = features.shape[0]
    n_classes = tree.class_var.cardinality
    class_prior = model.floret_probs[0][model.staging.stage_maps[0][0]]
    joint = np.tile(class_prior, (n, 1))
    vertices = np.tile(np.arange(n_classes, dtype=np.int64), (n, 1))
    for d in range(1, tree.n_depths):
        stages = model.staging.stage_maps[d][vertices]
        level = features[:, d - 1]
        joint *= model.floret_probs[d][stages, level[:, None]]
        vertices = vertices * tree.cardinalities[d] + level[:, None]
    totals = joint.sum(axis=1)
    fallback = totals == 0.0
    if fallback.any():
        logger.debug("class-marginal fallback on %d of %d instances", fallback.sum(), n)
        joint[fallback] = class_prior
        totals = joint.sum(axis=1)
    return joint / totals[:, None], fallback


def posterior(model: StagedTreeModel, x: Sequence[int]) -> np.ndarray:
    """Posterior over class levels for one feature assignment (level indices
    in tree order)."""
    post, _ = posterior_batch(model, np.asarray(x, dtype=np.int64)[None, :])
    return post[0]


def predict(model: StagedTreeModel, x: Sequence[int]) -> Prediction:
    """Most probable a posteriori class; exact ties go to the lowest class index."""
    post, fallback = posterior_batch(model, np.asarray(x, dtype=np.int64)[None, :])
    idx = int(np.argmax(post[0]))
    return Prediction(
        predicted=model.tree.class_var.levels[idx],
        posterior=post[0],
        used_fallback=bool(fallback[0]),
    )


def _encode_features(model: StagedTreeModel, dataset: CategoricalDataset) -> np.ndarray:
    cols = []
    for var in model.tree.feature_vars:
        j = dataset.column_index(var.name)
        if dataset.variables[j].levels != var.levels:
            raise EvaluationError(
                f"levels of {var.name!r} differ between model and dataset"
            )
        cols.append(j)
    return dataset.records[:, cols]


def auc_midrank(scores: np.ndarray, positive: np.ndarray) -> float:
    """Mann-Whitney AUC with midrank tie handling; NaN if a class is absent."""
    n_pos = int(positive.sum())
    n_neg = len(positive) - n_pos
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    ranks = rankdata(scores, method="average")
    return float(
        (ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    )


def evaluate(
    model: StagedTreeModel,
    test: CategoricalDataset,
    positive_class: str | None = None,
) -> MetricsReport:
    """Confusion proportions, accuracy, balanced accuracy and (binary) AUC
    of argmax predictions on a test set."""
    if test.n_records == 0:
        raise EvaluationError("test set is empty")
    class_var = model.tree.class_var
    if test.variable(class_var.name).levels != class_var.levels:
        raise EvaluationError("class levels differ between model and test set")
    truth = test.column(class_var.name)
    posteriors, fallback = posterior_batch(model, _encode_features(model, test))
    predicted = posteriors.argmax(axis=1)

    n_classes = class_var.cardinality
    confusion = np.zeros((n_classes, n_classes))
    np.add.at(confusion, (truth, predicted), 1.0)
    confusion /= test.n_records
    accuracy = float(np.trace(confusion))
    row_totals = confusion.sum(axis=1)
    present = row_totals > 0
    recalls = np.diag(confusion)[present] / row_totals[present]
    balanced = float(recalls.mean())

    auc = float("nan")
    if positive_class is not None or n_classes == 2:
        if n_classes != 2:
            raise EvaluationError("AUC requires a binary class")
        pos_idx = (
            class_var.level_index(positive_class) if positive_class is not None else 1
        )
        auc = auc_midrank(posteriors[:, pos_idx], truth == pos_idx)

    return MetricsReport(
        class_levels=class_var.levels,
        confusion=confusion,
        accuracy=accuracy,
        balanced_accuracy=balanced,
        auc=auc,
        n_test=test.n_records,
        n_fallback=int(fallback.sum()),
    )
