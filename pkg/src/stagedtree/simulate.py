"""Synthetic dataset generators for the bundled experiments."""

from __future__ import annotations

import numpy as np

from .data import CategoricalDataset
from .errors import DatasetError
from .tree import VariableSpec

_SIGN_LEVELS = ("-1", "+1")


def _parity_dataset(
    feature_names: list[str], signal: int, n_records: int, seed: int
) -> CategoricalDataset:
    if n_records < 1:
        raise DatasetError("need at least one record")
    rng = np.random.default_rng(seed)
    feats = rng.integers(0, 2, size=(n_records, len(feature_names)), dtype=np.int64)
    # level 1 is "+1"; the product of signs is + iff the count of -1s is even
    n_minus = np.sum(feats[:, :signal] == 0, axis=1)
    class_digit = (n_minus % 2 == 0).astype(np.int64)
    variables = (
        VariableSpec("parity", _SIGN_LEVELS),
        *(VariableSpec(name, _SIGN_LEVELS) for name in feature_names),
    )
    records = np.column_stack([class_digit, feats])
    return CategoricalDataset(variables, records, "parity")


def generate_parity(n_features: int, n_records: int, seed: int) -> CategoricalDataset:
    """i.i.d. uniform sign features with the class equal to their product."""
    if n_features < 1:
        raise DatasetError("need at least one feature")
    names = [f"x{i + 1}" for i in range(n_features)]
    return _parity_dataset(names, n_features, n_records, seed)


def generate_parity_noise(
    n_records: int, seed: int, n_noise: int = 3
) -> CategoricalDataset:
    """Class equal to the product of the first two sign features; the
    remaining features are independent noise."""
    if n_noise < 0:
        raise DatasetError("n_noise must be >= 0")
    names = ["x1", "x2"] + [f"z{i + 1}" for i in range(n_noise)]
    return _parity_dataset(names, 2, n_records, seed)
