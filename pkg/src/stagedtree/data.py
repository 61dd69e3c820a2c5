"""Categorical datasets: CSV ingestion, level encoding, tree counts, splits.

Datasets are immutable after load. Missing values are a hard error: a row
with an empty cell would corrupt count semantics, so no imputation is ever
attempted. Level order defaults to first appearance in the file; a sidecar
ordering file (one line per variable: name, then ordered levels) can pin it
for serialization stability.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DatasetError
from .tree import EventTree, VariableSpec, _as_readonly


@dataclass(frozen=True, eq=False)
class CategoricalDataset:
    """Labelled records over named categorical variables.

    ``records`` holds one level index per variable per record, columns in
    ``variables`` order. ``class_column`` designates the class variable.
    """

    variables: tuple[VariableSpec, ...]
    records: np.ndarray
    class_column: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "variables", tuple(self.variables))
        records = _as_readonly(np.asarray(self.records, dtype=np.int64))
        object.__setattr__(self, "records", records)
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise DatasetError(f"duplicate variable names: {names}")
        if self.class_column not in names:
            raise DatasetError(f"class column {self.class_column!r} not among {names}")
        if records.ndim != 2 or records.shape[1] != len(self.variables):
            raise DatasetError(
                f"records must have shape (n, {len(self.variables)}), got {records.shape}"
            )
        for j, var in enumerate(self.variables):
            col = records[:, j]
            if col.size and (col.min() < 0 or col.max() >= var.cardinality):
                raise DatasetError(f"level index out of range in column {var.name!r}")

    @property
    def n_records(self) -> int:
        return int(self.records.shape[0])

    @cached_property
    def _index_of(self) -> dict[str, int]:
        return {v.name: j for j, v in enumerate(self.variables)}

    def column_index(self, name: str) -> int:
        try:
            return self._index_of[name]
        except KeyError:
            raise DatasetError(f"variable {name!r} not in dataset") from None

    def variable(self, name: str) -> VariableSpec:
        return self.variables[self.column_index(name)]

    @property
    def class_var(self) -> VariableSpec:
        return self.variable(self.class_column)

    @property
    def feature_vars(self) -> tuple[VariableSpec, ...]:
        return tuple(v for v in self.variables if v.name != self.class_column)

    def column(self, name: str) -> np.ndarray:
        return self.records[:, self.column_index(name)]

    def take(self, indices: np.ndarray) -> "CategoricalDataset":
        return CategoricalDataset(self.variables, self.records[indices], self.class_column)

    def decode_record(self, row: int) -> tuple[str, ...]:
        return tuple(
            v.levels[d] for v, d in zip(self.variables, self.records[row])
        )

    def encode_record(self, labels: Sequence[str]) -> tuple[int, ...]:
        if len(labels) != len(self.variables):
            raise DatasetError(
                f"record needs {len(self.variables)} values, got {len(labels)}"
            )
        return tuple(v.level_index(lb) for v, lb in zip(self.variables, labels))


def load_csv(
    path: str | Path,
    class_column: str,
    level_order: Mapping[str, Sequence[str]] | None = None,
) -> CategoricalDataset:
    """Load a header-rowed CSV of categorical columns.

    Levels are inferred in first-appearance order unless ``level_order``
    pins them. Empty cells, a missing class column, a single-level column
    and a header-only file are errors.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        rows = list(reader)
    if class_column not in header:
        raise DatasetError(f"{path}: class column {class_column!r} not in header {header}")
    if len(set(header)) != len(header):
        raise DatasetError(f"{path}: duplicate column names")
    if not rows:
        raise DatasetError(f"{path}: no data rows")

    n_cols = len(header)
    levels: list[list[str]] = [[] for _ in header]
    seen: list[dict[str, int]] = [{} for _ in header]
    if level_order:
        for j, name in enumerate(header):
            if name in level_order:
                for label in level_order[name]:
                    seen[j][str(label)] = len(levels[j])
                    levels[j].append(str(label))

    encoded = np.empty((len(rows), n_cols), dtype=np.int64)
    pinned = {name for name in (level_order or ())}
    for i, row in enumerate(rows):
        if len(row) != n_cols:
            raise DatasetError(f"{path}: row {i + 2} has {len(row)} cells, expected {n_cols}")
        for j, cell in enumerate(row):
            if cell == "":
                raise DatasetError(
                    f"{path}: empty cell at row {i + 2}, column {header[j]!r}"
                    " (missing values are not supported)"
                )
            idx = seen[j].get(cell)
            if idx is None:
                if header[j] in pinned:
                    raise DatasetError(
                        f"{path}: level {cell!r} of {header[j]!r} not in pinned order"
                    )
                idx = len(levels[j])
                seen[j][cell] = idx
                levels[j].append(cell)
            encoded[i, j] = idx

    variables = []
    for name, lvls in zip(header, levels):
        if len(lvls) < 2:
            raise DatasetError(
                f"{path}: column {name!r} has {len(lvls)} observed level(s); need >= 2"
            )
        variables.append(VariableSpec(name, tuple(lvls)))
    return CategoricalDataset(tuple(variables), encoded, class_column)


def read_levels_file(path: str | Path) -> dict[str, tuple[str, ...]]:
    """Sidecar level ordering: one CSV line per variable, name then levels."""
    out: dict[str, tuple[str, ...]] = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for line in csv.reader(fh):
            if not line:
                continue
            if len(line) < 3:
                raise DatasetError(f"{path}: line {line!r} needs a name and >= 2 levels")
            out[line[0]] = tuple(line[1:])
    return out


@dataclass(frozen=True, eq=False)
class TreeCounts:
    """Per-depth edge counts of a dataset routed through an event tree.

    ``per_depth[d][v, l]`` counts the records whose prefix reaches vertex v
    at depth d and then takes level l of the depth-d variable. Counts
    conserve flow: level counts at depth d equal the reach counts of the
    corresponding vertices at depth d+1.
    """

    tree: EventTree
    per_depth: tuple[np.ndarray, ...]
    n_records: int

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "per_depth",
            tuple(_as_readonly(np.asarray(c, dtype=np.int64)) for c in self.per_depth),
        )
        if len(self.per_depth) != self.tree.n_depths:
            raise DatasetError("one count matrix required per depth")
        for d, counts in enumerate(self.per_depth):
            expected = (self.tree.n_vertices(d), self.tree.cardinalities[d])
            if counts.shape != expected:
                raise DatasetError(
                    f"depth {d}: count matrix shape {counts.shape} != {expected}"
                )
            if np.any(counts < 0):
                raise DatasetError(f"depth {d}: negative counts")

    def reach_counts(self, depth: int) -> np.ndarray:
        """Number of records reaching each vertex of a depth."""
        return self.per_depth[depth].sum(axis=1)

    def flow_conserved(self) -> bool:
        if int(self.per_depth[0].sum()) != self.n_records:
            return False
        for d in range(self.tree.n_depths - 1):
            if not np.array_equal(self.per_depth[d].ravel(), self.reach_counts(d + 1)):
                return False
        return True


def tree_counts(dataset: CategoricalDataset, tree: EventTree) -> TreeCounts:
    """Count dataset records along the edges of an event tree.

    The tree's variables must all exist in the dataset (its order may differ
    from the dataset's column order).
    """
    cols = []
    for var in tree.variables:
        j = dataset.column_index(var.name)
        if dataset.variables[j].levels != var.levels:
            raise DatasetError(
                f"variable {var.name!r} has levels {dataset.variables[j].levels} "
                f"in the dataset but {var.levels} in the tree"
            )
        cols.append(j)
    digits = dataset.records[:, cols]

    per_depth = []
    vertex = np.zeros(dataset.n_records, dtype=np.int64)
    for d in range(tree.n_depths):
        card = tree.cardinalities[d]
        n_vertices = tree.n_vertices(d)
        edge = vertex * card + digits[:, d]
        counts = np.bincount(edge, minlength=n_vertices * card)
        per_depth.append(counts.reshape(n_vertices, card))
        vertex = edge
    return TreeCounts(tree, tuple(per_depth), dataset.n_records)


def split(
    dataset: CategoricalDataset, train_fraction: float, seed: int
) -> tuple[CategoricalDataset, CategoricalDataset]:
    """Deterministic seeded shuffle-then-take split (no stratification)."""
    if not 0.0 < train_fraction < 1.0:
        raise DatasetError(f"train fraction must be in (0, 1), got {train_fraction}")
    n = dataset.n_records
    n_train = int(round(train_fraction * n))
    if n_train == 0 or n_train == n:
        raise DatasetError(
            f"split of {n} records at fraction {train_fraction} leaves an empty part"
        )
    perm = np.random.default_rng(seed).permutation(n)
    return dataset.take(perm[:n_train]), dataset.take(perm[n_train:])
