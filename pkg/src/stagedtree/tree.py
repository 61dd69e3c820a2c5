"""Event trees, stagings and staged tree models over ordered categorical variables.

An event tree over an ordered sequence of categorical variables has one
internal vertex for every value-prefix of the order; the vertex at depth d
branches on the d-th variable. A staging partitions the internal vertices of
each depth into stages; vertices in one stage share a single conditional
probability vector (floret) over the next variable's levels. Joint
probabilities of full assignments are products of floret entries along
root-to-leaf paths.

Vertices are addressed by a mixed-radix integer over their prefix digits,
with the class variable (depth 0) as the most significant digit. This fixes
a canonical, serialization-stable enumeration of vertices, leaves and
stages.

All types here are immutable after construction and all operations are pure
reads; instances can be shared freely across threads.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import ModelError, StagingError, VariableError

#: Tolerance for each floret probability vector summing to one.
FLORET_SUM_TOL = 1e-12

#: Tolerance for the probabilities of all atoms summing to one.
ATOM_SUM_TOL = 1e-9

#: Default cap on the number of leaves for exhaustive joint enumeration.
MAX_JOINT_LEAVES = 10**7

#: Default cap on enumerated prefix cells during context read-out.
MAX_CONTEXT_CELLS = 10**6


@dataclass(frozen=True)
class VariableSpec:
    """A named categorical variable with a fixed, ordered set of levels."""

    name: str
    levels: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "levels", tuple(str(lv) for lv in self.levels))
        if len(self.levels) < 2:
            raise VariableError(
                f"variable {self.name!r} needs at least 2 levels, got {len(self.levels)}"
            )
        if len(set(self.levels)) != len(self.levels):
            raise VariableError(f"variable {self.name!r} has duplicate levels")

    @property
    def cardinality(self) -> int:
        return len(self.levels)

    def level_index(self, label: str) -> int:
        """Index of a level label; raises VariableError for unknown labels."""
        try:
            return self.levels.index(str(label))
        except ValueError:
            raise VariableError(
                f"unknown level {label!r} for variable {self.name!r}"
            ) from None


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    out = np.asarray(arr)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class EventTree:
    """Event tree for a class variable followed by an ordered feature sequence.

    Depth d holds one vertex per assignment of the first d variables
    (class first); the root is the single depth-0 vertex. Every root-to-leaf
    path has length p+1 and corresponds to exactly one full assignment.
    """

    class_var: VariableSpec
    feature_vars: tuple[VariableSpec, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "feature_vars", tuple(self.feature_vars))
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise VariableError(f"duplicate variable names in tree: {names}")

    @property
    def variables(self) -> tuple[VariableSpec, ...]:
        return (self.class_var, *self.feature_vars)

    @property
    def n_features(self) -> int:
        return len(self.feature_vars)

    @cached_property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(v.cardinality for v in self.variables)

    @property
    def n_depths(self) -> int:
        """Number of internal (branching) depths: the class depth plus one per feature."""
        return self.n_features + 1

    def n_vertices(self, depth: int) -> int:
        """Number of internal vertices at a depth in 0..p."""
        if not 0 <= depth <= self.n_features:
            raise ValueError(f"depth {depth} outside 0..{self.n_features}")
        return int(np.prod(self.cardinalities[:depth], dtype=np.int64))

    @cached_property
    def n_leaves(self) -> int:
        return int(np.prod(self.cardinalities, dtype=np.int64))

    def variable_at(self, depth: int) -> VariableSpec:
        """The variable on which depth-d vertices branch."""
        return self.variables[depth]

    def vertex_index(self, digits: Sequence[int]) -> int:
        """Mixed-radix index of the vertex reached by a prefix of level indices."""
        depth = len(digits)
        if depth == 0:
            return 0
        cards = self.cardinalities[:depth]
        for digit, card, var in zip(digits, cards, self.variables):
            if not 0 <= digit < card:
                raise VariableError(
                    f"level index {digit} out of range for variable {var.name!r}"
                )
        return int(np.ravel_multi_index(tuple(digits), cards))

    def vertex_digits(self, depth: int, index: int) -> tuple[int, ...]:
        """Inverse of :meth:`vertex_index` at a given depth."""
        if depth == 0:
            if index != 0:
                raise ValueError("depth 0 has a single vertex")
            return ()
        return tuple(
            int(d) for d in np.unravel_index(index, self.cardinalities[:depth])
        )

    def atom_index(self, outcome: Sequence[int]) -> int:
        """Leaf index of a full assignment (class level first)."""
        if len(outcome) != self.n_features + 1:
            raise VariableError(
                f"outcome needs {self.n_features + 1} levels, got {len(outcome)}"
            )
        cards = self.cardinalities
        for digit, card, var in zip(outcome, cards, self.variables):
            if not 0 <= digit < card:
                raise VariableError(
                    f"level index {digit} out of range for variable {var.name!r}"
                )
        return int(np.ravel_multi_index(tuple(outcome), cards))

    def atom_digits(self, index: int) -> tuple[int, ...]:
        return tuple(int(d) for d in np.unravel_index(index, self.cardinalities))

    def iter_atoms(self) -> Iterator[tuple[int, ...]]:
        """All full assignments in leaf-index order."""
        return itertools.product(*(range(c) for c in self.cardinalities))

    def encode_outcome(self, labels: Sequence[str]) -> tuple[int, ...]:
        """Translate level labels (class first) into level indices."""
        if len(labels) != self.n_features + 1:
            raise VariableError(
                f"outcome needs {self.n_features + 1} labels, got {len(labels)}"
            )
        return tuple(v.level_index(lb) for v, lb in zip(self.variables, labels))

    def decode_outcome(self, digits: Sequence[int]) -> tuple[str, ...]:
        return tuple(v.levels[d] for v, d in zip(self.variables, digits))


def build_event_tree(
    class_var: VariableSpec, feature_vars: Iterable[VariableSpec]
) -> EventTree:
    """Construct an event tree with the canonical mixed-radix vertex indexing."""
    return EventTree(class_var, tuple(feature_vars))


@dataclass(frozen=True, eq=False)
class Staging:
    """Per-depth partition of internal vertices into stages.

    ``stage_maps[d][v]`` is the stage id of vertex v at depth d. Stage ids
    within a depth are contiguous integers from 0. ``unobserved[d]`` names
    the depth's reserved unobserved stage, or None when every vertex is
    observed. Stages never span depths: the per-depth representation makes a
    cross-depth stage unrepresentable, and :meth:`validate` rejects any
    stage map whose length differs from the depth's vertex count.
    """

    stage_maps: tuple[np.ndarray, ...]
    unobserved: tuple[int | None, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "stage_maps",
            tuple(_as_readonly(np.asarray(m, dtype=np.int64)) for m in self.stage_maps),
        )
        object.__setattr__(self, "unobserved", tuple(self.unobserved))
        if len(self.stage_maps) != len(self.unobserved):
            raise StagingError("stage_maps and unobserved must cover the same depths")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Staging):
            return NotImplemented
        return self.unobserved == other.unobserved and all(
            np.array_equal(a, b) for a, b in zip(self.stage_maps, other.stage_maps)
        )

    @property
    def n_depths(self) -> int:
        return len(self.stage_maps)

    def n_stages(self, depth: int) -> int:
        return int(self.stage_maps[depth].max()) + 1

    def n_observed_stages(self, depth: int) -> int:
        return self.n_stages(depth) - (1 if self.unobserved[depth] is not None else 0)

    def observed_stage_ids(self, depth: int) -> list[int]:
        unobs = self.unobserved[depth]
        return [s for s in range(self.n_stages(depth)) if s != unobs]

    def validate(self, tree: EventTree) -> None:
        """Check shape, totality and contiguity against a tree."""
        if self.n_depths != tree.n_depths:
            raise StagingError(
                f"staging covers {self.n_depths} depths, tree has {tree.n_depths}"
            )
        for d, stage_map in enumerate(self.stage_maps):
            if stage_map.ndim != 1 or len(stage_map) != tree.n_vertices(d):
                raise StagingError(
                    f"depth {d}: stage map length {len(stage_map)} != vertex count "
                    f"{tree.n_vertices(d)} (stages cannot span depths)"
                )
            ids = np.unique(stage_map)
            if ids[0] < 0 or not np.array_equal(ids, np.arange(len(ids))):
                raise StagingError(
                    f"depth {d}: stage ids must be contiguous integers from 0"
                )
            unobs = self.unobserved[d]
            if unobs is not None and not 0 <= unobs < len(ids):
                raise StagingError(f"depth {d}: unobserved stage id {unobs} out of range")

    def canonicalize(self) -> "Staging":
        """Renumber stages by first occurrence; the unobserved stage goes last."""
        maps, unobs_out = [], []
        for stage_map, unobs in zip(self.stage_maps, self.unobserved):
            new_map, new_unobs = _canonical_map(stage_map, unobs)
            maps.append(new_map)
            unobs_out.append(new_unobs)
        return Staging(tuple(maps), tuple(unobs_out))

    def merge_stages(self, depth: int, keep: int, absorb: int) -> "Staging":
        """New canonical staging with two same-depth stages merged."""
        if keep == absorb:
            raise StagingError("cannot merge a stage with itself")
        maps = list(self.stage_maps)
        new_map = maps[depth].copy()
        new_map[new_map == absorb] = keep
        maps[depth] = new_map
        unobs = list(self.unobserved)
        if unobs[depth] in (keep, absorb):
            raise StagingError("cannot merge the unobserved stage")
        return Staging(tuple(maps), tuple(unobs)).canonicalize()

    def move_vertex(self, depth: int, vertex: int, target: int | None) -> "Staging":
        """New canonical staging with one vertex reassigned (None = fresh stage)."""
        maps = list(self.stage_maps)
        new_map = maps[depth].copy()
        new_map[vertex] = self.n_stages(depth) if target is None else target
        maps[depth] = new_map
        return Staging(tuple(maps), tuple(self.unobserved)).canonicalize()


def _canonical_map(
    stage_map: np.ndarray, unobserved: int | None
) -> tuple[np.ndarray, int | None]:
    mapping: dict[int, int] = {}
    for s in stage_map:
        s = int(s)
        if s == unobserved or s in mapping:
            continue
        mapping[s] = len(mapping)
    new_unobs: int | None = None
    if unobserved is not None and np.any(stage_map == unobserved):
        new_unobs = len(mapping)
        mapping[int(unobserved)] = new_unobs
    elif unobserved is not None:
        # designated unobserved stage with no members disappears
        new_unobs = None
    new_map = np.array([mapping[int(s)] for s in stage_map], dtype=np.int64)
    return new_map, new_unobs


def full_staging(tree: EventTree) -> Staging:
    """Every vertex in its own stage."""
    maps = tuple(
        np.arange(tree.n_vertices(d), dtype=np.int64) for d in range(tree.n_depths)
    )
    return Staging(maps, (None,) * tree.n_depths)


def indep_staging(tree: EventTree) -> Staging:
    """One stage per depth: the full-independence staging."""
    maps = tuple(
        np.zeros(tree.n_vertices(d), dtype=np.int64) for d in range(tree.n_depths)
    )
    return Staging(maps, (None,) * tree.n_depths)


@dataclass(frozen=True, eq=False)
class StagedTreeModel:
    """Event tree plus staging plus one probability vector per stage.

    ``floret_probs[d]`` has shape (number of depth-d stages, cardinality of
    the depth-d variable). Entries live in the closed interval [0, 1]:
    maximum-likelihood estimation reaches the boundary on sparse data, so
    strict positivity is not enforced here (smoothing > 0 restores it).
    """

    tree: EventTree
    staging: Staging
    floret_probs: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "floret_probs",
            tuple(_as_readonly(np.asarray(f, dtype=np.float64)) for f in self.floret_probs),
        )
        self.staging.validate(self.tree)
        if len(self.floret_probs) != self.tree.n_depths:
            raise ModelError("one floret matrix required per depth")
        for d, florets in enumerate(self.floret_probs):
            expected = (self.staging.n_stages(d), self.tree.cardinalities[d])
            if florets.shape != expected:
                raise ModelError(
                    f"depth {d}: floret matrix shape {florets.shape} != {expected}"
                )
            if np.any(florets < 0.0) or np.any(florets > 1.0):
                raise ModelError(f"depth {d}: floret entries outside [0, 1]")
            sums = florets.sum(axis=1)
            if np.any(np.abs(sums - 1.0) > FLORET_SUM_TOL):
                worst = float(np.abs(sums - 1.0).max())
                raise ModelError(
                    f"depth {d}: floret rows must sum to 1 within {FLORET_SUM_TOL}"
                    f" (worst deviation {worst:.3e})"
                )

    def structurally_equal(self, other: "StagedTreeModel") -> bool:
        """Exact equality of variables, staging and floret values."""
        return (
            self.tree.variables == other.tree.variables
            and self.staging == other.staging
            and all(
                a.shape == b.shape and np.array_equal(a, b)
                for a, b in zip(self.floret_probs, other.floret_probs)
            )
        )

    def floret_of_vertex(self, depth: int, vertex: int) -> np.ndarray:
        return self.floret_probs[depth][self.staging.stage_maps[depth][vertex]]


def atom_probability(model: StagedTreeModel, outcome: Sequence[int]) -> float:
    """Probability of one full assignment: the product of floret entries
    along its root-to-leaf path."""
    tree = model.tree
    if len(outcome) != tree.n_features + 1:
        raise VariableError(
            f"outcome needs {tree.n_features + 1} levels, got {len(outcome)}"
        )
    prob = 1.0
    vertex = 0
    for d, level in enumerate(outcome):
        card = tree.cardinalities[d]
        if not 0 <= level < card:
            raise VariableError(
                f"level index {level} out of range for variable "
                f"{tree.variables[d].name!r}"
            )
        stage = model.staging.stage_maps[d][vertex]
        prob *= float(model.floret_probs[d][stage, level])
        vertex = vertex * card + level
    return prob


def joint_probabilities(
    model: StagedTreeModel, max_leaves: int = MAX_JOINT_LEAVES
) -> np.ndarray:
    """Vector of all atom probabilities in leaf-index order."""
    tree = model.tree
    if tree.n_leaves > max_leaves:
        raise ModelError(
            f"tree has {tree.n_leaves} leaves, exceeding the cap of {max_leaves}"
        )
    vec = model.floret_probs[0][model.staging.stage_maps[0]].ravel()
    for d in range(1, tree.n_depths):
        per_vertex = model.floret_probs[d][model.staging.stage_maps[d]]
        vec = (vec[:, None] * per_vertex).ravel()
    return vec


def joint_table(
    model: StagedTreeModel, max_leaves: int = MAX_JOINT_LEAVES
) -> dict[tuple[str, ...], float]:
    """Mapping from every outcome (as level labels) to its probability,
    iterated in leaf-index order."""
    probs = joint_probabilities(model, max_leaves=max_leaves)
    levels = [v.levels for v in model.tree.variables]
    return {
        outcome: float(p)
        for outcome, p in zip(itertools.product(*levels), probs)
    }


def free_parameter_count(model: StagedTreeModel) -> int:
    """Number of free parameters: each observed stage at depth d contributes
    (cardinality - 1); unobserved stages are fixed uniform and contribute 0."""
    total = 0
    for d in range(model.tree.n_depths):
        total += model.staging.n_observed_stages(d) * (model.tree.cardinalities[d] - 1)
    return total


@dataclass(frozen=True)
class CIStatement:
    """A conditional independence statement read from a staging.

    ``subject`` is independent of ``independent_of`` given the variables in
    ``conditioning`` and, for context-conditional statements, given the
    specific assignment in ``context``.
    """

    kind: str  # "marginal" | "full-conditional" | "context-conditional"
    subject: str
    independent_of: tuple[str, ...]
    conditioning: tuple[str, ...] = ()
    context: tuple[tuple[str, str], ...] = ()

    def __str__(self) -> str:
        left = (
            self.independent_of[0]
            if len(self.independent_of) == 1
            else "(" + ", ".join(self.independent_of) + ")"
        )
        text = f"{self.subject} _||_ {left}"
        given = list(self.conditioning) + [f"{n}={v}" for n, v in self.context]
        if given:
            text += " | " + ", ".join(given)
        return text


def read_marginal_independencies(model: StagedTreeModel) -> list[CIStatement]:
    """Statements 'X_k independent of (class, earlier features)' for every
    feature depth collapsed into a single stage."""
    tree = model.tree
    out: list[CIStatement] = []
    for k in range(1, tree.n_depths):
        if model.staging.n_stages(k) == 1:
            earlier = tuple(v.name for v in tree.variables[:k])
            out.append(
                CIStatement(
                    kind="marginal",
                    subject=tree.variable_at(k).name,
                    independent_of=earlier,
                )
            )
    return out


def read_class_conditional_independencies(
    model: StagedTreeModel, max_cells: int = MAX_CONTEXT_CELLS
) -> list[CIStatement]:
    """Class-feature independence statements read from staging structure.

    For feature X_k, the depth-k vertices matched by feature prefix must
    share a stage across all class values. When this holds for every prefix
    the full conditional statement is emitted; when it holds only on part of
    the prefix space, minimal contexts covering the matched region are
    emitted instead. The check is purely syntactic stage-pattern matching.
    """
    tree = model.tree
    class_name = tree.class_var.name
    n_classes = tree.class_var.cardinality
    out: list[CIStatement] = []
    for k in range(1, tree.n_depths):
        prefix_vars = tree.variables[1:k]  # features before X_k in the order
        prefix_cards = tuple(v.cardinality for v in prefix_vars)
        n_prefix = int(np.prod(prefix_cards, dtype=np.int64)) if prefix_cards else 1
        stage_map = model.staging.stage_maps[k].reshape(n_classes, n_prefix)
        matched = np.all(stage_map == stage_map[0], axis=0)
        subject = tree.variable_at(k).name
        if matched.all():
            out.append(
                CIStatement(
                    kind="full-conditional",
                    subject=subject,
                    independent_of=(class_name,),
                    conditioning=tuple(v.name for v in prefix_vars),
                )
            )
            continue
        if not matched.any() or n_prefix > max_cells:
            continue
        grid = matched.reshape(prefix_cards)
        out.extend(
            _minimal_contexts(grid, prefix_vars, subject, class_name)
        )
    return out


def _minimal_contexts(
    grid: np.ndarray,
    prefix_vars: tuple[VariableSpec, ...],
    subject: str,
    class_name: str,
) -> list[CIStatement]:
    """Minimal variable-assignment contexts on which `grid` is all True.

    A context (B, x_B) is valid when every prefix consistent with x_B is
    matched; it is minimal when no proper sub-assignment is valid. Contexts
    are found in increasing size so minimality reduces to checking the
    immediate sub-contexts.
    """
    n_vars = len(prefix_vars)
    all_axes = tuple(range(n_vars))
    valid: dict[tuple[int, ...], np.ndarray] = {}
    statements: list[CIStatement] = []
    for size in range(1, n_vars + 1):
        for axes in itertools.combinations(all_axes, size):
            drop = tuple(a for a in all_axes if a not in axes)
            reduced = grid.all(axis=drop) if drop else grid
            valid[axes] = reduced
            for assignment in np.argwhere(reduced):
                assignment = tuple(int(a) for a in assignment)
                if _has_valid_subcontext(axes, assignment, valid):
                    continue
                context = tuple(
                    (prefix_vars[a].name, prefix_vars[a].levels[lv])
                    for a, lv in zip(axes, assignment)
                )
                conditioning = tuple(
                    prefix_vars[a].name for a in all_axes if a not in axes
                )
                statements.append(
                    CIStatement(
                        kind="context-conditional",
                        subject=subject,
                        independent_of=(class_name,),
                        conditioning=conditioning,
                        context=context,
                    )
                )
    return statements


def _has_valid_subcontext(
    axes: tuple[int, ...],
    assignment: tuple[int, ...],
    valid: dict[tuple[int, ...], np.ndarray],
) -> bool:
    if len(axes) <= 1:
        return False
    for i in range(len(axes)):
        sub_axes = axes[:i] + axes[i + 1 :]
        sub_assignment = assignment[:i] + assignment[i + 1 :]
        if bool(valid[sub_axes][sub_assignment]):
            return True
    return False
