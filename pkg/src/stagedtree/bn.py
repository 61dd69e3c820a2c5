"""Exact staged tree representations of Bayesian network classifiers.

A DAG over an ordered variable sequence (class first, parents always
earlier in the order) induces a staging in which two same-depth vertices
share a stage exactly when their prefixes agree on the branching variable's
parent set. With conditional probability tables attached, the induced
staged tree model reproduces the DAG factorization atom for atom.

DAG file grammar (one variable per line, ``#`` comments and blank lines
ignored)::

    name | levels: l1,l2,... [| parents: a,b,...] [| cpt: p p p ...]

Variables must appear in order; parents must be previously declared names.
The ``cpt`` segment lists row-major probabilities: one row per parent
configuration (mixed-radix over the parents in variable order, earliest
parent most significant), each row one probability per level.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DagError
from .tree import (
    EventTree,
    StagedTreeModel,
    Staging,
    VariableSpec,
    _as_readonly,
    build_event_tree,
)

CPT_ROW_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DagSpec:
    """DAG over an ordered variable sequence, optionally with CPTs.

    ``parent_sets[k]`` holds indices of variable k's parents, all smaller
    than k; acyclicity is therefore guaranteed by construction, and the
    first (class) variable can have no parents.
    """

    variables: tuple[VariableSpec, ...]
    parent_sets: tuple[tuple[int, ...], ...]
    cpts: tuple[np.ndarray, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(
            self, "parent_sets", tuple(tuple(ps) for ps in self.parent_sets)
        )
        if len(self.parent_sets) != len(self.variables):
            raise DagError("one parent set required per variable")
        for k, parents in enumerate(self.parent_sets):
            if any(not 0 <= j < k for j in parents):
                raise DagError(
                    f"variable {self.variables[k].name!r}: parents must precede it"
                )
            if tuple(sorted(set(parents))) != parents:
                raise DagError(
                    f"variable {self.variables[k].name!r}: parents must be "
                    "sorted and distinct"
                )
        if self.cpts is not None:
            cpts = tuple(_as_readonly(np.asarray(t, dtype=np.float64)) for t in self.cpts)
            object.__setattr__(self, "cpts", cpts)
            if len(cpts) != len(self.variables):
                raise DagError("one CPT required per variable")
            for k, table in enumerate(cpts):
                expected = (self.n_parent_configs(k), self.variables[k].cardinality)
                if table.shape != expected:
                    raise DagError(
                        f"variable {self.variables[k].name!r}: CPT shape "
                        f"{table.shape} != {expected}"
                    )
                bad = np.abs(table.sum(axis=1) - 1.0) > CPT_ROW_TOL
                if bad.any():
                    raise DagError(
                        f"variable {self.variables[k].name!r}: CPT row(s) "
                        f"{np.flatnonzero(bad).tolist()} not normalized"
                    )

    def n_parent_configs(self, k: int) -> int:
        cards = [self.variables[j].cardinality for j in self.parent_sets[k]]
        return int(np.prod(cards, dtype=np.int64)) if cards else 1

    def parent_config_index(self, k: int, outcome: Sequence[int]) -> int:
        parents = self.parent_sets[k]
        if not parents:
            return 0
        cards = tuple(self.variables[j].cardinality for j in parents)
        digits = tuple(outcome[j] for j in parents)
        return int(np.ravel_multi_index(digits, cards))


def naive_dag(
    class_var: VariableSpec, feature_vars: Sequence[VariableSpec]
) -> DagSpec:
    """Class-rooted DAG with the class as every feature's only parent."""
    variables = (class_var, *feature_vars)
    parent_sets = ((),) + ((0,),) * len(feature_vars)
    return DagSpec(variables, parent_sets)


def staging_from_dag(dag: DagSpec, tree: EventTree) -> Staging:
    """Staging whose depth-d stages index the parent configurations of the
    depth-d variable: two vertices share a stage iff their prefixes agree on
    that variable's parents."""
    if dag.variables != tree.variables:
        raise DagError("DAG and tree must agree on variables and order")
    maps = []
    for d in range(tree.n_depths):
        n_vertices = tree.n_vertices(d)
        parents = dag.parent_sets[d]
        if not parents or n_vertices == 1:
            maps.append(np.zeros(n_vertices, dtype=np.int64))
            continue
        digits = np.unravel_index(np.arange(n_vertices), tree.cardinalities[:d])
        cards = tuple(tree.cardinalities[j] for j in parents)
        maps.append(
            np.ravel_multi_index(tuple(digits[j] for j in parents), cards).astype(
                np.int64
            )
        )
    return Staging(tuple(maps), (None,) * tree.n_depths).canonicalize()


def bn_joint_oracle(dag: DagSpec, outcome: Sequence[int]) -> float:
    """Joint probability of a full assignment as the product of one CPT
    entry per variable."""
    if dag.cpts is None:
        raise DagError("joint oracle needs CPTs")
    if len(outcome) != len(dag.variables):
        raise DagError(
            f"outcome needs {len(dag.variables)} levels, got {len(outcome)}"
        )
    prob = 1.0
    for k, level in enumerate(outcome):
        cfg = dag.parent_config_index(k, outcome)
        prob *= float(dag.cpts[k][cfg, level])
    return prob


def model_from_dag(dag: DagSpec) -> StagedTreeModel:
    """The staged tree model representing the DAG exactly (requires CPTs)."""
    if dag.cpts is None:
        raise DagError("model conversion needs CPTs")
    tree = build_event_tree(dag.variables[0], dag.variables[1:])
    staging = staging_from_dag(dag, tree)
    florets = []
    for d in range(tree.n_depths):
        stage_map = staging.stage_maps[d]
        n_stages = staging.n_stages(d)
        rows = np.empty((n_stages, tree.cardinalities[d]))
        for s in range(n_stages):
            first_vertex = int(np.flatnonzero(stage_map == s)[0])
            digits = tree.vertex_digits(d, first_vertex)
            cfg = dag.parent_config_index(d, digits + (0,) * (len(dag.variables) - d))
            rows[s] = dag.cpts[d][cfg]
        florets.append(rows)
    return StagedTreeModel(tree, staging, tuple(florets))


def parse_dag_file(path: str | Path) -> DagSpec:
    """Parse the DAG file grammar documented in the module docstring."""
    variables: list[VariableSpec] = []
    parent_sets: list[tuple[int, ...]] = []
    cpts: list[np.ndarray | None] = []
    index_of: dict[str, int] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        segments = [seg.strip() for seg in line.split("|")]
        name = segments[0]
        if not name:
            raise DagError(f"{path}:{lineno}: missing variable name")
        fields: dict[str, str] = {}
        for seg in segments[1:]:
            key, _, value = seg.partition(":")
            key = key.strip().lower()
            if key not in ("levels", "parents", "cpt"):
                raise DagError(f"{path}:{lineno}: unknown segment {key!r}")
            if key in fields:
                raise DagError(f"{path}:{lineno}: duplicate segment {key!r}")
            fields[key] = value.strip()
        if "levels" not in fields:
            raise DagError(f"{path}:{lineno}: missing 'levels' segment")
        levels = tuple(v.strip() for v in fields["levels"].split(",") if v.strip())
        var = VariableSpec(name, levels)
        parents: tuple[int, ...] = ()
        if fields.get("parents"):
            parent_names = [p.strip() for p in fields["parents"].split(",") if p.strip()]
            try:
                parents = tuple(sorted(index_of[p] for p in parent_names))
            except KeyError as exc:
                raise DagError(
                    f"{path}:{lineno}: parent {exc.args[0]!r} not declared earlier"
                ) from None
        cpt = None
        if "cpt" in fields:
            values = [float(v) for v in fields["cpt"].replace(",", " ").split()]
            cards = [variables[j].cardinality for j in parents]
            n_rows = int(np.prod(cards)) if cards else 1
            if len(values) != n_rows * var.cardinality:
                raise DagError(
                    f"{path}:{lineno}: cpt needs {n_rows * var.cardinality} "
                    f"values, got {len(values)}"
                )
            cpt = np.array(values).reshape(n_rows, var.cardinality)
        index_of[name] = len(variables)
        variables.append(var)
        parent_sets.append(parents)
        cpts.append(cpt)
    if not variables:
        raise DagError(f"{path}: no variable lines")
    have_cpts = [t is not None for t in cpts]
    if any(have_cpts) and not all(have_cpts):
        raise DagError(f"{path}: either all variables carry a cpt or none do")
    return DagSpec(
        tuple(variables),
        tuple(parent_sets),
        tuple(cpts) if all(have_cpts) else None,
    )


def format_dag_file(dag: DagSpec) -> str:
    """Render a DagSpec in the file grammar (inverse of parse_dag_file)."""
    lines = []
    for k, var in enumerate(dag.variables):
        parts = [var.name, "levels: " + ",".join(var.levels)]
        if dag.parent_sets[k]:
            parts.append(
                "parents: " + ",".join(dag.variables[j].name for j in dag.parent_sets[k])
            )
        if dag.cpts is not None:
            parts.append(
                "cpt: " + " ".join(repr(float(v)) for v in dag.cpts[k].ravel())
            )
        lines.append(" | ".join(parts))
    return "\n".join(lines) + "\n"
