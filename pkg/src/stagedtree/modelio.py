"""Model file serialization: a single versioned JSON document.

The document pins the canonical vertex and stage indexing of the model
modules, so a round trip reproduces the model structurally exactly
(floats travel through `repr` and parse back bit-identically). Unknown
top-level fields and unknown format versions are rejected rather than
ignored, and every section is validated with an error naming it.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import ModelError, ModelFileError
from .tree import EventTree, StagedTreeModel, Staging, VariableSpec

FORMAT_VERSION = 1

_TOP_LEVEL_KEYS = {
    "format_version",
    "class_variable",
    "feature_variables",
    "staging",
    "florets",
    "provenance",
}


def _variable_to_json(var: VariableSpec) -> dict[str, Any]:
    return {"name": var.name, "levels": list(var.levels)}


def _variable_from_json(obj: Any, section: str) -> VariableSpec:
    if not isinstance(obj, dict) or set(obj) != {"name", "levels"}:
        raise ModelFileError(f"section {section!r}: expected name/levels objects")
    return VariableSpec(str(obj["name"]), tuple(obj["levels"]))


def serialize_model(
    model: StagedTreeModel, provenance: Mapping[str, Any] | None = None
) -> bytes:
    """Serialize a model (and an optional provenance block) to JSON bytes."""
    doc = {
        "format_version": FORMAT_VERSION,
        "class_variable": _variable_to_json(model.tree.class_var),
        "feature_variables": [
            _variable_to_json(v) for v in model.tree.feature_vars
        ],
        "staging": [
            {
                "stages": model.staging.stage_maps[d].tolist(),
                "unobserved_stage": model.staging.unobserved[d],
            }
            for d in range(model.tree.n_depths)
        ],
        "florets": [f.tolist() for f in model.floret_probs],
        "provenance": dict(provenance or {}),
    }
    return json.dumps(doc, indent=2, sort_keys=True).encode("utf-8")


def deserialize_model(data: bytes) -> tuple[StagedTreeModel, dict[str, Any]]:
    """Parse and validate model JSON bytes; returns (model, provenance)."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFileError(f"unreadable model file: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelFileError("model file must hold a JSON object")
    unknown = set(doc) - _TOP_LEVEL_KEYS
    if unknown:
        raise ModelFileError(
            f"unsupported field(s) {sorted(unknown)}; this reader handles "
            f"format version {FORMAT_VERSION} only"
        )
    missing = _TOP_LEVEL_KEYS - set(doc)
    if missing:
        raise ModelFileError(f"missing section(s): {sorted(missing)}")
    if doc["format_version"] != FORMAT_VERSION:
        raise ModelFileError(
            f"format version {doc['format_version']!r} unsupported "
            f"(expected {FORMAT_VERSION})"
        )

    try:
        class_var = _variable_from_json(doc["class_variable"], "class_variable")
        feature_vars = tuple(
            _variable_from_json(v, "feature_variables")
            for v in doc["feature_variables"]
        )
        tree = EventTree(class_var, feature_vars)
    except ModelFileError:
        raise
    except (TypeError, ValueError) as exc:
        raise ModelFileError(f"bad variable declarations: {exc}") from None

    staging_doc = doc["staging"]
    if not isinstance(staging_doc, list) or len(staging_doc) != tree.n_depths:
        raise ModelFileError(
            f"section 'staging': expected {tree.n_depths} depth entries"
        )
    try:
        maps, unobs = [], []
        for d, entry in enumerate(staging_doc):
            if not isinstance(entry, dict) or set(entry) != {"stages", "unobserved_stage"}:
                raise ModelFileError(f"section 'staging' depth {d}: malformed entry")
            maps.append(np.asarray(entry["stages"], dtype=np.int64))
            u = entry["unobserved_stage"]
            unobs.append(None if u is None else int(u))
        staging = Staging(tuple(maps), tuple(unobs))
    except ModelFileError:
        raise
    except (TypeError, ValueError) as exc:
        raise ModelFileError(f"section 'staging' is malformed: {exc}") from None

    florets_doc = doc["florets"]
    if not isinstance(florets_doc, list) or len(florets_doc) != tree.n_depths:
        raise ModelFileError(
            f"section 'florets': expected {tree.n_depths} depth entries"
        )
    try:
        florets = tuple(np.asarray(f, dtype=np.float64) for f in florets_doc)
        model = StagedTreeModel(tree, staging, florets)
    except (TypeError, ValueError) as exc:
        raise ModelFileError(f"invariant violation in model file: {exc}") from None

    provenance = doc["provenance"]
    if not isinstance(provenance, dict):
        raise ModelFileError("section 'provenance': expected an object")
    return model, provenance


def save_model(
    model: StagedTreeModel,
    path: str | Path,
    provenance: Mapping[str, Any] | None = None,
) -> None:
    Path(path).write_bytes(serialize_model(model, provenance))


def load_model(path: str | Path) -> tuple[StagedTreeModel, dict[str, Any]]:
    return deserialize_model(Path(path).read_bytes())
