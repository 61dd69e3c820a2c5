"""Exception hierarchy for the stagedtree package."""


class StagedTreeError(Exception):
    """Base class for all errors raised by this package."""


class VariableError(StagedTreeError, ValueError):
    """Invalid variable specification (levels, names, out-of-range level)."""


class StagingError(StagedTreeError, ValueError):
    """Malformed staging: wrong shape, non-contiguous ids, cross-depth stage."""


class ModelError(StagedTreeError, ValueError):
    """Invalid staged tree model: floret shapes or normalization violated."""


class DatasetError(StagedTreeError, ValueError):
    """Invalid dataset or CSV input."""


class EstimationError(StagedTreeError, ValueError):
    """Invalid estimation request (e.g. zero-count observed stage at lambda=0)."""


class DagError(StagedTreeError, ValueError):
    """Invalid DAG specification or DAG file."""


class ModelFileError(StagedTreeError, ValueError):
    """Unreadable, unsupported or inconsistent model file."""


class EvaluationError(StagedTreeError, ValueError):
    """Invalid evaluation request (e.g. AUC on a non-binary class)."""
