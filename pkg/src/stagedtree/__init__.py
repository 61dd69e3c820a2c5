"""Staged tree classifiers over categorical data.

Generative classifiers that encode context-specific conditional
independence by partitioning the vertices of an event tree into stages,
with BIC-driven and clustering-based structure learning, exact Bayesian
network conversion, independence read-out and an evaluation harness.
"""

__version__ = "0.1.0"

from .bn import (
    DagSpec,
    bn_joint_oracle,
    model_from_dag,
    naive_dag,
    parse_dag_file,
    staging_from_dag,
)
from .classify import MetricsReport, Prediction, evaluate, posterior, predict
from .data import CategoricalDataset, TreeCounts, load_csv, split, tree_counts
from .errors import StagedTreeError
from .learn import (
    ALGORITHMS,
    LearnConfig,
    SearchTrace,
    backward_join,
    hill_climb,
    learn,
    learn_baseline,
    learn_naive,
)
from .modelio import deserialize_model, load_model, save_model, serialize_model
from .ordering import OrderingResult, cmi_order, conditional_mutual_information
from .scoring import (
    ScoreValue,
    bic_score,
    fit_floret_probabilities,
    fit_model,
    log_likelihood,
    mark_unobserved,
    stage_counts,
    symmetrized_kl,
    total_variation,
)
from .simulate import generate_parity, generate_parity_noise
from .tree import (
    CIStatement,
    EventTree,
    StagedTreeModel,
    Staging,
    VariableSpec,
    atom_probability,
    build_event_tree,
    free_parameter_count,
    full_staging,
    indep_staging,
    joint_probabilities,
    joint_table,
    read_class_conditional_independencies,
    read_marginal_independencies,
)

__all__ = [
    "ALGORITHMS",
    "CIStatement",
    "CategoricalDataset",
    "DagSpec",
    "EventTree",
    "LearnConfig",
    "MetricsReport",
    "OrderingResult",
    "Prediction",
    "ScoreValue",
    "SearchTrace",
    "StagedTreeError",
    "StagedTreeModel",
    "Staging",
    "TreeCounts",
    "VariableSpec",
    "atom_probability",
    "backward_join",
    "bic_score",
    "bn_joint_oracle",
    "build_event_tree",
    "cmi_order",
    "conditional_mutual_information",
    "deserialize_model",
    "evaluate",
    "fit_floret_probabilities",
    "fit_model",
    "free_parameter_count",
    "full_staging",
    "generate_parity",
    "generate_parity_noise",
    "hill_climb",
    "indep_staging",
    "joint_probabilities",
    "joint_table",
    "learn",
    "learn_baseline",
    "learn_naive",
    "load_csv",
    "load_model",
    "log_likelihood",
    "mark_unobserved",
    "model_from_dag",
    "naive_dag",
    "parse_dag_file",
    "posterior",
    "predict",
    "read_class_conditional_independencies",
    "read_marginal_independencies",
    "save_model",
    "serialize_model",
    "split",
    "stage_counts",
    "staging_from_dag",
    "symmetrized_kl",
    "total_variation",
    "tree_counts",
]
