"""Isolation-forest outlier detection explained through a decision predicate graph.

Train an isolation forest, label the training data, project every
tree-traversal path onto (feature, sign) predicates, weight the resulting
directed graph by class rarity, and rank predicates by how much of their
flow ends in the Inlier versus Outlier class (the IOP score).
"""

__version__ = "0.1.0"

from .dpg import (
    GT,
    INLIER_ID,
    LE,
    OUTLIER_ID,
    SOURCE_ID,
    ClassWeights,
    DpGraph,
    Predicate,
    PredicateTriple,
    TraceList,
    build_graph,
    build_model_graph,
    class_weights,
    collapse,
    predicate_id,
    predicate_label,
    prune_deep_outlier_traces,
    traverse,
)
from .forest import (
    INLIER,
    OUTLIER,
    Contamination,
    Dataset,
    ForestModel,
    ForestParams,
    Internal,
    Leaf,
    ScoreThreshold,
    SingleClassError,
    anomaly_score,
    average_path_normalizer,
    fit,
    label_samples,
    label_scores,
    max_tree_depth,
    path_length,
    score_samples,
)
from .io import (
    DotStyle,
    IOP_PALETTE,
    export_dot,
    iop_color,
    load_model,
    read_csv,
    save_model,
    write_dataset_csv,
    write_explanation_bundle,
    write_graph_json,
    write_injection_log,
)
from .metrics import IopEntry, IopReport, iop_score, rank_report, score_graph
from .synth import (
    InjectionRecord,
    InjectionSpec,
    SynthConfig,
    fixture_dataset_one,
    fixture_dataset_two,
    fixture_one,
    fixture_two,
    generate,
)

__all__ = [
    "__version__",
    "GT",
    "INLIER",
    "INLIER_ID",
    "IOP_PALETTE",
    "LE",
    "OUTLIER",
    "OUTLIER_ID",
    "SOURCE_ID",
    "ClassWeights",
    "Contamination",
    "Dataset",
    "DotStyle",
    "DpGraph",
    "ForestModel",
    "ForestParams",
    "InjectionRecord",
    "InjectionSpec",
    "Internal",
    "IopEntry",
    "IopReport",
    "Leaf",
    "Predicate",
    "PredicateTriple",
    "ScoreThreshold",
    "SingleClassError",
    "SynthConfig",
    "TraceList",
    "anomaly_score",
    "average_path_normalizer",
    "build_graph",
    "build_model_graph",
    "class_weights",
    "collapse",
    "export_dot",
    "fit",
    "fixture_dataset_one",
    "fixture_dataset_two",
    "fixture_one",
    "fixture_two",
    "generate",
    "iop_color",
    "iop_score",
    "label_samples",
    "label_scores",
    "load_model",
    "max_tree_depth",
    "path_length",
    "predicate_id",
    "predicate_label",
    "prune_deep_outlier_traces",
    "rank_report",
    "read_csv",
    "save_model",
    "score_graph",
    "score_samples",
    "traverse",
    "write_dataset_csv",
    "write_explanation_bundle",
    "write_graph_json",
    "write_injection_log",
]
