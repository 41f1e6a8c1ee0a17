"""Causal and counterfactual interval analysis for discrete models.

Build a graph over discrete variables, complete it into a canonical
structural model whose randomness lives in one finite disturbance per
node, fit those disturbance priors to data with restarted EM, and read
off interval estimates for causal and counterfactual queries.
"""

from .counterfactual import (
    CausalQuery,
    Intervention,
    PreparedQuery,
    QueryKind,
    TwinNetwork,
    build_twin,
    evaluate,
    mutilate,
)
from .data import (
    BinarizationMap,
    BinarySpec,
    Dataset,
    binarize,
    empirical_distribution,
    read_counts,
    read_records,
    write_counts,
    write_records,
)
from .emcc import (
    EmConfig,
    EmRunResult,
    EmccResult,
    IntervalEstimate,
    em_fit,
    emcc_bounds,
)
from .errors import (
    CardinalityOverflow,
    CfboundsError,
    CycleError,
    EmDegenerateError,
    MissingPriorError,
    NoConvergedRunsError,
    SchemaError,
    TooLargeError,
    UndefinedQuery,
    ZeroEvidenceError,
)
from .modelio import (
    load_binarization,
    load_manifest,
    load_model,
    load_queries,
    save_model,
)
from .oracle import (
    backdoor_ace,
    exact_queries,
    exact_query,
    forward_sample,
    world_table,
)
from .pgm import (
    BayesNet,
    Cpt,
    Dag,
    Factor,
    Variable,
    log_likelihood,
    mle_cpts,
    topological_sort,
    variable_elimination,
)
from .scm import (
    DEFAULT_GUARD,
    MarkovClass,
    Scm,
    StructuralEquation,
    build_canonical_scm,
    canonical_cardinality,
    classify,
    classify_graph,
    scm_to_bn,
    se_to_cpt,
)

__version__ = "0.1.0"

__all__ = [
    "BayesNet",
    "BinarizationMap",
    "BinarySpec",
    "CardinalityOverflow",
    "CausalQuery",
    "CfboundsError",
    "Cpt",
    "CycleError",
    "Dag",
    "Dataset",
    "DEFAULT_GUARD",
    "EmConfig",
    "EmDegenerateError",
    "EmRunResult",
    "EmccResult",
    "Factor",
    "Intervention",
    "IntervalEstimate",
    "MarkovClass",
    "MissingPriorError",
    "NoConvergedRunsError",
    "PreparedQuery",
    "QueryKind",
    "SchemaError",
    "Scm",
    "StructuralEquation",
    "TooLargeError",
    "TwinNetwork",
    "UndefinedQuery",
    "Variable",
    "ZeroEvidenceError",
    "backdoor_ace",
    "binarize",
    "build_canonical_scm",
    "build_twin",
    "canonical_cardinality",
    "classify",
    "classify_graph",
    "em_fit",
    "emcc_bounds",
    "empirical_distribution",
    "evaluate",
    "exact_queries",
    "exact_query",
    "forward_sample",
    "load_binarization",
    "load_manifest",
    "load_model",
    "load_queries",
    "log_likelihood",
    "mle_cpts",
    "mutilate",
    "read_counts",
    "read_records",
    "save_model",
    "scm_to_bn",
    "se_to_cpt",
    "topological_sort",
    "variable_elimination",
    "world_table",
    "write_counts",
    "write_records",
]
