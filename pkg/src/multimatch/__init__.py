"""Joint selection and consistent labeling of features across image collections."""

from .assignment import AssignmentResult, discretize, solve_lap
from .errors import (
    DimensionMismatch,
    InfeasibleK,
    InstanceTooLarge,
    MatchingError,
    NonFiniteEntry,
    ParseError,
)
from .frontend import pairwise_match, scores_from_descriptors, similarity
from .metrics import (
    MatchStats,
    RankDiagnostic,
    cycle_check,
    pair_stats,
    pck,
    precision,
    rank_diagnostic,
    recall,
    scores_pair_stats,
    selected_inlier_fraction,
)
from .model import (
    BlockLayout,
    FeatureSet,
    PairwiseScores,
    ProblemInstance,
    SelectionLabeling,
    SolverConfig,
    assemble_block,
    validate_instance,
)
from .projection import (
    feasibility_gap,
    project_col_simplex,
    project_onto_C,
    project_row_capped,
)
from .reconstruct import FactorizationResult, affine_factorize
from .solver import (
    MeasurementEstimate,
    SolverState,
    TraceRecord,
    assemble_measurements,
    initialize,
    normalize_coordinates,
    objective_cycle,
    objective_geo,
    objective_total,
    selection_objective,
    solve,
    update_X,
    update_Y,
    update_Z,
)
from .synthetic import Camera, PlantedInstance, brute_force_solve, generate

__version__ = "0.1.0"

__all__ = [
    "AssignmentResult",
    "BlockLayout",
    "Camera",
    "DimensionMismatch",
    "FactorizationResult",
    "FeatureSet",
    "InfeasibleK",
    "InstanceTooLarge",
    "MatchStats",
    "MatchingError",
    "MeasurementEstimate",
    "NonFiniteEntry",
    "PairwiseScores",
    "ParseError",
    "PlantedInstance",
    "ProblemInstance",
    "RankDiagnostic",
    "SelectionLabeling",
    "SolverConfig",
    "SolverState",
    "TraceRecord",
    "affine_factorize",
    "assemble_block",
    "assemble_measurements",
    "brute_force_solve",
    "cycle_check",
    "discretize",
    "feasibility_gap",
    "generate",
    "initialize",
    "normalize_coordinates",
    "objective_cycle",
    "objective_geo",
    "objective_total",
    "pair_stats",
    "pairwise_match",
    "pck",
    "precision",
    "project_col_simplex",
    "project_onto_C",
    "project_row_capped",
    "rank_diagnostic",
    "recall",
    "scores_from_descriptors",
    "scores_pair_stats",
    "selected_inlier_fraction",
    "selection_objective",
    "similarity",
    "solve",
    "solve_lap",
    "update_X",
    "update_Y",
    "update_Z",
    "validate_instance",
]
