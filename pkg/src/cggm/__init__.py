"""Clustered Gaussian graphical models via symmetric convex clustering.

Estimates a positive definite precision matrix whose columns fuse into
symmetric checkerboard blocks, then reads variable clusters off the fused
solution.  See :mod:`cggm.solver` for the ADMM solver, :mod:`cggm.cluster`
for cluster extraction and penalty paths, :mod:`cggm.synthetic` for
benchmark instance generation, and :mod:`cggm.cli` for the command line.
"""

from .cluster import (
    Partition,
    PathPoint,
    extract_clusters,
    lambda_path,
    rand_index,
    select_by_k,
)
from .exceptions import (
    CggmError,
    DegenerateColumnError,
    InvalidKError,
    InvalidSizesError,
    InvalidWeightError,
    LineSearchStalledError,
    NotCenteredError,
    NotPositiveDefiniteError,
    NotSymmetricError,
    ParseError,
    PenaltyVacuousError,
    ShapeMismatchError,
    UndefinedMetricError,
)
from .model import (
    FusionStructure,
    build_fusion_structure,
    column_difference,
    extract_all_pairs,
    extract_pair_columns,
    objective_value,
    penalty_value,
)
from .preprocess import (
    ar1_prewhiten,
    center_columns,
    empirical_covariance,
    nonparanormal_transform,
)
from .solver import (
    AdmmConfig,
    AdmmState,
    FitResult,
    fit,
    group_prox,
    initial_state,
    precision_gradient,
    residuals,
    stopping_thresholds,
    update_diffs,
    update_duals,
    update_pair_blocks,
    update_precision,
)
from .synthetic import (
    GroundTruth,
    generate_block_matrix,
    generate_instance,
    generate_membership,
    generate_precision,
    make_rng,
    sample_gaussian,
    scenario,
)

__version__ = "0.1.0"
