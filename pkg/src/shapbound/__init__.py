"""Provable anytime bounds on exact SHAP values of feedforward networks.

Branch and bound over coalition space: coalitions are encoded as Boolean
masks, branches as mask boxes, and a neural-network bound propagator
computes sound value bounds per branch.  The per-feature SHAP bounds
tighten monotonically and collapse to the exact Shapley values when the
partition is fully refined.
"""

from .coalition import (
    Branch,
    PartitionQueue,
    PrunedAccumulator,
    branch_contains,
    child_lambdas,
    root_branch,
    split_branch,
    sum_coalition_weights,
)
from .engine import (
    BoundsState,
    EngineConfig,
    RunResult,
    assemble,
    choose_split_feature,
    run,
    step,
)
from .errors import (
    CategoryError,
    ConfigError,
    DimensionError,
    DomainError,
    EmptyQueueError,
    NoFreeFeatureError,
    ParseError,
    PreconditionError,
    ShapBoundError,
    TooManyFeaturesError,
)
from .network import Activation, Affine, Network, forward, load_network, load_network_file
from .oracle import CheckReport, ExactShapResult, check_engine, exact_shap
from .propagate import (
    Box,
    Interval,
    LinearBounds,
    gradient_interval,
    ibp_activation,
    ibp_affine,
    ibp_value_bounds,
    lbp_value_bounds,
    linear_value_bounds,
)
from .valuefn import AttributionProblem, contribution, mask_apply, mask_insert, value

__version__ = "0.1.0"

__all__ = [
    "Activation",
    "Affine",
    "AttributionProblem",
    "BoundsState",
    "Box",
    "Branch",
    "CategoryError",
    "CheckReport",
    "ConfigError",
    "DimensionError",
    "DomainError",
    "EmptyQueueError",
    "EngineConfig",
    "ExactShapResult",
    "Interval",
    "LinearBounds",
    "Network",
    "NoFreeFeatureError",
    "ParseError",
    "PartitionQueue",
    "PreconditionError",
    "PrunedAccumulator",
    "RunResult",
    "ShapBoundError",
    "TooManyFeaturesError",
    "assemble",
    "branch_contains",
    "check_engine",
    "child_lambdas",
    "choose_split_feature",
    "contribution",
    "exact_shap",
    "forward",
    "gradient_interval",
    "ibp_activation",
    "ibp_affine",
    "ibp_value_bounds",
    "lbp_value_bounds",
    "linear_value_bounds",
    "load_network",
    "load_network_file",
    "mask_apply",
    "mask_insert",
    "root_branch",
    "run",
    "split_branch",
    "step",
    "sum_coalition_weights",
    "value",
]
