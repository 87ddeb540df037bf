"""Surrogate trajectory synthesis for factored MDPs by database stitching."""

from .benchmarks import MDP_BUILDERS, build_ember, build_gridworld, build_linear, build_mdp
from .bounds import (
    BoundReport,
    bias_bound,
    bound_report,
    k_dispersion,
    mfmc_constant_C,
    mfmci_constant_Ci,
    variance_bound,
)
from .database import (
    TransitionDatabase,
    TransitionSet,
    TransitionTuple,
    load,
    populate_biased,
    populate_debiased,
    populate_enumerated,
    save,
    seed_policy_grid,
)
from .errors import (
    ConfigurationError,
    ContractViolationError,
    DatabaseFormatError,
    DatabaseIntegrityError,
    EstimationError,
    ExhaustionError,
    NumericError,
    TrajstitchError,
)
from .estimators import (
    DEFAULT_QUANTILE_LEVELS,
    FidelityReport,
    QuantileSeries,
    bootstrap_floor,
    fan_chart,
    random_baseline,
    value_estimate,
    visual_fidelity_error,
)
from .experiments import LearningCurveConfig, QuerySpec, learning_curve, summarize
from .mdp import (
    ExogenousDraw,
    FactoredMdp,
    LipschitzConstants,
    MarkovState,
    Trajectory,
    TrajectorySet,
    TrajectoryStep,
    rollout_ground_truth,
    sample_exogenous,
    step,
)
from .metrics import (
    DistanceMetric,
    FeatureStats,
    distance_full,
    distance_markov,
    full_metric,
    markov_metric,
)
from .policies import POLICY_CLASSES, Policy, build_policy
from .query import QueryValidationError, request_id, run_policy_query
from .stitch import (
    ALGORITHMS,
    ExclusionLedger,
    StitchEngine,
    generate_trajectory_set,
    mfmc_trajectory,
    mfmci_biased_trajectory,
    mfmci_trajectory,
    nearest_set,
)

__version__ = "0.1.0"
