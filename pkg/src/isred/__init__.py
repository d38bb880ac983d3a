"""Sequential stochastic games with explicit information structures."""

from .core import (
    DEFAULT_SEED,
    Exact,
    MonteCarlo,
    check_condition_C,
    compose_actions,
    expected_cost,
    validate_partial_nestedness,
)
from .equilibria import (
    Concept,
    DeviationClass,
    Tolerances,
    Verdict,
    best_response_iteration,
    interchangeability_check,
    solve_affine_stationary,
    stationarity_residual,
    verify_equilibrium,
)
from .errors import (
    ArgumentError,
    IsredError,
    ReductionRefused,
    SolverError,
    StructuralError,
    UnsupportedError,
)
from .lq import LqStageModel, feedback_spe, lq_game, mqi_check, openloop_spe, realize_policy
from .model import (
    AffineObservation,
    AffinePolicy,
    GameSpec,
    GaussianPrimitives,
    PolicyProfile,
    QuadraticCost,
    TablePolicy,
    Variant,
)
from .reductions import (
    ReductionKind,
    certify,
    control_sharing_expand,
    control_sharing_lift,
    control_sharing_reduce,
    policy_dependent_lift,
    policy_dependent_reduce,
    policy_independent_reduce,
)

__version__ = "0.1.0"
