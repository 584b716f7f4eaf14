"""Group-relative policy optimisation of the level router."""

from .kernels import backend_name
from .policy import (
    GRPOError,
    PolicyParams,
    RolloutGroup,
    group_advantages,
    policy_probs,
    surrogate_gradient,
    surrogate_objective,
)
from .simenv import SimEnvSpec, sample_queries, sample_query, simulate_outcome, simulate_outcomes
from .train import (
    HeldOutReport,
    TrainConfig,
    TrainingDivergedError,
    TrainResult,
    curve_nondecreasing,
    evaluate_greedy,
    reward_table,
    train_router,
)

__all__ = [
    "GRPOError", "HeldOutReport", "PolicyParams", "RolloutGroup", "SimEnvSpec", "TrainConfig",
    "TrainResult", "TrainingDivergedError", "backend_name", "curve_nondecreasing",
    "evaluate_greedy", "group_advantages", "policy_probs", "reward_table", "sample_queries",
    "sample_query", "simulate_outcome", "simulate_outcomes", "surrogate_gradient",
    "surrogate_objective", "train_router",
]
