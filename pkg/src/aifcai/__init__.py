"""Discrete control-as-inference and active-inference planners with brute-force oracles."""

from .model import DiscretePOMDP, RewardTable, ValueEncoding, build_pomdp, encode, load_model, save_model
from .objectives import FunctionalKind, ObjectiveBreakdown, Policy
from .planners import SelectMode, plan_posterior, select_action, soft_policy_backward
from .rollout import information_gain, posterior_state, predict_states

__version__ = "0.1.0"

__all__ = [
    "DiscretePOMDP", "RewardTable", "ValueEncoding", "build_pomdp", "encode", "load_model", "save_model",
    "FunctionalKind", "ObjectiveBreakdown", "Policy", "SelectMode", "plan_posterior", "select_action",
    "soft_policy_backward", "information_gain", "posterior_state", "predict_states",
]
