"""Дифференцируемая кинематическая модель велосипеда"""

from .bicycle import (
    ControlAction,
    ControlSequence,
    DynState,
    RolloutGradient,
    StateTrajectory,
    forward_arrays,
    reverse_arrays,
    rollout,
    rollout_pullback,
    rollout_reverse,
    rollout_reverse_pullback,
    substep_rollout,
    wrap_angle,
)
from .bounds import DynamicBounds, l_dyn, l_dyn_grad, l_dyn_rollout, project_controls
from .params import PARAMETER_NAMES, DynParams, inverse

__all__ = [
    "ControlAction",
    "ControlSequence",
    "DynState",
    "DynParams",
    "DynamicBounds",
    "PARAMETER_NAMES",
    "RolloutGradient",
    "StateTrajectory",
    "forward_arrays",
    "inverse",
    "l_dyn",
    "l_dyn_grad",
    "l_dyn_rollout",
    "project_controls",
    "reverse_arrays",
    "rollout",
    "rollout_pullback",
    "rollout_reverse",
    "rollout_reverse_pullback",
    "substep_rollout",
    "wrap_angle",
]
