"""Метрики предсказания, чувствительности, сходства и переносимости"""

from .prediction import (
    MetricsConfig,
    as_modes,
    best_mode,
    displacement_errors,
    miss_flags,
    miss_rate,
    offroad_flags,
    offroad_rate,
    result_violations,
    violation_rate,
)
from .report import (
    EvalReport,
    SceneEval,
    aggregate,
    bin_scenes,
    evaluate_scene,
    motion_interaction_split,
    scene_stats,
)
from .sensitivity import (
    PlanningAwareResult,
    agent_sensitivities,
    aggregated_sensitivity,
    delta_sensitivity,
    nearby_agents,
    planning_aware,
    sensitivity,
)
from .similarity import SIMILARITY_NAMES, discrete_frechet, dtw_distance, trajectory_similarity
from .transfer import TRANSFER_METRICS, success_degree, transfer_rate

__all__ = [
    "EvalReport",
    "MetricsConfig",
    "PlanningAwareResult",
    "SIMILARITY_NAMES",
    "SceneEval",
    "TRANSFER_METRICS",
    "agent_sensitivities",
    "aggregate",
    "aggregated_sensitivity",
    "as_modes",
    "best_mode",
    "bin_scenes",
    "delta_sensitivity",
    "discrete_frechet",
    "displacement_errors",
    "dtw_distance",
    "evaluate_scene",
    "miss_flags",
    "miss_rate",
    "motion_interaction_split",
    "nearby_agents",
    "offroad_flags",
    "offroad_rate",
    "planning_aware",
    "result_violations",
    "scene_stats",
    "sensitivity",
    "success_degree",
    "trajectory_similarity",
    "transfer_rate",
    "violation_rate",
]
