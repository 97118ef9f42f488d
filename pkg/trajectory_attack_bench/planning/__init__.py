"""Планировщики эго, замкнутый цикл и геометрия столкновений"""

from .costs import InteractionCost
from .fixtures import adversarial_fixture_set, two_lane_road
from .geometry import (
    CollisionEvent,
    OffroadEvent,
    box_corners,
    boxes_overlap,
    detect_collision,
    detect_offroad,
    headings_from_positions,
    interpolate_track,
)
from .lattice_mpc import LatticeMPCPlanner, emergency_plan, lattice_mpc_planner, score_candidates, track_reference
from .map_model import Lane, MapModel
from .plan import Forecast, Plan, Planner, SimOutcome
from .rule_planner import RulePlanner, pursuit_curvature, rule_planner
from .simulator import LogEpisode, PlannerConfig, SimConfig, build_planner, simulate

__all__ = [
    "CollisionEvent",
    "Forecast",
    "InteractionCost",
    "Lane",
    "LatticeMPCPlanner",
    "LogEpisode",
    "MapModel",
    "OffroadEvent",
    "Plan",
    "Planner",
    "PlannerConfig",
    "RulePlanner",
    "SimConfig",
    "SimOutcome",
    "adversarial_fixture_set",
    "box_corners",
    "boxes_overlap",
    "build_planner",
    "detect_collision",
    "detect_offroad",
    "emergency_plan",
    "headings_from_positions",
    "interpolate_track",
    "lattice_mpc_planner",
    "pursuit_curvature",
    "rule_planner",
    "score_candidates",
    "simulate",
    "track_reference",
    "two_lane_road",
]
