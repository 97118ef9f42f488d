"""
Правиловый планировщик: удержание центра полосы (pure pursuit) и торможение
перед предсказанными агентами, блокирующими полосу
"""

import logging
from typing import Optional, Tuple

import numpy as np

from ..core.errors import PlannerError
from ..dynamics import ControlSequence, DynamicBounds, DynState, project_controls
from ..utils.constants import (
    DEFAULT_FOOTPRINT,
    RULE_COMFORT_DECEL,
    RULE_MIN_LOOKAHEAD,
    PLAN_DT,
    RULE_TTC_THRESHOLD,
    STOP_MARGIN,
)
from .map_model import Lane, MapModel
from .plan import Forecast, Plan, Planner

logger = logging.getLogger(__name__)


def pursuit_curvature(lane: Lane, position: np.ndarray, heading: float, speed: float) -> float:
    """κ = 2·sin α / L_d к точке осевой на L_d = max(5 м, v·1 с) впереди проекции"""
    lookahead = max(RULE_MIN_LOOKAHEAD, abs(speed))
    s, _ = lane.project(position)
    target = lane.point_at(s + lookahead)
    delta = target - position
    dist = float(np.hypot(delta[0], delta[1]))
    if dist < 1e-6:
        return 0.0
    alpha = np.arctan2(delta[1], delta[0]) - heading
    return float(2.0 * np.sin(alpha) / dist)


def _lane_coordinates(lane: Lane, forecast: Forecast, times: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Продольная координата и боковое смещение агентов в моменты times, M×len(times)"""
    points = forecast.at(times)
    s = np.zeros(points.shape[:2])
    offset = np.zeros(points.shape[:2])
    for j in range(points.shape[0]):
        for t in range(points.shape[1]):
            s[j, t], offset[j, t] = lane.project(points[j, t])
    return s, offset


def rule_planner(
    state: DynState,
    lane: Optional[Lane],
    forecast: Forecast,
    horizon: float,
    bounds: Optional[DynamicBounds] = None,
    footprint=DEFAULT_FOOTPRINT,
    dt: float = PLAN_DT,
) -> Plan:
    """
    План удержания полосы с торможением до остановки за блокирующим агентом

    Агент блокирует полосу, если его предсказанная точка впереди эго и ближе к осевой,
    чем половина ширины полосы плюс половина ширины агента. Торможение начинается при
    TTC < 3 с и продолжается, пока эго догоняет агента; замедление
    max(3, v²/(2·зазор)) ограничено |a_lb|.

    Raises:
        PlannerError: Эго не привязано к полосе
    """
    if lane is None:
        raise PlannerError("эго не привязано ни к одной полосе")
    bounds = bounds or DynamicBounds()
    steps = max(1, int(round(horizon / dt)))
    times = dt * np.arange(steps + 1)
    s_agents, off_agents = _lane_coordinates(lane, forecast, times)
    v_agents = np.diff(s_agents, axis=1) / dt if forecast.num_agents else np.zeros((0, steps))
    half_widths = forecast.footprints[:, 1] / 2.0
    half_lengths = forecast.footprints[:, 0] / 2.0
    max_decel = abs(bounds.accel_lb)

    p, theta, v = state.position.copy(), state.heading, state.speed
    controls = np.zeros((steps, 2))
    braking = False
    for t in range(steps):
        kappa = pursuit_curvature(lane, p, theta, v)
        s_e, _ = lane.project(p)
        accel = 0.0
        closing_any = False
        for j in range(forecast.num_agents):
            if abs(off_agents[j, t]) >= lane.width / 2.0 + half_widths[j] or s_agents[j, t] <= s_e:
                continue
            gap = s_agents[j, t] - s_e - footprint[0] / 2.0 - half_lengths[j] - STOP_MARGIN
            closing = v - v_agents[j, t]
            if gap <= 0:
                accel = min(accel, -max_decel)
                closing_any = closing_any or closing > 0
                continue
            if closing <= 0:
                continue
            closing_any = True
            if braking or gap / closing < RULE_TTC_THRESHOLD:
                decel = min(max(RULE_COMFORT_DECEL, v * v / (2.0 * gap)), max_decel)
                accel = min(accel, -decel)
        braking = closing_any and accel < 0

        u = project_controls(np.array([[accel, kappa]]), v, dt, bounds)[0]
        controls[t] = u
        p = p + v * dt * np.array([np.cos(theta), np.sin(theta)])
        theta = theta + v * u[1] * dt
        v = v + u[0] * dt

    plan = Plan("rule", state, ControlSequence(dt, controls))
    logger.debug(f"🧭 План rule: {steps} шагов, конечная скорость {plan.final_speed:.2f} м/с")
    return plan


class RulePlanner(Planner):
    """Правиловый планировщик с привязкой к ближайшей попутной полосе карты"""

    name = "rule"

    def plan(self, state: DynState, map_model: MapModel, forecast: Forecast, horizon: float) -> Plan:
        lane = map_model.nearest_lane(state.position, state.heading)
        return rule_planner(state, lane, forecast, horizon, self.bounds, self.footprint)
