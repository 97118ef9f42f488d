"""
Планировщик «конформная решётка + MPC»

Кандидаты - боковые смещения относительно опорной полосы с кубическим переходом
3x² − 2x³ на 20 м. Каждый оценивается по столкновениям (жёстко), съезду, смещению,
усилию и стоимости взаимодействия; лучший отслеживается MPC на модели велосипеда
(12 шагов по 0.5 с, последовательные квадратичные задачи cvxpy).
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import cvxpy as cp
import numpy as np

from ..core.errors import PlannerError
from ..dynamics import ControlSequence, DynamicBounds, DynState, inverse, project_controls, rollout, rollout_pullback
from ..utils.constants import (
    DEFAULT_FOOTPRINT,
    LATTICE_EFFORT_WEIGHT,
    LATTICE_INTERACTION_WEIGHT,
    LATTICE_LOOKAHEAD,
    LATTICE_OFFROAD_COST,
    LATTICE_OFFSET_WEIGHT,
    LATTICE_OFFSETS,
    LATTICE_SAFETY_MARGIN,
    MPC_ACCEL_WEIGHT,
    MPC_CURVATURE_WEIGHT,
    MPC_DAMPING,
    MPC_DT,
    MPC_POSITION_WEIGHT,
    MPC_SPEED_WEIGHT,
    MPC_SWEEPS,
    PLAN_DT,
)
from .costs import InteractionCost
from .geometry import detect_collision, headings_from_positions
from .map_model import Lane, MapModel
from .plan import Forecast, Plan, Planner

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class Candidate:
    """Кандидат решётки: опорный путь с шагом PLAN_DT и его стоимость"""

    offset: float
    reference: np.ndarray  # (n+1)×2
    headings: np.ndarray
    cost: float
    collides: bool


def _reference_path(lane: Lane, s0: float, o0: float, offset: float, speed: float, times: np.ndarray, fallback: float):
    s = s0 + max(speed, 0.0) * times
    x = np.clip((s - s0) / LATTICE_LOOKAHEAD, 0.0, 1.0)
    lateral = o0 + (offset - o0) * (3.0 * x**2 - 2.0 * x**3)
    points = np.array([lane.point_at(si, oi) for si, oi in zip(s, lateral)])
    return points, headings_from_positions(points, fallback)


def _reference_lane(map_model: MapModel, state: DynState) -> Lane:
    lane = map_model.nearest_lane(state.position, state.heading)
    if lane is not None:
        return lane
    best, best_offset = None, np.inf
    for candidate in map_model.lanes:
        s, offset = candidate.project(state.position)
        if np.cos(state.heading - candidate.heading_at(s)) >= 0 and abs(offset) < best_offset:
            best, best_offset = candidate, abs(offset)
    if best is None:
        raise PlannerError(f"карта {map_model.map_id}: нет попутной полосы для эго")
    return best


def _collides(path, headings, forecast: Forecast, times, footprint) -> bool:
    if forecast.num_agents == 0:
        return False
    events = detect_collision(
        path[1:],
        headings[1:],
        forecast.at(times[1:]),
        forecast.headings_at(times[1:]),
        forecast.agent_ids,
        ego_footprint=footprint,
        agent_footprints=forecast.footprints,
    )
    return bool(events)


def score_candidates(
    state: DynState,
    lane: Lane,
    map_model: MapModel,
    forecast: Forecast,
    horizon: float,
    offsets: Sequence[float] = LATTICE_OFFSETS,
    footprint=DEFAULT_FOOTPRINT,
    interaction: Optional[InteractionCost] = None,
) -> List[Candidate]:
    """Кандидаты решётки, отсортированные по стоимости (столкновения - бесконечная стоимость)"""
    interaction = interaction or InteractionCost()
    steps = max(1, int(round(horizon / PLAN_DT)))
    times = PLAN_DT * np.arange(steps + 1)
    stride = max(1, int(round(MPC_DT / PLAN_DT)))
    s0, o0 = lane.project(state.position)
    inflated = (footprint[0] + LATTICE_SAFETY_MARGIN[0], footprint[1] + LATTICE_SAFETY_MARGIN[1])
    agents_coarse = forecast.at(times[::stride])

    candidates = []
    for offset in offsets:
        path, headings = _reference_path(lane, s0, o0, offset, state.speed, times, state.heading)
        collides = _collides(path, headings, forecast, times, inflated)
        offroad = int(np.sum(~map_model.is_drivable(path)))
        cost = (
            LATTICE_OFFROAD_COST * offroad
            + LATTICE_OFFSET_WEIGHT * abs(offset)
            + LATTICE_EFFORT_WEIGHT * abs(offset - o0)
            + LATTICE_INTERACTION_WEIGHT * sum(interaction.value(a, path[::stride]) for a in agents_coarse)
        )
        candidates.append(Candidate(float(offset), path, headings, np.inf if collides else float(cost), collides))
    return sorted(candidates, key=lambda c: (c.cost, abs(c.offset)))


def _initial_controls(state: DynState, knots: np.ndarray, steps: int) -> np.ndarray:
    params = inverse(np.vstack([state.position, knots]), MPC_DT)
    controls = np.zeros((steps, 2))
    n = params.accel.shape[0]
    if n:
        controls[:n, 0] = params.accel
        controls[:n, 1] = params.curvature
        controls[n:] = controls[n - 1]
    return controls


class TrackingQP:
    """
    Квадратичная задача одного шага линеаризации MPC

    Переменная - приращение управлений δ (шаг MPC_DT). Позиции линеаризованы
    якобианом прокатки, скорость v_k = v₀ + Δt·Σa линейна точно. Границы a и κ
    и (если v₀ допустима) скорости входят ограничениями задачи.
    """

    def __init__(self, steps: int, speed0: float, bounds: DynamicBounds):
        n_var = 2 * steps
        self.delta = cp.Variable(n_var)
        self.current = cp.Parameter(n_var)
        self.jacobian = cp.Parameter((2 * steps, n_var))
        self.pos_err = cp.Parameter(2 * steps)
        self.speed_err = cp.Parameter(steps)

        accel = self.current[0::2] + self.delta[0::2]
        curvature = self.current[1::2] + self.delta[1::2]
        cumulative = MPC_DT * np.tril(np.ones((steps, steps)))
        objective = (
            MPC_POSITION_WEIGHT * cp.sum_squares(self.pos_err + self.jacobian @ self.delta)
            + MPC_SPEED_WEIGHT * cp.sum_squares(self.speed_err + cumulative @ self.delta[0::2])
            + MPC_ACCEL_WEIGHT * cp.sum_squares(accel)
            + MPC_CURVATURE_WEIGHT * cp.sum_squares(curvature)
            + MPC_DAMPING * cp.sum_squares(self.delta)
        )
        constraints = [
            accel >= bounds.accel_lb,
            accel <= bounds.accel_ub,
            curvature >= bounds.curvature_lb,
            curvature <= bounds.curvature_ub,
        ]
        if bounds.speed_lb <= speed0 <= bounds.speed_ub:
            speeds = speed0 + cumulative @ accel
            constraints += [speeds >= bounds.speed_lb, speeds <= bounds.speed_ub]
        self.problem = cp.Problem(cp.Minimize(objective), constraints)

    def solve(self, current: np.ndarray, jacobian: np.ndarray, pos_err: np.ndarray, speed_err: np.ndarray) -> Optional[np.ndarray]:
        """Приращение управлений steps×2 или None, если решатель не нашёл решения"""
        self.current.value = current.reshape(-1)
        self.jacobian.value = jacobian
        self.pos_err.value = pos_err
        self.speed_err.value = speed_err
        try:
            self.problem.solve(warm_start=True)
        except cp.error.SolverError as e:
            logger.debug(f"MPC: сбой решателя: {e}")
            return None
        if self.problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or self.delta.value is None:
            logger.debug(f"MPC: статус задачи {self.problem.status}")
            return None
        return np.asarray(self.delta.value).reshape(-1, 2)


def track_reference(
    state: DynState,
    reference: np.ndarray,
    speed: float,
    bounds: DynamicBounds,
    sweeps: int = MPC_SWEEPS,
) -> ControlSequence:
    """
    MPC: управления шага MPC_DT, минимизирующие квадратичное отклонение от опорных узлов,
    скорости и усилие; на каждом проходе решается TrackingQP, якобиан позиций
    собирается обратными проходами прокатки

    Args:
        state: Текущее состояние эго
        reference: Опорный путь с шагом PLAN_DT, (n+1)×2
        speed: Опорная скорость
        bounds: Границы динамики эго

    Returns:
        Управления с шагом PLAN_DT, спроецированные на границы
    """
    stride = max(1, int(round(MPC_DT / PLAN_DT)))
    steps = (reference.shape[0] - 1) // stride
    if steps < 1:
        raise PlannerError("горизонт короче одного шага MPC")
    knots = reference[stride : steps * stride + 1 : stride]
    U = project_controls(_initial_controls(state, knots, steps), state.speed, MPC_DT, bounds)
    qp = TrackingQP(steps, state.speed, bounds)

    for _ in range(sweeps):
        fine = ControlSequence(PLAN_DT, np.repeat(U, stride, axis=0))
        traj = rollout(state, fine)
        idx = stride * np.arange(1, steps + 1)
        pos_err = (traj.positions[idx] - knots).reshape(-1)
        speed_err = traj.speeds[idx] - speed

        J_pos = np.zeros((2 * steps, 2 * steps))
        for k in range(steps):
            for c in range(2):
                cot = np.zeros_like(traj.positions)
                cot[idx[k], c] = 1.0
                g = rollout_pullback(state, fine, cot).controls
                J_pos[2 * k + c] = g.reshape(steps, stride, 2).sum(axis=1).reshape(-1)

        delta = qp.solve(U, J_pos, pos_err, speed_err)
        if delta is None:
            break
        # |v·κ| зависит от скорости и в задачу не входит
        U = project_controls(U + delta, state.speed, MPC_DT, bounds)

    fine = project_controls(np.repeat(U, stride, axis=0), state.speed, PLAN_DT, bounds)
    return ControlSequence(PLAN_DT, fine)


def emergency_plan(state: DynState, horizon: float, bounds: DynamicBounds, planner: str = "lattice-mpc") -> Plan:
    """Экстренное торможение с a = a_lb при нулевой кривизне"""
    steps = max(1, int(round(horizon / PLAN_DT)))
    controls = np.tile([bounds.accel_lb, 0.0], (steps, 1))
    projected = project_controls(controls, state.speed, PLAN_DT, bounds)
    return Plan(planner, state, ControlSequence(PLAN_DT, projected), cost=np.inf, emergency=True)


def lattice_mpc_planner(
    state: DynState,
    map_model: MapModel,
    forecast: Forecast,
    horizon: float,
    bounds: Optional[DynamicBounds] = None,
    footprint=DEFAULT_FOOTPRINT,
) -> Plan:
    """
    План «решётка + MPC»

    Кандидаты перебираются по возрастанию стоимости; принимается первый, чей
    отслеживаемый MPC план не пересекается с предсказаниями. Если таких нет,
    возвращается план экстренного торможения с флагом emergency.
    """
    bounds = bounds or DynamicBounds()
    map_model.require_drivable()
    lane = _reference_lane(map_model, state)
    candidates = score_candidates(state, lane, map_model, forecast, horizon, footprint=footprint)
    for candidate in candidates:
        if candidate.collides:
            break
        controls = track_reference(state, candidate.reference, state.speed, bounds)
        plan = Plan("lattice-mpc", state, controls, cost=candidate.cost, offset=candidate.offset)
        times = PLAN_DT * np.arange(len(plan.states))
        headings = plan.states.headings
        if not _collides(plan.positions, headings, forecast, times, footprint):
            logger.debug(f"🧭 Решётка: смещение {candidate.offset:+.2f} м, стоимость {candidate.cost:.3f}")
            return plan
        logger.debug(f"Кандидат {candidate.offset:+.2f} м отброшен: план MPC пересекает предсказания")

    logger.warning(f"⚠️ Все кандидаты решётки сталкиваются, экстренное торможение (v={state.speed:.1f} м/с)")
    return emergency_plan(state, horizon, bounds)


class LatticeMPCPlanner(Planner):
    """Решётка боковых смещений + MPC-отслеживание"""

    name = "lattice-mpc"

    def plan(self, state: DynState, map_model: MapModel, forecast: Forecast, horizon: float) -> Plan:
        return lattice_mpc_planner(state, map_model, forecast, horizon, self.bounds, self.footprint)
