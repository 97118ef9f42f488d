"""
Набор из 10 записанных эпизодов для замкнутого цикла: торможение лидера,
перестроение перед эго и встречный автомобиль на двухполосной прямой дороге
"""

import logging
from typing import Callable, List

import numpy as np

from ..dynamics import DynState, forward_arrays
from .map_model import Lane, MapModel
from .simulator import LogEpisode

logger = logging.getLogger(__name__)

FIXTURE_DT = 0.5
FIXTURE_CURRENT_STEP = 8
FIXTURE_STEPS = 36
FIXTURE_SUBSTEPS = 5
LANE_WIDTH = 3.5
ROAD_START, ROAD_END = -120.0, 400.0

Profile = Callable[[np.ndarray], np.ndarray]


def two_lane_road(oncoming: bool = False, map_id: str = "two-lane") -> MapModel:
    """Прямая дорога вдоль +x: полоса эго на y = 0 и соседняя на y = 3.5 (попутная или встречная)"""
    ego_lane = Lane("lane_0", np.array([[ROAD_START, 0.0], [ROAD_END, 0.0]]), LANE_WIDTH)
    other = np.array([[ROAD_START, LANE_WIDTH], [ROAD_END, LANE_WIDTH]])
    second = Lane("lane_1", other[::-1] if oncoming else other, LANE_WIDTH)
    return MapModel.from_lanes([ego_lane, second], margin=0.25, map_id=map_id)


def _zero(t: np.ndarray) -> np.ndarray:
    return np.zeros_like(t)


def _track(start: DynState, accel: Profile = _zero, curvature: Profile = _zero) -> np.ndarray:
    """Прокатка с шагом dt/5 и прореживание до шага лога"""
    fine_dt = FIXTURE_DT / FIXTURE_SUBSTEPS
    t = fine_dt * np.arange(FIXTURE_STEPS * FIXTURE_SUBSTEPS)
    controls = np.stack([accel(t), curvature(t)], axis=1)
    positions, _, _ = forward_arrays(start.position, start.heading, start.speed, controls, fine_dt)
    return positions[::FIXTURE_SUBSTEPS][:FIXTURE_STEPS]


def _braking(onset: float, decel: float, speed: float) -> Profile:
    stop = onset + speed / decel
    return lambda t: np.where((t >= onset) & (t < stop), -decel, 0.0)


def _lane_change(onset: float, duration: float, speed: float, shift: float) -> Profile:
    """S-образный сдвиг на shift метров влево от курса: κ = ±k на первой половине, ∓k на второй"""
    k = abs(shift) / (speed**2 * (duration / 2.0) ** 2)
    sign = np.sign(shift)
    mid = onset + duration / 2.0
    end = onset + duration
    return lambda t: np.where((t >= onset) & (t < mid), sign * k, np.where((t >= mid) & (t < end), -sign * k, 0.0))


def _now() -> float:
    return FIXTURE_CURRENT_STEP * FIXTURE_DT


def _episode(name: str, tracks: List[np.ndarray], road: MapModel, description: str) -> LogEpisode:
    return LogEpisode(
        episode_id=name,
        dt=FIXTURE_DT,
        positions=np.stack(tracks),
        ego_index=0,
        adv_index=1,
        current_step=FIXTURE_CURRENT_STEP,
        map_model=road,
        agent_ids=["ego", "adv", "bg"][: len(tracks)],
        description=description,
    )


def lead_braking_episode(name: str, rng: np.random.Generator) -> LogEpisode:
    speed = rng.uniform(9.0, 11.0)
    gap = rng.uniform(26.0, 32.0)
    decel = rng.uniform(2.5, 3.5)
    ego_x0 = -speed * _now()
    ego = _track(DynState.from_values(ego_x0, 0.0, 0.0, speed))
    lead = _track(DynState.from_values(ego_x0 + gap, 0.0, 0.0, speed), accel=_braking(_now() + 1.0, decel, speed))
    side = _track(DynState.from_values(ego_x0 + 10.0, LANE_WIDTH, 0.0, speed + 1.0))
    return _episode(name, [ego, lead, side], two_lane_road(), f"лидер тормозит с {decel:.1f} м/с²")


def cut_in_episode(name: str, rng: np.random.Generator) -> LogEpisode:
    speed = rng.uniform(9.0, 11.0)
    lead_gap = rng.uniform(7.0, 10.0)
    adv_speed = speed - rng.uniform(1.0, 2.0)
    ego_x0 = -speed * _now()
    ego = _track(DynState.from_values(ego_x0, 0.0, 0.0, speed))
    adv = _track(
        DynState.from_values(ego_x0 + speed * _now() - adv_speed * _now() + lead_gap, LANE_WIDTH, 0.0, adv_speed),
        curvature=_lane_change(_now() + 0.5, 3.0, adv_speed, -LANE_WIDTH),
    )
    return _episode(name, [ego, adv], two_lane_road(), f"перестроение в {lead_gap:.1f} м перед эго")


def oncoming_episode(name: str, rng: np.random.Generator) -> LogEpisode:
    speed = rng.uniform(9.0, 11.0)
    adv_speed = rng.uniform(9.0, 11.0)
    meet = rng.uniform(2.5, 3.5)  # с после начала симуляции
    ego_x0 = -speed * _now()
    adv_x0 = speed * meet + adv_speed * (_now() + meet)
    ego = _track(DynState.from_values(ego_x0, 0.0, 0.0, speed))
    adv = _track(
        DynState.from_values(adv_x0, LANE_WIDTH, np.pi, adv_speed),
        curvature=_lane_change(_now() + meet - 1.5, 3.0, adv_speed, 0.8),
    )
    return _episode(name, [ego, adv], two_lane_road(oncoming=True), "встречный автомобиль смещается к осевой")


def adversarial_fixture_set(seed: int = 0) -> List[LogEpisode]:
    """10 эпизодов: 4 торможения лидера, 4 перестроения, 2 встречных"""
    rng = np.random.default_rng(seed)
    episodes = [lead_braking_episode(f"lead_brake_{i}", rng) for i in range(4)]
    episodes += [cut_in_episode(f"cut_in_{i}", rng) for i in range(4)]
    episodes += [oncoming_episode(f"oncoming_{i}", rng) for i in range(2)]
    logger.debug(f"🎲 Набор эпизодов (seed={seed}): {len(episodes)}")
    return episodes
