"""
Синтетические сцены из прокаток модели велосипеда: движение по полосам, поворот и пересечение

Будущее каждого агента - продолжение той же прокатки. Сцена i сдвинута на i·scene_spacing по y,
общая карта собирается из полос вдоль траекторий всех агентов.
"""

import logging
from typing import List, Literal, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..core.errors import InvalidInputError
from ..dynamics import DynState, forward_arrays
from ..planning.map_model import Lane, MapModel
from ..predictors.base import Scene
from ..utils.constants import DEFAULT_DT, DEFAULT_FUTURE_LEN, DEFAULT_HISTORY_LEN
from .scenario_io import ScenarioFile

logger = logging.getLogger(__name__)

Template = Literal["straight", "turning", "crossing"]

_MIN_SPEED = 1.0
_LANE_EXTENSION = 10.0


class SynthSpec(BaseModel):
    """Параметры генератора сцен"""

    model_config = ConfigDict(extra="forbid")

    dt: float = Field(default=DEFAULT_DT, gt=0)
    history_len: int = Field(default=DEFAULT_HISTORY_LEN, ge=2)
    future_len: int = Field(default=DEFAULT_FUTURE_LEN, ge=1)
    min_agents: int = Field(default=2, ge=2)
    max_agents: int = Field(default=4, ge=2)
    templates: Tuple[Template, ...] = ("straight", "turning", "crossing")
    speed_range: Tuple[float, float] = (4.0, 12.0)
    max_accel: float = Field(default=0.8, ge=0)
    max_curvature: float = Field(default=0.08, gt=0)
    max_heading_rate: float = Field(default=0.8, gt=0)
    substeps: int = Field(default=5, ge=1)
    lane_width: float = Field(default=3.5, gt=0)
    scene_spacing: float = Field(default=200.0, gt=0)


class _Builder:
    """Прокатки агентов одной сцены"""

    def __init__(self, spec: SynthSpec, rng: np.random.Generator, origin: np.ndarray):
        self.spec = spec
        self.rng = rng
        self.origin = origin
        self.steps = spec.history_len + spec.future_len
        self.duration = (self.steps - 1) * spec.dt

    def speed(self) -> float:
        lo, hi = self.spec.speed_range
        return float(self.rng.uniform(lo, hi))

    def accel(self, v0: float) -> float:
        """Постоянное ускорение, при котором скорость остаётся не ниже _MIN_SPEED"""
        lo = max(-self.spec.max_accel, (_MIN_SPEED - v0) / self.duration)
        return float(self.rng.uniform(lo, self.spec.max_accel))

    def curvature(self, v0: float, accel: float) -> float:
        v_max = max(v0, v0 + accel * self.duration)
        limit = min(self.spec.max_curvature, self.spec.max_heading_rate / v_max)
        magnitude = self.rng.uniform(0.25 * limit, limit)
        return float(magnitude if self.rng.random() < 0.5 else -magnitude)

    def track(self, x: float, y: float, heading: float, speed: float, accel: float = 0.0, curvature: float = 0.0) -> np.ndarray:
        spec = self.spec
        fine_dt = spec.dt / spec.substeps
        n = (self.steps - 1) * spec.substeps
        controls = np.tile([accel, curvature], (n, 1))
        start = DynState.from_values(self.origin[0] + x, self.origin[1] + y, heading, speed)
        positions, _, _ = forward_arrays(start.position, start.heading, start.speed, controls, fine_dt)
        return positions[:: spec.substeps]

    def straight_background(self, count: int, ego_x: float) -> List[np.ndarray]:
        """Фоновые агенты на соседних полосах с шагом 12 м по x"""
        tracks = []
        for k in range(count):
            lane = (k % 2 + 1) * (1 if k % 4 < 2 else -1)
            v = self.speed()
            tracks.append(self.track(ego_x - 12.0 * (k + 1), lane * self.spec.lane_width, 0.0, v, self.accel(v)))
        return tracks


def _straight(b: _Builder, num_agents: int) -> List[np.ndarray]:
    v_ego, v_adv = b.speed(), b.speed()
    ego = b.track(0.0, 0.0, 0.0, v_ego, b.accel(v_ego))
    adv = b.track(b.rng.uniform(8.0, 20.0), b.spec.lane_width, 0.0, v_adv, b.accel(v_adv))
    return [adv, ego, *b.straight_background(num_agents - 2, 0.0)]


def _turning(b: _Builder, num_agents: int) -> List[np.ndarray]:
    v_ego, v_adv = b.speed(), b.speed()
    a_adv = b.accel(v_adv)
    ego = b.track(0.0, 0.0, 0.0, v_ego, b.accel(v_ego))
    adv = b.track(b.rng.uniform(10.0, 25.0), 0.0, 0.0, v_adv, a_adv, b.curvature(v_adv, a_adv))
    return [adv, ego, *b.straight_background(num_agents - 2, 0.0)]


def _crossing(b: _Builder, num_agents: int) -> List[np.ndarray]:
    """Атакующий агент пересекает путь эго под прямым углом примерно в середине горизонта"""
    v_ego, v_adv = b.speed(), b.speed()
    meet = b.spec.dt * (b.spec.history_len + b.spec.future_len / 2.0)
    ego = b.track(0.0, 0.0, 0.0, v_ego)
    cross_x = v_ego * meet + b.rng.uniform(-3.0, 3.0)
    adv = b.track(cross_x, -v_adv * meet - b.rng.uniform(4.0, 8.0), np.pi / 2.0, v_adv)
    return [adv, ego, *b.straight_background(num_agents - 2, 0.0)]


_TEMPLATES = {"straight": _straight, "turning": _turning, "crossing": _crossing}


def _lane_along(lane_id: str, track: np.ndarray, width: float) -> Lane:
    """Полоса вдоль траектории, продлённая на _LANE_EXTENSION в обе стороны"""
    head = track[1] - track[0]
    tail = track[-1] - track[-2]
    before = track[0] - _LANE_EXTENSION * head / np.linalg.norm(head)
    after = track[-1] + _LANE_EXTENSION * tail / np.linalg.norm(tail)
    return Lane(lane_id, np.vstack([before, track, after]), width)


def synthesize_scenes(spec: SynthSpec, count: int, seed: int = 0) -> ScenarioFile:
    """
    Генерация count сцен; атакующий агент - индекс 0, эго - индекс 1

    Args:
        spec: Параметры генератора
        count: Число сцен (≥ 1)
        seed: Зерно; одинаковое зерно даёт одинаковые сцены
    """
    if count < 1:
        raise InvalidInputError("число сцен должно быть не меньше 1")
    if spec.min_agents > spec.max_agents:
        raise InvalidInputError("min_agents больше max_agents")
    rng = np.random.default_rng(seed)
    h = spec.history_len
    scenes, lanes = [], []
    for i in range(count):
        template = spec.templates[int(rng.integers(len(spec.templates)))]
        num_agents = int(rng.integers(spec.min_agents, spec.max_agents + 1))
        builder = _Builder(spec, rng, np.array([0.0, i * spec.scene_spacing]))
        tracks = np.stack(_TEMPLATES[template](builder, num_agents))
        agent_ids = ["adv", "ego", *[f"bg{k}" for k in range(1, num_agents - 1)]]
        scene_id = f"synth_{i:04d}_{template}"
        scenes.append(
            Scene(
                dt=spec.dt,
                histories=tracks[:, :h],
                futures=tracks[:, h:],
                adv_index=0,
                ego_index=1,
                agent_ids=agent_ids,
                map_ref="map.json",
                scene_id=scene_id,
            )
        )
        lanes.extend(_lane_along(f"{scene_id}/{a}", t, spec.lane_width) for a, t in zip(agent_ids, tracks))

    map_model = MapModel.from_lanes(lanes, margin=0.5, map_id=f"synth-{seed}")
    logger.info(f"🎲 Сгенерировано {count} сцен (seed={seed})")
    return ScenarioFile(
        scenes=scenes,
        dt=spec.dt,
        history_len=spec.history_len,
        future_len=spec.future_len,
        map_ref="map.json",
        map_model=map_model,
    )
