"""
Типы планирования: прогноз агентов для планировщика, план эго и итог симуляции
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from ..core.errors import InvalidInputError
from ..dynamics import ControlSequence, DynamicBounds, DynParams, DynState, StateTrajectory, rollout
from ..utils.constants import BOUND_TOLERANCE, DEFAULT_FOOTPRINT
from .geometry import CollisionEvent, OffroadEvent, headings_from_positions, interpolate_track
from .map_model import MapModel

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class Forecast:
    """Предсказанные траектории M агентов: текущие позиции и T шагов вперёд с шагом dt"""

    dt: float
    current: np.ndarray  # M×2
    positions: np.ndarray  # M×T×2
    agent_ids: List[str] = field(default_factory=list)
    footprints: Optional[np.ndarray] = None  # M×2 (длина, ширина)

    def __post_init__(self):
        self.current = np.asarray(self.current, dtype=float).reshape(-1, 2)
        m = self.current.shape[0]
        self.positions = np.asarray(self.positions, dtype=float).reshape(m, -1, 2)
        if not self.agent_ids:
            self.agent_ids = [f"agent{j}" for j in range(m)]
        if len(self.agent_ids) != m:
            raise InvalidInputError("число идентификаторов агентов прогноза не совпадает с M")
        if self.footprints is None:
            self.footprints = np.tile(np.asarray(DEFAULT_FOOTPRINT, float), (m, 1))
        self.footprints = np.asarray(self.footprints, dtype=float).reshape(m, 2)

    @classmethod
    def empty(cls, dt: float, steps: int) -> "Forecast":
        return cls(dt, np.zeros((0, 2)), np.zeros((0, steps, 2)), [], np.zeros((0, 2)))

    @classmethod
    def from_prediction(cls, scene, prediction, exclude: Sequence[int] = ()) -> "Forecast":
        """Наиболее вероятные моды всех агентов сцены, кроме exclude"""
        keep = [i for i in range(scene.num_agents) if i not in set(exclude)]
        return cls(
            scene.dt,
            scene.histories[keep, -1],
            prediction.most_likely()[keep],
            [scene.agent_ids[i] for i in keep],
            scene.footprints[keep],
        )

    @property
    def num_agents(self) -> int:
        return int(self.current.shape[0])

    @property
    def track(self) -> np.ndarray:
        """M×(T+1)×2: текущая позиция и предсказание"""
        return np.concatenate([self.current[:, None, :], self.positions], axis=1)

    def at(self, times) -> np.ndarray:
        """Позиции M×len(times)×2 в моменты times относительно текущего"""
        if self.num_agents == 0:
            return np.zeros((0, len(np.atleast_1d(times)), 2))
        return interpolate_track(self.track, self.dt, np.atleast_1d(times))

    def headings_at(self, times) -> np.ndarray:
        track = self.track
        steps = np.clip(np.floor(np.atleast_1d(times) / self.dt).astype(int), 0, track.shape[1] - 1)
        return np.stack([headings_from_positions(t)[steps] for t in track]) if self.num_agents else np.zeros((0, len(steps)))


@dataclass(eq=False)
class Plan:
    """План эго: прокатка управлений от начального состояния"""

    planner: str
    start: DynState
    controls: ControlSequence
    cost: float = 0.0
    emergency: bool = False
    offset: Optional[float] = None
    states: StateTrajectory = field(init=False, repr=False)

    def __post_init__(self):
        self.states = rollout(self.start, self.controls)

    @property
    def dt(self) -> float:
        return self.controls.dt

    @property
    def horizon(self) -> float:
        return len(self.controls) * self.controls.dt

    @property
    def positions(self) -> np.ndarray:
        return self.states.positions

    @property
    def final_speed(self) -> float:
        return float(self.states.speeds[-1])

    def resampled(self, dt: float) -> ControlSequence:
        """Управления с шагом dt (dt делит шаг плана), кусочно-постоянные"""
        ratio = self.dt / dt
        k = int(round(ratio))
        if k < 1 or abs(ratio - k) > 1e-9:
            raise InvalidInputError(f"шаг {dt} не делит шаг плана {self.dt}")
        return ControlSequence(dt, np.repeat(self.controls.values, k, axis=0))

    def is_feasible(self, bounds: DynamicBounds, tolerance: float = 1e-6) -> bool:
        if len(self.states) < 3:
            return True
        params = DynParams.from_rollout(self.states, self.controls)
        return not params.is_violating(bounds, max(tolerance, BOUND_TOLERANCE))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "planner": self.planner,
            "dt": self.dt,
            "cost": self.cost if np.isfinite(self.cost) else None,
            "emergency": self.emergency,
            "offset": self.offset,
            "positions": self.positions.tolist(),
            "speeds": self.states.speeds.tolist(),
        }


class Planner(ABC):
    """Планировщик без состояния между вызовами"""

    name: str = "planner"

    def __init__(self, bounds: Optional[DynamicBounds] = None, footprint=DEFAULT_FOOTPRINT):
        self.bounds = bounds or DynamicBounds()
        self.footprint = tuple(footprint)

    @abstractmethod
    def plan(self, state: DynState, map_model: MapModel, forecast: Forecast, horizon: float) -> Plan:
        """План на horizon секунд от состояния state"""


@dataclass(eq=False)
class SimOutcome:
    """Итог эпизода: траектория эго, события столкновений и съездов, число перепланирований"""

    episode_id: str
    mode: str
    planner: str
    attacked: bool
    dt: float
    positions: np.ndarray
    headings: np.ndarray
    speeds: np.ndarray
    collisions: List[CollisionEvent] = field(default_factory=list)
    offroad: List[OffroadEvent] = field(default_factory=list)
    replans: int = 0
    emergencies: int = 0
    error: Optional[str] = None

    @property
    def collided(self) -> bool:
        return bool(self.collisions)

    @property
    def failed(self) -> bool:
        """Столкновение или съезд с дороги"""
        return bool(self.collisions or self.offroad)

    @property
    def states(self) -> List[DynState]:
        return [DynState(p, h, v) for p, h, v in zip(self.positions, self.headings, self.speeds)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "episode_id": self.episode_id,
            "mode": self.mode,
            "planner": self.planner,
            "attacked": self.attacked,
            "dt": self.dt,
            "collisions": [e.to_dict() for e in self.collisions],
            "offroad": [e.to_dict() for e in self.offroad],
            "replans": self.replans,
            "emergencies": self.emergencies,
            "error": self.error,
            "ego": {
                "positions": self.positions.tolist(),
                "headings": self.headings.tolist(),
                "speeds": self.speeds.tolist(),
            },
        }
