"""
Открытый и замкнутый цикл: эго следует планам, остальные агенты воспроизводятся из логов

В замкнутом цикле план пересчитывается каждые replan_interval секунд по свежему
предсказанию; в открытом эго исполняет один план на всю длительность. С атакой
история атакующего агента перед каждым предсказанием заменяется результатом
последовательной атаки.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..attack import AttackConfig, attack_sequential
from ..core.errors import InvalidInputError, PlannerError
from ..dynamics import DynamicBounds, DynState, forward_arrays
from ..predictors.base import PredictionModel, Scene, predict
from ..utils.constants import (
    DEFAULT_FOOTPRINT,
    DEFAULT_HISTORY_LEN,
    DEFAULT_PLAN_HORIZON,
    DEFAULT_REPLAN_INTERVAL,
    PLAN_DT,
)
from ..utils.decorators import timed_stage
from .geometry import detect_collision, detect_offroad, headings_from_positions, interpolate_track
from .lattice_mpc import LatticeMPCPlanner
from .map_model import MapModel
from .plan import Forecast, Planner, SimOutcome
from .rule_planner import RulePlanner

logger = logging.getLogger(__name__)

PlannerKind = Literal["rule", "lattice-mpc"]


class PlannerConfig(BaseModel):
    """Выбор планировщика и параметры эго"""

    model_config = ConfigDict(extra="forbid")

    kind: PlannerKind = "rule"
    footprint: Tuple[float, float] = Field(default=DEFAULT_FOOTPRINT, description="длина и ширина эго, м")
    bounds: DynamicBounds = Field(default_factory=DynamicBounds)


class SimConfig(BaseModel):
    """Параметры симуляции"""

    model_config = ConfigDict(extra="forbid")

    mode: Literal["open", "closed"] = "closed"
    duration: float = Field(default=DEFAULT_PLAN_HORIZON, gt=0, description="с")
    replan_interval: float = Field(default=DEFAULT_REPLAN_INTERVAL, gt=0, description="с")
    sim_dt: float = Field(default=PLAN_DT, gt=0, description="с")
    horizon: float = Field(default=DEFAULT_PLAN_HORIZON, gt=0, description="горизонт плана, с")
    history_len: int = Field(default=DEFAULT_HISTORY_LEN, ge=2)
    lp: int = Field(default=6, ge=1, description="кадров последовательной атаки")
    seed: int = 0

    @model_validator(mode="after")
    def _check_timing(self) -> "SimConfig":
        for name, value in (("duration", self.duration), ("replan_interval", self.replan_interval)):
            ratio = value / self.sim_dt
            if abs(ratio - round(ratio)) > 1e-9:
                raise ValueError(f"{name} должен быть кратен sim_dt")
        if self.mode == "closed":
            ratio = self.duration / self.replan_interval
            if abs(ratio - round(ratio)) > 1e-9:
                raise ValueError("интервал перепланирования должен делить длительность")
            if self.horizon < self.replan_interval:
                raise ValueError("горизонт плана короче интервала перепланирования")
        elif self.horizon < self.duration - 1e-9:
            raise ValueError("в открытом цикле горизонт плана должен покрывать длительность")
        return self

    @property
    def total_steps(self) -> int:
        return int(round(self.duration / self.sim_dt))

    @property
    def replan_steps(self) -> int:
        if self.mode == "open":
            return self.total_steps
        return int(round(self.replan_interval / self.sim_dt))

    @property
    def expected_replans(self) -> int:
        """⌈длительность / интервал⌉ в замкнутом цикле, 1 в открытом"""
        if self.mode == "open":
            return 1
        return int(math.ceil(self.duration / self.replan_interval - 1e-9))


def build_planner(cfg: Optional[PlannerConfig] = None) -> Planner:
    cfg = cfg or PlannerConfig()
    if cfg.kind == "lattice-mpc":
        return LatticeMPCPlanner(cfg.bounds, cfg.footprint)
    return RulePlanner(cfg.bounds, cfg.footprint)


def _first_heading(track: np.ndarray) -> float:
    disp = np.diff(track, axis=0)
    moving = np.flatnonzero(np.linalg.norm(disp, axis=1) > 1e-6)
    if moving.size == 0:
        return 0.0
    d = disp[moving[0]]
    return float(np.arctan2(d[1], d[0]))


@dataclass(eq=False)
class LogEpisode:
    """
    Записанный эпизод: позиции N агентов на S шагах с шагом dt, эго и атакующий агент,
    индекс текущего шага (начала симуляции) и карта
    """

    episode_id: str
    dt: float
    positions: np.ndarray  # N×S×2
    ego_index: int
    adv_index: int
    current_step: int
    map_model: MapModel
    agent_ids: List[str] = field(default_factory=list)
    footprints: Optional[np.ndarray] = None
    description: str = ""

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.ndim != 3 or self.positions.shape[2] != 2:
            raise InvalidInputError(f"{self.episode_id}: позиции должны иметь форму N×S×2")
        if not np.all(np.isfinite(self.positions)):
            raise InvalidInputError(f"{self.episode_id}: позиции должны быть конечными")
        n, s = self.positions.shape[:2]
        if not (0 <= self.ego_index < n and 0 <= self.adv_index < n) or self.ego_index == self.adv_index:
            raise InvalidInputError(f"{self.episode_id}: некорректные индексы эго и атакующего агента")
        if not 1 <= self.current_step < s:
            raise InvalidInputError(f"{self.episode_id}: текущий шаг вне лога")
        if not self.agent_ids:
            self.agent_ids = [f"agent_{i}" for i in range(n)]
        if self.footprints is None:
            self.footprints = np.tile(np.asarray(DEFAULT_FOOTPRINT, float), (n, 1))
        self.footprints = np.asarray(self.footprints, dtype=float).reshape(n, 2)

    @property
    def num_agents(self) -> int:
        return int(self.positions.shape[0])

    @property
    def num_steps(self) -> int:
        return int(self.positions.shape[1])

    def track_at(self, times) -> np.ndarray:
        """Позиции всех агентов N×len(times)×2 в моменты times относительно текущего шага"""
        log_times = np.asarray(times, dtype=float) + self.current_step * self.dt
        return interpolate_track(self.positions, self.dt, log_times)

    def ego_state(self) -> DynState:
        """Состояние эго на текущем шаге по последнему смещению лога"""
        track = self.positions[self.ego_index]
        d = track[self.current_step] - track[self.current_step - 1]
        speed = float(np.hypot(d[0], d[1])) / self.dt
        heading = float(np.arctan2(d[1], d[0])) if speed > 1e-6 else _first_heading(track)
        return DynState(track[self.current_step], heading, speed)


def _perceived_scene(
    episode: LogEpisode,
    now: float,
    ego_positions: np.ndarray,
    sim_dt: float,
    observed: int,
    horizon_steps: int,
) -> Scene:
    dt = episode.dt
    past = now - dt * np.arange(observed - 1, -1, -1)
    histories = episode.track_at(past)
    simulated = past > 1e-9
    if np.any(simulated):
        histories[episode.ego_index, simulated] = interpolate_track(ego_positions, sim_dt, past[simulated])
    futures = episode.track_at(now + dt * np.arange(1, horizon_steps + 1))
    return Scene(
        dt=dt,
        histories=histories,
        futures=futures,
        adv_index=episode.adv_index,
        ego_index=episode.ego_index,
        agent_ids=list(episode.agent_ids),
        map_ref=episode.map_model.map_id,
        footprints=episode.footprints,
        scene_id=f"{episode.episode_id}@{now:.1f}",
    )


def _forecast(scene: Scene, predictor: PredictionModel, attack: Optional[AttackConfig], history_len: int, seed: int) -> Forecast:
    if attack is not None:
        result = attack_sequential(scene, predictor, attack.model_copy(update={"seed": seed}))
        scene = scene.with_agent_history(scene.adv_index, result.history)
    window = Scene(
        dt=scene.dt,
        histories=scene.histories[:, -history_len:],
        futures=scene.futures,
        adv_index=scene.adv_index,
        ego_index=scene.ego_index,
        agent_ids=scene.agent_ids,
        map_ref=scene.map_ref,
        footprints=scene.footprints,
        scene_id=scene.scene_id,
    )
    prediction = predict(predictor, window)
    return Forecast.from_prediction(window, prediction, exclude=[scene.ego_index])


@timed_stage("simulate")
def simulate(
    episode: LogEpisode,
    predictor: PredictionModel,
    planner: Planner,
    cfg: Optional[SimConfig] = None,
    attack: Optional[AttackConfig] = None,
) -> SimOutcome:
    """
    Прогон эпизода в открытом или замкнутом цикле

    Args:
        episode: Записанный эпизод
        predictor: Модель предсказания
        planner: Планировщик эго
        cfg: Параметры симуляции
        attack: AttackConfig последовательной атаки или None

    Returns:
        Итог со столкновениями, съездами и числом перепланирований; при PlannerError:
        усечённый итог с текстом ошибки
    """
    cfg = cfg or SimConfig()
    if attack is not None:
        attack = attack.model_copy(update={"lp": cfg.lp})
    observed = cfg.history_len + (cfg.lp - 1 if attack is not None else 0)
    horizon_steps = int(round(cfg.horizon / episode.dt))
    needed = episode.current_step + int(math.ceil((cfg.duration + cfg.horizon) / episode.dt - 1e-9))
    if episode.current_step < observed - 1 or needed >= episode.num_steps:
        raise InvalidInputError(
            f"{episode.episode_id}: лог короток для {observed} наблюдений и {cfg.duration + cfg.horizon} с вперёд"
        )

    state = episode.ego_state()
    positions = [state.position.copy()]
    headings = [state.heading]
    speeds = [state.speed]
    replans = emergencies = 0
    error: Optional[str] = None
    step = 0
    while step < cfg.total_steps:
        now = step * cfg.sim_dt
        scene = _perceived_scene(episode, now, np.array(positions), cfg.sim_dt, observed, horizon_steps)
        forecast = _forecast(scene, predictor, attack, cfg.history_len, cfg.seed + replans)
        try:
            plan = planner.plan(state, episode.map_model, forecast, cfg.horizon)
        except PlannerError as e:
            error = str(e)
            logger.warning(f"⚠️ {episode.episode_id}: планировщик отказал на t={now:.1f} с: {e}")
            break
        replans += 1
        emergencies += int(plan.emergency)

        chunk = plan.resampled(cfg.sim_dt).values[: min(cfg.replan_steps, cfg.total_steps - step)]
        p, th, v = forward_arrays(state.position, state.heading, state.speed, chunk, cfg.sim_dt)
        positions.extend(p[1:])
        headings.extend(th[1:])
        speeds.extend(v[1:])
        state = DynState(p[-1], float(th[-1]), float(v[-1]))
        step += chunk.shape[0]

    ego_positions = np.array(positions)
    ego_headings = np.array(headings)
    times = cfg.sim_dt * np.arange(ego_positions.shape[0])
    others = [i for i in range(episode.num_agents) if i != episode.ego_index]
    agents = episode.track_at(times)[others]
    agent_headings = np.stack(
        [headings_from_positions(a, _first_heading(episode.positions[i])) for a, i in zip(agents, others)]
    ) if others else np.zeros((0, times.shape[0]))
    collisions = detect_collision(
        ego_positions,
        ego_headings,
        agents,
        agent_headings,
        [episode.agent_ids[i] for i in others],
        ego_footprint=tuple(episode.footprints[episode.ego_index]),
        agent_footprints=episode.footprints[others],
    )
    offroad = detect_offroad(ego_positions, episode.map_model) if episode.map_model.drivable else []

    outcome = SimOutcome(
        episode_id=episode.episode_id,
        mode=cfg.mode,
        planner=planner.name,
        attacked=attack is not None,
        dt=cfg.sim_dt,
        positions=ego_positions,
        headings=ego_headings,
        speeds=np.array(speeds),
        collisions=collisions,
        offroad=offroad,
        replans=replans,
        emergencies=emergencies,
        error=error,
    )
    status = "❌ столкновение" if outcome.collided else ("⚠️ съезд" if outcome.offroad else "✅ без происшествий")
    logger.info(
        f"{status}: {episode.episode_id} ({cfg.mode}, {planner.name}, атака={'да' if outcome.attacked else 'нет'}, "
        f"перепланирований {replans})"
    )
    return outcome
