"""
Геометрия столкновений: ориентированные прямоугольники, теорема о разделяющей оси,
события столкновений и съезда с проезжей части
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from ..utils.constants import DEFAULT_FOOTPRINT
from .map_model import MapModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CollisionEvent:
    step: int
    agent_id: str

    def to_dict(self) -> dict:
        return {"step": self.step, "agent_id": self.agent_id}


@dataclass(frozen=True)
class OffroadEvent:
    step: int

    def to_dict(self) -> dict:
        return {"step": self.step}


def box_corners(center, heading: float, footprint=DEFAULT_FOOTPRINT) -> np.ndarray:
    """Углы прямоугольника (длина × ширина) в порядке обхода, 4×2"""
    length, width = footprint
    c, s = np.cos(heading), np.sin(heading)
    axes = np.array([[c, s], [-s, c]])
    half = np.array([[1, 1], [-1, 1], [-1, -1], [1, -1]]) * np.array([length / 2.0, width / 2.0])
    return np.asarray(center, dtype=float) + half @ axes


def _axes(corners: np.ndarray) -> np.ndarray:
    edges = np.roll(corners, -1, axis=0) - corners
    return np.stack([edges[:, 1], -edges[:, 0]], axis=1)


def boxes_overlap(a: np.ndarray, b: np.ndarray) -> bool:
    """Пересечение выпуклых многоугольников: нет разделяющей оси среди нормалей рёбер"""
    for axis in np.concatenate([_axes(a), _axes(b)]):
        pa, pb = a @ axis, b @ axis
        if pa.max() < pb.min() or pb.max() < pa.min():
            return False
    return True


def headings_from_positions(positions: np.ndarray, fallback: float = 0.0) -> np.ndarray:
    """Курс по смещениям (последний шаг повторяет предыдущий), для неподвижных - предыдущий курс"""
    positions = np.asarray(positions, dtype=float)
    n = positions.shape[0]
    headings = np.full(n, fallback)
    if n < 2:
        return headings
    disp = np.diff(positions, axis=0)
    moving = np.linalg.norm(disp, axis=1) > 1e-6
    current = fallback
    for t in range(n - 1):
        if moving[t]:
            current = float(np.arctan2(disp[t, 1], disp[t, 0]))
        headings[t] = current
    headings[-1] = headings[-2]
    return headings


def detect_collision(
    ego_positions: np.ndarray,
    ego_headings: np.ndarray,
    agent_positions: np.ndarray,
    agent_headings: np.ndarray,
    agent_ids: Sequence[str],
    ego_footprint=DEFAULT_FOOTPRINT,
    agent_footprints=None,
    onset_only: bool = True,
) -> List[CollisionEvent]:
    """
    Столкновения эго с агентами по шагам (пересечение ориентированных прямоугольников)

    Args:
        ego_positions: S×2
        ego_headings: S
        agent_positions: M×S×2
        agent_headings: M×S
        agent_ids: Идентификаторы M агентов
        onset_only: Только начало каждого эпизода пересечения

    Returns:
        События, отсортированные по шагу
    """
    agent_positions = np.asarray(agent_positions, dtype=float)
    m, steps = agent_positions.shape[:2]
    footprints = np.tile(np.asarray(DEFAULT_FOOTPRINT, float), (m, 1)) if agent_footprints is None else np.asarray(agent_footprints, float)
    reach = np.hypot(*ego_footprint) / 2.0 + np.hypot(footprints[:, 0], footprints[:, 1]) / 2.0

    events: List[CollisionEvent] = []
    for j in range(m):
        touching = False
        for t in range(steps):
            gap = np.linalg.norm(agent_positions[j, t] - ego_positions[t])
            hit = gap <= reach[j] and boxes_overlap(
                box_corners(ego_positions[t], ego_headings[t], ego_footprint),
                box_corners(agent_positions[j, t], agent_headings[j, t], footprints[j]),
            )
            if hit and (not touching or not onset_only):
                events.append(CollisionEvent(t, str(agent_ids[j])))
            touching = hit
    return sorted(events, key=lambda e: (e.step, e.agent_id))


def detect_offroad(ego_positions: np.ndarray, map_model: MapModel, onset_only: bool = True) -> List[OffroadEvent]:
    """Съезд: центр эго вне всех проезжих многоугольников"""
    outside = ~map_model.is_drivable(ego_positions)
    events = []
    previous = False
    for t, off in enumerate(outside):
        if off and (not previous or not onset_only):
            events.append(OffroadEvent(t))
        previous = bool(off)
    return events


def interpolate_track(track: np.ndarray, dt: float, times) -> np.ndarray:
    """
    Линейная интерполяция траекторий (..., n, 2) с шагом dt в моменты times

    За пределами [0, (n−1)·dt] удерживается крайняя точка.
    """
    track = np.asarray(track, dtype=float)
    n = track.shape[-2]
    idx = np.clip(np.asarray(times, dtype=float) / dt, 0.0, n - 1)
    lo = np.floor(idx).astype(int)
    hi = np.minimum(lo + 1, n - 1)
    w = (idx - lo)[:, None]
    return track[..., lo, :] * (1.0 - w) + track[..., hi, :] * w
