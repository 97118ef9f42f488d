"""
Модель карты: проезжая область (многоугольники shapely) и полосы (осевая линия + ширина)
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import shapely
from shapely import affinity
from shapely.geometry import LineString, Point, Polygon
from shapely.ops import unary_union

from ..core.errors import InvalidInputError
from ..utils.constants import MAP_FORMAT

logger = logging.getLogger(__name__)

_TANGENT_HALF_WINDOW = 0.5  # м, полуширина окна численной касательной


@dataclass(eq=False)
class Lane:
    """Полоса: осевая линия (n ≥ 2 точек) и ширина в метрах"""

    lane_id: str
    centerline: np.ndarray
    width: float
    line: LineString = field(init=False, repr=False)

    def __post_init__(self):
        self.centerline = np.asarray(self.centerline, dtype=float)
        if self.centerline.ndim != 2 or self.centerline.shape[0] < 2 or self.centerline.shape[1] != 2:
            raise InvalidInputError(f"полоса {self.lane_id}: осевая линия должна иметь форму (n ≥ 2, 2)")
        if not self.width > 0:
            raise InvalidInputError(f"полоса {self.lane_id}: ширина должна быть положительной")
        self.line = LineString(self.centerline)

    @property
    def length(self) -> float:
        return float(self.line.length)

    def point_at(self, s: float, offset: float = 0.0) -> np.ndarray:
        """Точка на расстоянии s вдоль осевой со смещением offset (влево положительно)"""
        s = float(np.clip(s, 0.0, self.length))
        base = np.asarray(self.line.interpolate(s).coords[0])
        heading = self.heading_at(s)
        return base + offset * np.array([-np.sin(heading), np.cos(heading)])

    def heading_at(self, s: float) -> float:
        lo = max(0.0, s - _TANGENT_HALF_WINDOW)
        hi = min(self.length, s + _TANGENT_HALF_WINDOW)
        a = np.asarray(self.line.interpolate(lo).coords[0])
        b = np.asarray(self.line.interpolate(hi).coords[0])
        d = b - a
        return float(np.arctan2(d[1], d[0]))

    def project(self, point) -> Tuple[float, float]:
        """(s вдоль осевой, знаковое боковое смещение)"""
        p = np.asarray(point, dtype=float)
        s = float(self.line.project(Point(p)))
        base = np.asarray(self.line.interpolate(s).coords[0])
        heading = self.heading_at(s)
        tangent = np.array([np.cos(heading), np.sin(heading)])
        rel = p - base
        return s, float(tangent[0] * rel[1] - tangent[1] * rel[0])

    def contains(self, point, margin: float = 0.0) -> bool:
        _, offset = self.project(point)
        return abs(offset) <= self.width / 2.0 + margin

    def to_dict(self) -> Dict[str, Any]:
        return {"id": self.lane_id, "centerline": self.centerline.tolist(), "width": self.width}


@dataclass(eq=False)
class MapModel:
    """Проезжая область и полосы"""

    drivable: List[Polygon]
    lanes: List[Lane] = field(default_factory=list)
    map_id: str = "map"
    region: Any = field(init=False, repr=False)

    def __post_init__(self):
        for i, poly in enumerate(self.drivable):
            if not isinstance(poly, Polygon) or poly.is_empty or not poly.is_valid:
                raise InvalidInputError(f"карта {self.map_id}: многоугольник {i} невалиден или самопересекается")
        self.region = unary_union(self.drivable) if self.drivable else Polygon()

    def require_drivable(self) -> None:
        if not self.drivable:
            raise InvalidInputError(f"карта {self.map_id}: нет проезжих многоугольников")

    def is_drivable(self, points) -> np.ndarray:
        """Флаг «внутри или на границе проезжей области» для точек (..., 2)"""
        self.require_drivable()
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, 2)
        inside = shapely.intersects_xy(self.region, flat[:, 0], flat[:, 1])
        return np.asarray(inside, dtype=bool).reshape(pts.shape[:-1])

    def lane(self, lane_id: str) -> Lane:
        for lane in self.lanes:
            if lane.lane_id == lane_id:
                return lane
        raise InvalidInputError(f"карта {self.map_id}: нет полосы {lane_id}")

    def nearest_lane(self, point, heading: Optional[float] = None) -> Optional[Lane]:
        """
        Полоса, содержащая точку, с наименьшим боковым смещением

        При заданном курсе отбрасываются полосы встречного направления.
        """
        best, best_offset = None, np.inf
        for lane in self.lanes:
            s, offset = lane.project(point)
            if abs(offset) > lane.width / 2.0:
                continue
            if heading is not None and np.cos(heading - lane.heading_at(s)) < 0:
                continue
            if abs(offset) < best_offset:
                best, best_offset = lane, abs(offset)
        return best

    def translated(self, dx: float, dy: float) -> "MapModel":
        return MapModel(
            [affinity.translate(p, dx, dy) for p in self.drivable],
            [Lane(l.lane_id, l.centerline + np.array([dx, dy]), l.width) for l in self.lanes],
            self.map_id,
        )

    @classmethod
    def from_lanes(cls, lanes: Sequence[Lane], margin: float = 0.0, map_id: str = "map") -> "MapModel":
        """Проезжая область как объединение полос, расширенных на margin"""
        shapes = [l.line.buffer(l.width / 2.0 + margin, cap_style="flat") for l in lanes]
        merged = unary_union(shapes)
        polygons = list(merged.geoms) if hasattr(merged, "geoms") else [merged]
        return cls(polygons, list(lanes), map_id)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format": MAP_FORMAT,
            "id": self.map_id,
            "drivable": [np.asarray(p.exterior.coords)[:-1].tolist() for p in self.drivable],
            "lanes": [l.to_dict() for l in self.lanes],
        }
