"""
Динамические параметры траектории и обратная модель Φ⁻¹

Каноническое выравнивание для L позиций: курс θ и скорость v имеют длину L−1
(по отрезкам), ускорение a, кривизна κ и скорость поворота dθ - длину L−2.
"""

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Dict, Optional

import numpy as np

from ..core.errors import InvalidInputError
from ..utils.constants import BOUND_TOLERANCE, SPEED_EPS
from .bicycle import ControlSequence, StateTrajectory, wrap_angle

if TYPE_CHECKING:
    from .bounds import DynamicBounds

logger = logging.getLogger(__name__)

PARAMETER_NAMES = ("speed", "accel", "curvature", "heading_rate")


@dataclass(eq=False)
class DynParams:
    """Пошаговые динамические параметры {θ, v, a, κ, dθ}, выровненные по траектории"""

    dt: float
    headings: np.ndarray
    speeds: np.ndarray
    accel: np.ndarray
    curvature: np.ndarray
    heading_rate: np.ndarray
    flagged: Optional[np.ndarray] = None  # шаги с v < v_eps, κ принудительно 0

    def __post_init__(self):
        n = self.speeds.shape[0]
        if self.headings.shape[0] != n:
            raise InvalidInputError("длины курса и скорости должны совпадать")
        for name in ("accel", "curvature", "heading_rate"):
            if getattr(self, name).shape[0] != n - 1:
                raise InvalidInputError(f"{name}: ожидалась длина {n - 1}")
        if self.flagged is None:
            self.flagged = np.zeros(n - 1, dtype=bool)

    @property
    def num_positions(self) -> int:
        return int(self.speeds.shape[0] + 1)

    def as_dict(self) -> Dict[str, np.ndarray]:
        """Ограничиваемые параметры по именам"""
        return {
            "speed": self.speeds,
            "accel": self.accel,
            "curvature": self.curvature,
            "heading_rate": self.heading_rate,
        }

    def violations(self, bounds: "DynamicBounds", tolerance: float = BOUND_TOLERANCE) -> Dict[str, bool]:
        """Флаги нарушения границ по каждому параметру"""
        flags = {}
        for name, values in self.as_dict().items():
            lb, ub = bounds.interval(name)
            flags[name] = bool(values.size and (np.any(values < lb - tolerance) or np.any(values > ub + tolerance)))
        return flags

    def is_violating(self, bounds: "DynamicBounds", tolerance: float = BOUND_TOLERANCE) -> bool:
        return any(self.violations(bounds, tolerance).values())

    @property
    def any_flagged(self) -> bool:
        return bool(np.any(self.flagged))

    @classmethod
    def from_rollout(
        cls,
        traj: StateTrajectory,
        controls: ControlSequence,
        start: int = 0,
        end: Optional[int] = None,
    ) -> "DynParams":
        """
        Параметры прокатки на окне состояний [start, end] включительно

        Args:
            traj: Результат прокатки (|u|+1 состояний)
            controls: Управления прокатки
            start: Первое состояние окна
            end: Последнее состояние окна (по умолчанию последнее)
        """
        return cls.from_arrays(controls.dt, traj.headings, traj.speeds, controls.values, start, end)

    @classmethod
    def from_arrays(
        cls,
        dt: float,
        headings: np.ndarray,
        speeds: np.ndarray,
        controls: np.ndarray,
        start: int = 0,
        end: Optional[int] = None,
    ) -> "DynParams":
        end = speeds.shape[0] - 1 if end is None else end
        if end - start < 2:
            raise InvalidInputError("окно должно содержать не менее 3 состояний")
        v = speeds[start:end]
        kappa = controls[start : end - 1, 1]
        return cls(
            dt=dt,
            headings=headings[start:end].copy(),
            speeds=v.copy(),
            accel=controls[start : end - 1, 0].copy(),
            curvature=kappa.copy(),
            heading_rate=v[:-1] * kappa,
        )


def _fill_stationary_headings(headings: np.ndarray, moving: np.ndarray) -> np.ndarray:
    """Курс стоящих отрезков берётся у соседнего движущегося отрезка"""
    if np.all(moving):
        return headings
    if not np.any(moving):
        return np.zeros_like(headings)
    filled = headings.copy()
    idx = np.where(moving, np.arange(len(headings)), -1)
    np.maximum.accumulate(idx, out=idx)
    first = int(np.argmax(moving))
    idx[idx < 0] = first
    return filled[idx]


def inverse(positions: np.ndarray, dt: float, speed_eps: float = SPEED_EPS) -> DynParams:
    """
    Обратная модель Φ⁻¹: динамические параметры по последовательности позиций

    Курс берётся как угол вектора смещения (Δx, Δy) с учётом квадранта.
    При v < speed_eps кривизна ненаблюдаема: κ = 0, шаг помечается флагом.

    Args:
        positions: Позиции, форма (L ≥ 3, 2)
        dt: Шаг по времени (с)
        speed_eps: Порог неподвижности (м/с)
    """
    points = np.asarray(positions, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2 or points.shape[0] < 3:
        raise InvalidInputError(f"нужно не менее 3 позиций формы (L, 2), получено {points.shape}")
    if not np.all(np.isfinite(points)):
        raise InvalidInputError("позиции содержат неконечные значения")
    if not dt > 0:
        raise InvalidInputError(f"dt должен быть положительным, получено {dt}")

    disp = np.diff(points, axis=0)
    speeds = np.linalg.norm(disp, axis=1) / dt
    moving = speeds >= speed_eps
    headings = _fill_stationary_headings(np.arctan2(disp[:, 1], disp[:, 0]), moving)

    heading_rate = wrap_angle(np.diff(headings)) / dt
    accel = np.diff(speeds) / dt
    flagged = ~moving[:-1]
    safe_speed = np.where(flagged, 1.0, speeds[:-1])
    curvature = np.where(flagged, 0.0, heading_rate / safe_speed)
    if np.any(flagged):
        logger.debug(f"⚠️ Φ⁻¹: {int(flagged.sum())} шагов с v < {speed_eps} м/с, κ = 0")

    return DynParams(
        dt=float(dt),
        headings=headings,
        speeds=speeds,
        accel=accel,
        curvature=curvature,
        heading_rate=np.asarray(heading_rate, dtype=float).reshape(-1),
        flagged=flagged,
    )
