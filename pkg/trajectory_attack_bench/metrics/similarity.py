"""
Сходство кривых: DTW, дискретное расстояние Фреше, PCM, площадь между кривыми и разность длин
"""

import logging
from typing import Dict

import numpy as np
import similaritymeasures as sm

from ..core.errors import InvalidInputError

logger = logging.getLogger(__name__)

SIMILARITY_NAMES = ("DTW", "FD", "PCM", "Area", "CL")


def _curve(points, name: str) -> np.ndarray:
    curve = np.asarray(points, dtype=float)
    if curve.ndim != 2 or curve.shape[1] != 2:
        raise InvalidInputError(f"{name}: ожидалась кривая формы (n, 2), получено {curve.shape}")
    if curve.shape[0] < 2:
        raise InvalidInputError(f"{name}: кривая должна содержать не менее 2 точек")
    if not np.all(np.isfinite(curve)):
        raise InvalidInputError(f"{name}: неконечные координаты")
    return curve


def dtw_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Динамическая трансформация времени с евклидовой стоимостью сопоставления"""
    distance, _ = sm.dtw(_curve(a, "A"), _curve(b, "B"))
    return float(distance)


def discrete_frechet(a: np.ndarray, b: np.ndarray) -> float:
    return float(sm.frechet_dist(_curve(a, "A"), _curve(b, "B")))


def curve_length(curve: np.ndarray) -> float:
    length, _ = sm.get_arc_length(curve)
    return float(length)


def trajectory_similarity(a, b) -> Dict[str, float]:
    """
    Пять мер различия кривых; все равны 0 для совпадающих кривых

    CL - модуль разности длин дуг (нормированная curve_length_measure не
    определена для кривых с нулевым средним координат). PCM требует ненулевой
    длины обеих кривых, иначе NaN: в отчёте такие значения не усредняются.

    Raises:
        InvalidInputError: Кривая из одной точки или неконечные координаты
    """
    a, b = _curve(a, "A"), _curve(b, "B")
    length_a, length_b = curve_length(a), curve_length(b)
    if length_a > 0 and length_b > 0:
        pcm = float(sm.pcm(a, b))
    else:
        logger.debug("PCM не определена для кривой нулевой длины")
        pcm = float("nan")
    return {
        "DTW": dtw_distance(a, b),
        "FD": discrete_frechet(a, b),
        "PCM": pcm,
        "Area": float(sm.area_between_two_curves(a, b)),
        "CL": abs(length_a - length_b),
    }
