"""
Метрики предсказания: ADE/FDE (минимум по модам), доля промахов, доля съездов с дороги
и доля траекторий с нарушением динамических границ
"""

import logging
from typing import Literal, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..core.errors import InvalidInputError
from ..dynamics import DynamicBounds, inverse
from ..planning.costs import InteractionCost
from ..planning.map_model import MapModel
from ..predictors.base import Prediction
from ..utils.constants import (
    DEFAULT_MISS_THRESHOLD,
    DEFAULT_SENSITIVITY_RADIUS,
    INTERACTION_COST_LENGTH,
    INTERACTION_COST_WEIGHT,
)

logger = logging.getLogger(__name__)

ModesLike = Union[Prediction, np.ndarray]


class MetricsConfig(BaseModel):
    """Пороги метрик и параметры стоимости взаимодействия для чувствительности"""

    model_config = ConfigDict(extra="forbid")

    miss_threshold: float = Field(default=DEFAULT_MISS_THRESHOLD, gt=0, description="м")
    sensitivity_radius: float = Field(default=DEFAULT_SENSITIVITY_RADIUS, gt=0, description="ρ, м")
    interaction_weight: float = Field(default=INTERACTION_COST_WEIGHT, gt=0)
    interaction_length: float = Field(default=INTERACTION_COST_LENGTH, gt=0, description="λ, м")
    mode_rule: Literal["min-over-modes"] = "min-over-modes"

    def interaction_cost(self) -> InteractionCost:
        return InteractionCost(self.interaction_weight, self.interaction_length)


def as_modes(predicted: ModesLike) -> np.ndarray:
    """K×N×T×2 из Prediction, массива K×N×T×2 или одной моды N×T×2"""
    modes = predicted.modes if isinstance(predicted, Prediction) else np.asarray(predicted, dtype=float)
    if modes.ndim == 3:
        modes = modes[None]
    if modes.ndim != 4 or modes.shape[-1] != 2:
        raise InvalidInputError(f"ожидались моды K×N×T×2, получено {modes.shape}")
    return modes


def best_mode(predicted: ModesLike) -> np.ndarray:
    """Наиболее вероятная мода N×T×2 (для массива без вероятностей - первая)"""
    if isinstance(predicted, Prediction):
        return predicted.most_likely()
    return as_modes(predicted)[0]


def _pointwise(predicted: ModesLike, truth: np.ndarray) -> np.ndarray:
    modes = as_modes(predicted)
    truth = np.asarray(truth, dtype=float)
    if modes.shape[1:] != truth.shape:
        raise InvalidInputError(f"формы предсказания {modes.shape[1:]} и истины {truth.shape} не совпадают")
    return np.linalg.norm(modes - truth[None], axis=-1)  # K×N×T


def displacement_errors(predicted: ModesLike, truth: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    ADE и FDE по агентам: минимум по модам средней и конечной поточечной ошибки

    Returns:
        (ADE формы N, FDE формы N)
    """
    dist = _pointwise(predicted, truth)
    return dist.mean(axis=-1).min(axis=0), dist[..., -1].min(axis=0)


def miss_flags(predicted: ModesLike, truth: np.ndarray, threshold: float = DEFAULT_MISS_THRESHOLD) -> np.ndarray:
    """Промах агента: у лучшей моды максимальная поточечная ошибка больше порога"""
    if not threshold > 0:
        raise InvalidInputError("порог промаха должен быть положительным")
    return _pointwise(predicted, truth).max(axis=-1).min(axis=0) > threshold


def miss_rate(predicted: ModesLike, truth: np.ndarray, threshold: float = DEFAULT_MISS_THRESHOLD) -> float:
    return float(np.mean(miss_flags(predicted, truth, threshold)))


def offroad_flags(predicted: ModesLike, map_model: MapModel) -> np.ndarray:
    """Съезд агента: хотя бы одна точка наиболее вероятной моды вне проезжей области"""
    best = best_mode(predicted)
    return ~np.all(map_model.is_drivable(best), axis=-1)


def offroad_rate(predicted: ModesLike, map_model: MapModel) -> float:
    """
    Доля предсказанных траекторий, покидающих проезжую область

    Raises:
        InvalidInputError: На карте нет проезжих многоугольников
    """
    return float(np.mean(offroad_flags(predicted, map_model)))


def result_violations(result, bounds: DynamicBounds) -> bool:
    """
    Нарушает ли результат атаки границы динамики

    Для поиска по узлам (без модели динамики) параметры берутся обратной моделью
    по разреженной истории, иначе - из прокатки плотной траектории. Недопустимый
    результат (история не изменена) не нарушает границ.
    """
    if not result.feasible:
        return False
    if result.method == "search":
        sparse_dt = result.dense.dt * result.dense.factor
        if result.history.shape[0] < 3:
            return False
        return inverse(result.history, sparse_dt).is_violating(bounds)
    return result.dense.params().is_violating(bounds)


def violation_rate(results: Sequence, bounds: DynamicBounds) -> float:
    """
    Доля сгенерированных траекторий с хотя бы одним параметром вне границ

    Raises:
        InvalidInputError: Пустой набор результатов
    """
    if not results:
        raise InvalidInputError("violation_rate: пустой набор результатов")
    flags = [result_violations(r, bounds) for r in results]
    return float(np.mean(flags))
