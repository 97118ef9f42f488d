"""
Чувствительность планирования к предсказаниям и метрики с весами чувствительности

PI агента - среднее по горизонту ‖∂c/∂ŷ_t‖ стоимости взаимодействия планировщика
c по предсказанным точкам агента.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional

import numpy as np

from ..core.errors import InvalidInputError
from ..planning.costs import InteractionCost
from ..predictors.base import Scene
from ..utils.constants import DEFAULT_SENSITIVITY_RADIUS

logger = logging.getLogger(__name__)


def sensitivity(agent_future: np.ndarray, ego_plan: np.ndarray, cost: Optional[InteractionCost] = None) -> float:
    """PI: средняя по горизонту норма градиента стоимости взаимодействия по точкам агента"""
    cost = cost or InteractionCost()
    agent_future = np.asarray(agent_future, dtype=float)
    ego_plan = np.asarray(ego_plan, dtype=float)
    if agent_future.shape != ego_plan.shape:
        raise InvalidInputError(f"формы траектории агента {agent_future.shape} и плана {ego_plan.shape} различаются")
    return float(np.mean(cost.pointwise_gradient_norm(agent_future, ego_plan)))


def agent_sensitivities(
    scene: Scene,
    predicted: np.ndarray,
    ego_plan: Optional[np.ndarray] = None,
    cost: Optional[InteractionCost] = None,
) -> np.ndarray:
    """
    PI каждого агента относительно плана эго (по умолчанию - записанное будущее эго)

    У эго вес 0; без эго и без плана все веса нулевые.
    """
    weights = np.zeros(scene.num_agents)
    if ego_plan is None:
        if scene.ego_index is None:
            return weights
        ego_plan = scene.futures[scene.ego_index]
    for i in range(scene.num_agents):
        if i != scene.ego_index:
            weights[i] = sensitivity(predicted[i], ego_plan, cost)
    return weights


def nearby_agents(histories: np.ndarray, adv_index: int, radius: float = DEFAULT_SENSITIVITY_RADIUS) -> np.ndarray:
    """Индексы агентов, минимальная поточечная дистанция истории которых до атакующего меньше ρ"""
    if not radius > 0:
        raise InvalidInputError("радиус ρ должен быть положительным")
    gaps = np.linalg.norm(histories - histories[adv_index][None], axis=-1).min(axis=1)
    return np.array([i for i in range(histories.shape[0]) if i != adv_index and gaps[i] < radius], dtype=int)


def aggregated_sensitivity(
    scene: Scene,
    predicted: np.ndarray,
    histories: Optional[np.ndarray] = None,
    radius: float = DEFAULT_SENSITIVITY_RADIUS,
    cost: Optional[InteractionCost] = None,
) -> float:
    """
    ΣSensitivity = (1/m)·Σ PI по m агентам в радиусе ρ от атакующего

    Для соседа i PI считается для предсказания атакующего относительно
    предсказания соседа в роли плана; без соседей - 0.

    Args:
        scene: Сцена
        predicted: Наиболее вероятные предсказания N×T×2
        histories: Истории, по которым определяются соседи (по умолчанию из сцены)
        radius: ρ, м
        cost: Стоимость взаимодействия
    """
    histories = scene.histories if histories is None else np.asarray(histories, dtype=float)
    adv = scene.adv_index
    near = nearby_agents(histories, adv, radius)
    if near.size == 0:
        return 0.0
    return float(np.mean([sensitivity(predicted[adv], predicted[i], cost) for i in near]))


def delta_sensitivity(
    scene: Scene,
    benign_predicted: np.ndarray,
    adversarial_predicted: np.ndarray,
    adversarial_histories: Optional[np.ndarray] = None,
    radius: float = DEFAULT_SENSITIVITY_RADIUS,
    cost: Optional[InteractionCost] = None,
) -> float:
    """ΔSensitivity = ΣSensitivity(атакованное) − ΣSensitivity(исходное); может быть отрицательной"""
    benign = aggregated_sensitivity(scene, benign_predicted, None, radius, cost)
    adversarial = aggregated_sensitivity(scene, adversarial_predicted, adversarial_histories, radius, cost)
    return adversarial - benign


@dataclass
class PlanningAwareResult:
    values: Dict[str, float] = field(default_factory=dict)
    unweighted: bool = False


def planning_aware(metrics: Mapping[str, np.ndarray], weights: np.ndarray) -> PlanningAwareResult:
    """
    Взвешенные чувствительностью метрики: Σ wᵢ·mᵢ / Σ wᵢ с префиксом PI-

    При нулевой сумме весов возвращается невзвешенное среднее с флагом unweighted.
    """
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InvalidInputError("веса чувствительности должны быть конечными и неотрицательными")
    total = float(np.sum(w))
    out = PlanningAwareResult(unweighted=total <= 0)
    if out.unweighted:
        logger.warning("⚠️ Все веса чувствительности нулевые: PI-метрики невзвешенные")
    for name, values in metrics.items():
        values = np.asarray(values, dtype=float)
        if values.shape != w.shape:
            raise InvalidInputError(f"{name}: форма {values.shape} не совпадает с весами {w.shape}")
        out.values[f"PI-{name}"] = float(np.mean(values)) if out.unweighted else float(np.dot(w, values) / total)
    return out
