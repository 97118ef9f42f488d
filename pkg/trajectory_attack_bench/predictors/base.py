"""
Базовые типы предсказания: сцена, предсказание и интерфейс модели P: X → Ŷ
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import List, Literal, Optional

import numpy as np

from ..core.errors import CapabilityError, InvalidInputError
from ..utils.constants import DEFAULT_FOOTPRINT, FINITE_DIFF_STEP

logger = logging.getLogger(__name__)

ModeRule = Literal["most-likely", "min-error"]


@dataclass(eq=False)
class Scene:
    """
    Сцена: истории X (N×H×2) и будущие траектории Y (N×T×2) в метрах

    ego_index может отсутствовать (сцены без эго-агента в наборах для обучения).
    """

    dt: float
    histories: np.ndarray
    futures: np.ndarray
    adv_index: int = 0
    ego_index: Optional[int] = None
    agent_ids: List[str] = field(default_factory=list)
    map_ref: Optional[str] = None
    footprints: Optional[np.ndarray] = None
    scene_id: str = "scene"

    def __post_init__(self):
        self.histories = np.asarray(self.histories, dtype=float)
        self.futures = np.asarray(self.futures, dtype=float)
        if not self.dt > 0:
            raise InvalidInputError(f"{self.scene_id}: dt должен быть положительным")
        if self.histories.ndim != 3 or self.histories.shape[2] != 2:
            raise InvalidInputError(f"{self.scene_id}: истории должны иметь форму N×H×2, получено {self.histories.shape}")
        if self.futures.ndim != 3 or self.futures.shape[2] != 2:
            raise InvalidInputError(f"{self.scene_id}: будущее должно иметь форму N×T×2, получено {self.futures.shape}")
        n = self.histories.shape[0]
        if self.futures.shape[0] != n:
            raise InvalidInputError(f"{self.scene_id}: число агентов в X и Y различается")
        if self.histories.shape[1] < 2 or self.futures.shape[1] < 1:
            raise InvalidInputError(f"{self.scene_id}: требуется H ≥ 2 и T ≥ 1")
        if not (np.all(np.isfinite(self.histories)) and np.all(np.isfinite(self.futures))):
            raise InvalidInputError(f"{self.scene_id}: позиции должны быть конечными")
        if not 0 <= self.adv_index < n:
            raise InvalidInputError(f"{self.scene_id}: индекс атакующего агента вне диапазона")
        if self.ego_index is not None:
            if not 0 <= self.ego_index < n:
                raise InvalidInputError(f"{self.scene_id}: индекс эго-агента вне диапазона")
            if self.ego_index == self.adv_index:
                raise InvalidInputError(f"{self.scene_id}: атакующий агент не может быть эго-агентом")
        if not self.agent_ids:
            self.agent_ids = [f"agent_{i}" for i in range(n)]
        elif len(self.agent_ids) != n:
            raise InvalidInputError(f"{self.scene_id}: agent_ids должен содержать {n} имён")
        if self.footprints is None:
            self.footprints = np.tile(np.asarray(DEFAULT_FOOTPRINT, dtype=float), (n, 1))
        else:
            self.footprints = np.asarray(self.footprints, dtype=float).reshape(n, 2)

    @property
    def num_agents(self) -> int:
        return int(self.histories.shape[0])

    @property
    def history_len(self) -> int:
        return int(self.histories.shape[1])

    @property
    def future_len(self) -> int:
        return int(self.futures.shape[1])

    @property
    def other_indices(self) -> List[int]:
        return [i for i in range(self.num_agents) if i != self.adv_index]

    def with_histories(self, histories: np.ndarray) -> "Scene":
        return replace(self, histories=np.asarray(histories, dtype=float))

    def with_agent_history(self, index: int, history: np.ndarray) -> "Scene":
        """Копия сцены с заменённой историей одного агента"""
        X = self.histories.copy()
        X[index] = np.asarray(history, dtype=float)
        return self.with_histories(X)


@dataclass(eq=False)
class Prediction:
    """K взвешенных мод Ŷ (K×N×T×2) и вероятности мод по агентам (N×K)"""

    modes: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        self.modes = np.asarray(self.modes, dtype=float)
        self.probs = np.asarray(self.probs, dtype=float)
        if self.modes.ndim != 4 or self.modes.shape[3] != 2:
            raise InvalidInputError(f"моды должны иметь форму K×N×T×2, получено {self.modes.shape}")
        k, n = self.modes.shape[:2]
        if self.probs.shape != (n, k):
            raise InvalidInputError(f"вероятности должны иметь форму ({n}, {k}), получено {self.probs.shape}")

    @property
    def num_modes(self) -> int:
        return int(self.modes.shape[0])

    def most_likely_indices(self) -> np.ndarray:
        return np.argmax(self.probs, axis=1)

    def most_likely(self) -> np.ndarray:
        """Наиболее вероятная мода каждого агента, N×T×2"""
        idx = self.most_likely_indices()
        return self.modes[idx, np.arange(self.modes.shape[1])]

    def select_modes(self, rule: ModeRule, truth: Optional[np.ndarray] = None) -> np.ndarray:
        """
        Индекс выбранной моды для каждого агента

        Args:
            rule: "most-likely" или "min-error" (по средней ошибке относительно truth)
            truth: Истинное будущее N×T×2, нужно для "min-error"
        """
        if rule == "most-likely":
            return self.most_likely_indices()
        if truth is None:
            raise InvalidInputError("для правила min-error нужны истинные траектории")
        errors = np.linalg.norm(self.modes - truth[None], axis=-1).mean(axis=-1)
        return np.argmin(errors, axis=0)


class PredictionModel(ABC):
    """
    Интерфейс дифференцируемой модели предсказания

    Модель неизменяема после построения или обучения и может разделяться
    между параллельными воркерами атаки.
    """

    name: str = "model"
    has_exact_gradient: bool = True
    allow_finite_difference: bool = True
    num_modes: int = 1

    @abstractmethod
    def forward(self, histories: np.ndarray, scene: Scene) -> Prediction:
        """Предсказание по историям N×H×2 в контексте сцены"""

    def backward(self, histories: np.ndarray, scene: Scene, cotangent: np.ndarray) -> np.ndarray:
        """Точный градиент ⟨cotangent, Ŷ⟩ по историям; по умолчанию недоступен"""
        raise CapabilityError(f"{self.name}: точный градиент не поддерживается")

    def close(self) -> None:
        """Освобождение внешних ресурсов"""


def _check_scene(model: PredictionModel, scene: Scene, prediction: Prediction) -> Prediction:
    expected = (scene.num_agents, scene.future_len, 2)
    if prediction.modes.shape[1:] != expected:
        raise InvalidInputError(
            f"{model.name}: форма предсказания {prediction.modes.shape[1:]} не совпадает с {expected}"
        )
    if not np.all(np.isfinite(prediction.modes)) or not np.all(np.isfinite(prediction.probs)):
        raise InvalidInputError(f"{model.name}: предсказание содержит неконечные значения")
    sums = prediction.probs.sum(axis=1)
    if np.any(prediction.probs < 0) or not np.allclose(sums, 1.0, atol=1e-6):
        raise InvalidInputError(f"{model.name}: вероятности мод не нормированы")
    return prediction


def predict(model: PredictionModel, scene: Scene, histories: Optional[np.ndarray] = None) -> Prediction:
    """
    K взвешенных мод Ŷ для сцены

    Args:
        model: Модель предсказания
        scene: Сцена (контекст и истории)
        histories: Необязательная замена историй сцены
    """
    X = scene.histories if histories is None else np.asarray(histories, dtype=float)
    if X.shape != scene.histories.shape:
        raise InvalidInputError(f"{model.name}: форма историй {X.shape} не совпадает со сценой")
    return _check_scene(model, scene, model.forward(X, scene))


def finite_difference_pullback(
    model: PredictionModel,
    scene: Scene,
    cotangent: np.ndarray,
    histories: Optional[np.ndarray] = None,
    step: float = FINITE_DIFF_STEP,
) -> np.ndarray:
    """Центральные конечные разности ⟨cotangent, Ŷ⟩ по каждой координате X"""
    X = scene.histories if histories is None else np.asarray(histories, dtype=float)
    grad = np.zeros_like(X)
    for idx in np.ndindex(*X.shape):
        plus = X.copy()
        minus = X.copy()
        plus[idx] += step
        minus[idx] -= step
        diff = model.forward(plus, scene).modes - model.forward(minus, scene).modes
        grad[idx] = float(np.sum(cotangent * diff)) / (2.0 * step)
    return grad


def model_pullback(
    model: PredictionModel,
    scene: Scene,
    cotangent: np.ndarray,
    histories: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Градиент ⟨cotangent, Ŷ⟩ по историям X (N×H×2)

    Точный, если модель его поддерживает; иначе центральные разности с h = 1e-4 м.

    Raises:
        CapabilityError: Градиента нет и конечные разности запрещены
    """
    X = scene.histories if histories is None else np.asarray(histories, dtype=float)
    cot = np.asarray(cotangent, dtype=float)
    expected = (model.num_modes, scene.num_agents, scene.future_len, 2)
    if cot.shape != expected:
        raise InvalidInputError(f"{model.name}: котангенс должен иметь форму {expected}, получено {cot.shape}")
    if not np.any(cot):
        return np.zeros_like(X)
    if model.has_exact_gradient:
        return model.backward(X, scene, cot)
    if not model.allow_finite_difference:
        raise CapabilityError(f"{model.name}: нет градиента, конечные разности отключены")
    logger.debug(f"{model.name}: градиент конечными разностями")
    return finite_difference_pullback(model, scene, cot, X)
