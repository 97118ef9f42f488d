"""
Стоимость взаимодействия планировщика с предсказанными агентами

c = w·Σ_t exp(−d_t/λ), d_t - расстояние между точкой плана и предсказанной точкой агента.
Градиент по предсказанию используется метрикой чувствительности.
"""

from dataclasses import dataclass

import numpy as np

from ..utils.constants import INTERACTION_COST_LENGTH, INTERACTION_COST_WEIGHT


@dataclass(frozen=True)
class InteractionCost:
    weight: float = INTERACTION_COST_WEIGHT
    length: float = INTERACTION_COST_LENGTH

    def _terms(self, agent: np.ndarray, ego: np.ndarray):
        diff = np.asarray(agent, dtype=float) - np.asarray(ego, dtype=float)
        dist = np.linalg.norm(diff, axis=-1)
        return diff, dist, self.weight * np.exp(-dist / self.length)

    def value(self, agent: np.ndarray, ego: np.ndarray) -> float:
        """Стоимость для траекторий одинаковой длины T×2"""
        return float(np.sum(self._terms(agent, ego)[2]))

    def grad_agent(self, agent: np.ndarray, ego: np.ndarray) -> np.ndarray:
        """∂c/∂y_t = −(w/λ)·exp(−d_t/λ)·(y_t − e_t)/d_t"""
        diff, dist, terms = self._terms(agent, ego)
        safe = np.where(dist > 0, dist, 1.0)
        coeff = np.where(dist > 0, -terms / (self.length * safe), 0.0)
        return coeff[..., None] * diff

    def pointwise_gradient_norm(self, agent: np.ndarray, ego: np.ndarray) -> np.ndarray:
        """‖∂c/∂y_t‖ = (w/λ)·exp(−d_t/λ); при d_t = 0 - предел того же выражения"""
        return self._terms(agent, ego)[2] / self.length
