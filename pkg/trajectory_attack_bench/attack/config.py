"""
Конфигурация и результат атаки
"""

from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..dynamics import ControlSequence, DynamicBounds
from ..predictors.base import ModeRule
from ..reconstruction import DenseTrajectory, ReconConfig
from ..utils.constants import (
    DEFAULT_ALPHA,
    DEFAULT_BETA,
    DEFAULT_EPS,
    DEFAULT_GAMMA,
    DEFAULT_PGD_STEP_SCALE,
    DEFAULT_PGD_STEPS,
    DEFAULT_UPSAMPLE_FACTOR,
)

AttackVariant = Literal["opt-init", "opt-end"]


class AttackConfig(BaseModel):
    """Гиперпараметры PGD-атаки по управлениям"""

    model_config = ConfigDict(extra="forbid")

    alpha: float = Field(default=DEFAULT_ALPHA, ge=0, description="вес l_col")
    beta: float = Field(default=DEFAULT_BETA, ge=0, description="вес l_bh")
    gamma: float = Field(default=DEFAULT_GAMMA, ge=0, description="вес l_dyn")
    eps: float = Field(default=DEFAULT_EPS, gt=0, description="допуск отклонения узлов, м")
    pgd_steps: int = Field(default=DEFAULT_PGD_STEPS, ge=0)
    pgd_step_scale: float = Field(default=DEFAULT_PGD_STEP_SCALE, gt=0)
    step_budget: Optional[int] = Field(default=None, ge=1, description="делитель шага PGD, по умолчанию pgd_steps")
    variant: AttackVariant = "opt-init"
    lp: int = Field(default=1, ge=1, description="число кадров последовательной атаки")
    factor: int = Field(default=DEFAULT_UPSAMPLE_FACTOR, ge=1)
    bounds: DynamicBounds = Field(default_factory=DynamicBounds)
    mode_rule: ModeRule = "most-likely"
    objective_agents: Literal["adv", "all"] = "adv"
    seed: int = 0
    recon: ReconConfig = Field(default_factory=ReconConfig)

    def recon_config(self) -> ReconConfig:
        """Реконструкция с тем же f и границами, что у атаки"""
        return self.recon.model_copy(update={"factor": self.factor, "bounds": self.bounds})

    def step_sizes(self) -> np.ndarray:
        """Шаг PGD по координатам управления [a, κ]"""
        budget = self.step_budget or max(self.pgd_steps, 1)
        return self.pgd_step_scale * self.bounds.control_span / budget


@dataclass(eq=False)
class AttackResult:
    """Результат атаки: D_adv, X_adv, управления, трассы потерь и флаги нарушений"""

    dense: DenseTrajectory
    history: np.ndarray
    controls: ControlSequence
    benign: DenseTrajectory
    trace: List[float] = field(default_factory=list)
    term_trace: List[Dict[str, float]] = field(default_factory=list)
    violations: Dict[str, bool] = field(default_factory=dict)
    best_step: int = 0
    method: str = "pgd"
    variant: str = "opt-init"
    queries: int = 0
    feasible: bool = True

    @property
    def best_loss(self) -> float:
        return self.trace[self.best_step] if self.trace else float("nan")

    @property
    def best_terms(self) -> Dict[str, float]:
        return self.term_trace[self.best_step] if self.term_trace else {}

    @property
    def is_violating(self) -> bool:
        return any(self.violations.values())

    def max_knot_deviation(self, original: np.ndarray) -> float:
        return float(np.max(np.linalg.norm(self.history - np.asarray(original, dtype=float), axis=1)))
