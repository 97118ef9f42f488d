"""
Аугментация данных: динамически допустимое отклонение истории в заданном направлении

L = −L_d + α·l_col, L_d = mean_t (D_aug − D*_orig)·d̄; направления вперёд, назад,
влево и вправо относительно курса агента.
"""

import logging
from typing import Literal, Optional

import numpy as np

from ..core.errors import InvalidInputError
from ..predictors.base import Scene
from ..reconstruction import DenseTrajectory
from .config import AttackConfig, AttackResult
from .losses import l_col_with_grad
from .objective import LossBreakdown, build_problem, controls_gradient
from .pgd import run_descent

logger = logging.getLogger(__name__)

DirectionName = Literal["forward", "backward", "left", "right"]
DIRECTION_NAMES = ("forward", "backward", "left", "right")

_DIRECTION_OFFSETS = {"forward": 0.0, "left": np.pi / 2, "backward": np.pi, "right": -np.pi / 2}


def direction_vector(name: DirectionName, heading: float) -> np.ndarray:
    """Единичный вектор направления относительно курса heading"""
    if name not in _DIRECTION_OFFSETS:
        raise InvalidInputError(f"неизвестное направление {name}, допустимы {DIRECTION_NAMES}")
    angle = heading + _DIRECTION_OFFSETS[name]
    return np.array([np.cos(angle), np.sin(angle)])


def generate_augmentation(
    scene: Scene,
    direction,
    cfg: AttackConfig,
    benign: Optional[DenseTrajectory] = None,
) -> AttackResult:
    """
    Отклонение истории атакующего агента вдоль d̄ с соблюдением границ и ε-шара

    Args:
        scene: Сцена
        direction: Единичный 2-вектор d̄ или имя направления
        cfg: Конфигурация (α - вес l_col, шаги и ε как у атаки)
        benign: Уже реконструированная D*_orig
    """
    problem = build_problem(scene, cfg, lp=1, benign=benign)
    if isinstance(direction, str):
        direction = direction_vector(direction, problem.benign.states.last.heading)  # type: ignore[arg-type]
    d = np.asarray(direction, dtype=float).reshape(2)
    if not np.isclose(np.linalg.norm(d), 1.0, atol=1e-6):
        raise InvalidInputError(f"направление должно быть единичным, |d̄| = {np.linalg.norm(d):.6f}")

    reference = problem.benign.positions
    step_sizes = cfg.step_sizes()

    def loss_fn(dense: DenseTrajectory, with_grad: bool):
        positions = dense.positions
        length = positions.shape[0]
        deviation = float(np.mean((positions - reference) @ d))
        col, g_col = l_col_with_grad(positions, problem.others)
        out = LossBreakdown(l_obj=deviation, l_col=col, total=-deviation + cfg.alpha * col)
        out.frames.append(out.total)
        if not with_grad:
            return out, None
        cot = -np.tile(d / length, (length, 1)) + cfg.alpha * g_col
        return out, controls_gradient(dense, cot)

    def propose(current: DenseTrajectory, grad, _step: int) -> np.ndarray:
        return current.controls.values - step_sizes[None, :] * np.sign(grad)

    result = run_descent(problem, problem.initial_dense(cfg.variant), loss_fn, cfg, propose, "augment")
    logger.info(f"🧭 {scene.scene_id}: аугментация, смещение вдоль d̄ {result.best_terms.get('l_obj', 0.0):.3f} м")
    return result
