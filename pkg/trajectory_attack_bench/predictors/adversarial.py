"""
Состязательное обучение: на каждой эпохе истории атакующих агентов перегенерируются
атакой, потери чистой и атакованной сцены смешиваются 50/50
"""

import logging
from typing import Dict, List, Sequence, Tuple

import torch

from ..attack import AttackConfig, attack_single
from ..core.errors import InvalidInputError
from ..reconstruction import DenseTrajectory, reconstruct
from .base import Scene
from .surrogates import SocialMLPPredictor
from .training import DEFAULT_LR, run_epochs, scene_loss

logger = logging.getLogger(__name__)

BENIGN_FRACTION = 0.5


def adversarial_train(
    model: SocialMLPPredictor,
    dataset: Sequence[Scene],
    attack_cfg: AttackConfig,
    epochs: int,
    lr: float = DEFAULT_LR,
) -> Tuple[SocialMLPPredictor, List[float]]:
    """
    Дообучение копии модели на смеси чистых и атакованных сцен

    Реконструкции D*_orig считаются один раз и переиспользуются на всех эпохах.
    При pgd_steps = 0 атакованная сцена совпадает с чистой и обучение обычное.

    Args:
        model: Обучаемая social-mlp (не изменяется)
        dataset: Сцены с атакующим агентом
        attack_cfg: Конфигурация атаки
        epochs: Число эпох
        lr: Шаг Adam

    Returns:
        (робастная модель, потеря по эпохам)
    """
    if not isinstance(model, SocialMLPPredictor):
        raise InvalidInputError("состязательное обучение поддерживается только для social-mlp")
    if not dataset:
        raise InvalidInputError("набор для обучения пуст")

    robust = model.copy()
    benign_cache: Dict[str, DenseTrajectory] = {}
    if attack_cfg.pgd_steps > 0:
        for scene in dataset:
            benign_cache[scene.scene_id], _ = reconstruct(
                scene.histories[scene.adv_index], attack_cfg.recon_config(), scene.dt
            )

    def mixed_loss(current: SocialMLPPredictor, scene: Scene, epoch: int) -> torch.Tensor:
        loss_b = scene_loss(current, scene)
        if attack_cfg.pgd_steps == 0:
            return loss_b
        cfg = attack_cfg.model_copy(update={"seed": attack_cfg.seed + epoch})
        result = attack_single(scene, current, cfg, benign=benign_cache[scene.scene_id])
        adversarial = scene.with_agent_history(scene.adv_index, result.history)
        loss_a = scene_loss(current, adversarial)
        return BENIGN_FRACTION * loss_b + (1.0 - BENIGN_FRACTION) * loss_a

    logger.info(
        f"🛡️ Состязательное обучение: {len(dataset)} сцен, {epochs} эпох, PGD {attack_cfg.pgd_steps} шагов"
    )
    trace = run_epochs(robust, dataset, epochs, lr, robust.spec.seed, mixed_loss)
    if trace:
        logger.info(f"✅ Состязательное обучение завершено: потеря {trace[0]:.4f} → {trace[-1]:.4f}")
    return robust, trace
