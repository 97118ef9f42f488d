"""
Обучение суррогатов: WTA-регрессия по модам + кросс-энтропия вероятностей, Adam (torch)
"""

import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from ..core.errors import InvalidInputError, TrainingError
from .base import PredictionModel, Scene, predict
from .surrogates import SocialMLPPredictor, SurrogateSpec, build_surrogate

logger = logging.getLogger(__name__)

DEFAULT_EPOCHS = 200
DEFAULT_LR = 1e-2
CLASSIFICATION_WEIGHT = 0.1

SceneLoss = Callable[[SocialMLPPredictor, Scene, int], torch.Tensor]


def wta_loss(modes: np.ndarray, probs: np.ndarray, futures: np.ndarray, cls_weight: float = CLASSIFICATION_WEIGHT) -> float:
    """
    Winner-takes-all: MSE лучшей моды каждого агента + cls_weight·(−log p лучшей моды)

    Args:
        modes: Моды K×N×T×2
        probs: Вероятности N×K
        futures: Истинное будущее N×T×2
    """
    errors = np.mean(np.sum((modes - futures[None]) ** 2, axis=-1), axis=-1)  # K×N
    best = np.argmin(errors, axis=0)
    agents = np.arange(modes.shape[1])
    reg = float(np.mean(errors[best, agents]))
    cls = float(np.mean(-np.log(np.clip(probs[agents, best], 1e-12, None))))
    return reg + cls_weight * cls


def wta_loss_tensor(
    modes: torch.Tensor,
    logits: torch.Tensor,
    futures: np.ndarray,
    cls_weight: float = CLASSIFICATION_WEIGHT,
) -> torch.Tensor:
    """То же, что wta_loss, по логитам и с графом вычислений для autograd"""
    errors = ((modes - torch.from_numpy(futures)[None]) ** 2).sum(dim=-1).mean(dim=-1)
    best = errors.detach().argmin(dim=0)
    agents = torch.arange(modes.shape[1])
    return errors[best, agents].mean() + cls_weight * F.cross_entropy(logits, best)


def scene_loss(model: SocialMLPPredictor, scene: Scene) -> torch.Tensor:
    """Потеря WTA социальной MLP на сцене"""
    modes, logits = model.scene_outputs(scene)
    return wta_loss_tensor(modes, logits, scene.futures)


def training_ade(model: PredictionModel, scene: Scene) -> float:
    """ADE лучшей моды, усреднённая по агентам"""
    modes = predict(model, scene).modes
    ade = np.linalg.norm(modes - scene.futures[None], axis=-1).mean(axis=-1)
    return float(ade.min(axis=0).mean())


def fit_normalization(model: SocialMLPPredictor, dataset: Sequence[Scene]) -> None:
    """Среднее и разброс признаков по всем агентам набора"""
    features = np.concatenate([model.raw_features(scene.histories) for scene in dataset], axis=0)
    scale = features.std(axis=0)
    with torch.no_grad():
        model.net.feature_mean.copy_(torch.from_numpy(features.mean(axis=0)))
        model.net.feature_scale.copy_(torch.from_numpy(np.where(scale > 1e-6, scale, 1.0)))


def run_epochs(
    model: SocialMLPPredictor,
    dataset: Sequence[Scene],
    epochs: int,
    lr: float,
    seed: int,
    batch_loss: Optional[SceneLoss] = None,
) -> List[float]:
    """
    Эпохи Adam по сценам в перемешанном (по seed) порядке

    Args:
        batch_loss: Потеря для сцены на эпохе (по умолчанию WTA на самой сцене)

    Returns:
        Средняя потеря по эпохам
    """
    rng = np.random.default_rng(seed)
    optimizer = torch.optim.Adam(model.net.parameters(), lr=lr)
    loss_fn = batch_loss or (lambda m, scene, _epoch: scene_loss(m, scene))
    trace: List[float] = []

    for epoch in range(epochs):
        losses = []
        for index in rng.permutation(len(dataset)):
            optimizer.zero_grad()
            loss = loss_fn(model, dataset[index], epoch)
            if not torch.isfinite(loss):
                trace.append(float("nan"))
                raise TrainingError(f"неконечная потеря на эпохе {epoch}", trace)
            loss.backward()
            if not all(bool(torch.isfinite(p.grad).all()) for p in model.net.parameters() if p.grad is not None):
                trace.append(float("nan"))
                raise TrainingError(f"неконечный градиент на эпохе {epoch}", trace)
            optimizer.step()
            losses.append(float(loss.detach()))
        trace.append(float(np.mean(losses)))
        if not model.net.all_finite():
            raise TrainingError(f"веса стали неконечными на эпохе {epoch}", trace)
        if epoch % 50 == 0 or epoch == epochs - 1:
            logger.debug(f"Эпоха {epoch}: потеря {trace[-1]:.5f}")
    return trace


def train_surrogate(
    dataset: Sequence[Scene],
    spec: SurrogateSpec,
    epochs: int = DEFAULT_EPOCHS,
    lr: float = DEFAULT_LR,
) -> Tuple[PredictionModel, List[float]]:
    """
    Обучение суррогата на наборе сцен

    Аналитические суррогаты не имеют весов: трасса содержит их потерю WTA.

    Args:
        dataset: Непустой набор сцен
        spec: Описание суррогата (seed определяет инициализацию и порядок сцен)
        epochs: Число эпох
        lr: Шаг Adam

    Returns:
        (модель, потеря по эпохам)

    Raises:
        TrainingError: Неконечная потеря
    """
    if not dataset:
        raise InvalidInputError("набор для обучения пуст")
    if epochs < 0 or lr < 0:
        raise InvalidInputError("epochs и lr должны быть неотрицательными")

    model = build_surrogate(spec)
    if not isinstance(model, SocialMLPPredictor):
        losses = []
        for scene in dataset:
            prediction = predict(model, scene)
            losses.append(wta_loss(prediction.modes, prediction.probs, scene.futures))
        return model, [float(np.mean(losses))] * epochs

    fit_normalization(model, dataset)
    logger.info(f"🔧 Обучение {spec.kind}: {len(dataset)} сцен, {epochs} эпох, lr={lr}")
    trace = run_epochs(model, dataset, epochs, lr, spec.seed)
    if trace:
        logger.info(f"✅ Обучение завершено: потеря {trace[0]:.4f} → {trace[-1]:.4f}")
    return model, trace
