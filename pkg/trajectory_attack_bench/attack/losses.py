"""
Слагаемые функции потерь атаки: l_obj, l_col, l_bh (значения и котангенсы)
"""

from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from ..core.errors import InvalidInputError
from ..predictors.base import ModeRule
from ..reconstruction import interpolate_positions


def _select_mode(truth: np.ndarray, modes: np.ndarray, probs: Optional[np.ndarray], rule: ModeRule) -> int:
    if modes.shape[0] == 1:
        return 0
    if rule == "most-likely":
        if probs is None:
            raise InvalidInputError("для правила most-likely нужны вероятности мод")
        return int(np.argmax(probs))
    errors = np.linalg.norm(modes - truth[None], axis=-1).mean(axis=-1)
    return int(np.argmin(errors))


def l_obj_with_grad(
    truth: np.ndarray,
    modes: np.ndarray,
    probs: Optional[np.ndarray] = None,
    rule: ModeRule = "most-likely",
) -> Tuple[float, np.ndarray]:
    """
    l_obj = (1/T)·Σ_t ‖Y_t − Ŷ_t‖ на выбранной моде

    Args:
        truth: Истинное будущее T×2
        modes: Моды K×T×2 (или одна мода T×2)
        probs: Вероятности мод (K,)
        rule: Правило выбора моды

    Returns:
        (значение, котангенс по модам той же формы, что modes)
    """
    truth = np.asarray(truth, dtype=float)
    single = np.ndim(modes) == 2
    modes = np.asarray(modes, dtype=float)[None] if single else np.asarray(modes, dtype=float)
    if modes.shape[1:] != truth.shape:
        raise InvalidInputError(f"формы Y {truth.shape} и Ŷ {modes.shape[1:]} не согласованы")
    k = _select_mode(truth, modes, probs, rule)
    diff = modes[k] - truth
    dist = np.linalg.norm(diff, axis=1)
    t = truth.shape[0]
    cot = np.zeros_like(modes)
    safe = np.where(dist > 0, dist, 1.0)
    cot[k] = np.where((dist > 0)[:, None], diff / safe[:, None], 0.0) / t
    return float(dist.mean()), cot[0] if single else cot


def l_obj(truth, modes, probs=None, rule: ModeRule = "most-likely") -> float:
    """Среднее по шагам будущего евклидово отклонение выбранной моды"""
    return l_obj_with_grad(truth, modes, probs, rule)[0]


def l_col_with_grad(dense: np.ndarray, others: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    l_col: среднее по агентам и плотным шагам 1/(‖D_adv − D_j‖ + 1)

    Args:
        dense: Позиции атакующего агента L×2
        others: Позиции остальных агентов M×L×2 (M = 0 даёт 0)

    Returns:
        (значение, котангенс по dense)
    """
    dense = np.asarray(dense, dtype=float)
    others = np.asarray(others, dtype=float).reshape(-1, *dense.shape)
    if others.shape[0] == 0:
        return 0.0, np.zeros_like(dense)
    diff = dense[None] - others
    dist = np.linalg.norm(diff, axis=2)
    recip = 1.0 / (dist + 1.0)
    m, length = dist.shape
    safe = np.where(dist > 0, dist, 1.0)
    coeff = np.where(dist > 0, -(recip**2) / safe, 0.0) / (m * length)
    grad = np.sum(coeff[..., None] * diff, axis=0)
    return float(recip.mean()), grad


def l_col(dense, others) -> float:
    return l_col_with_grad(dense, others)[0]


def l_bh_with_grad(dense: np.ndarray, reference: np.ndarray, eps: float) -> Tuple[float, np.ndarray]:
    """
    l_bh: среднее по шагам z − σ(z) + 0.5, z = ‖D_adv − D*_orig‖/ε

    Returns:
        (значение, котангенс по dense)
    """
    dense = np.asarray(dense, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if dense.shape != reference.shape:
        raise InvalidInputError("l_bh: траектории разной длины")
    if not eps > 0:
        raise InvalidInputError("ε должен быть положительным")
    diff = dense - reference
    dist = np.linalg.norm(diff, axis=1)
    z = dist / eps
    sig = expit(z)
    value = float(np.mean(z - sig + 0.5))
    safe = np.where(dist > 0, dist, 1.0)
    coeff = np.where(dist > 0, (1.0 - sig * (1.0 - sig)) / (eps * safe), 0.0) / dense.shape[0]
    return value, coeff[:, None] * diff


def l_bh(dense, reference, eps: float) -> float:
    return l_bh_with_grad(dense, reference, eps)[0]


def upsample_others(histories: Sequence[np.ndarray], factor: int) -> np.ndarray:
    """Линейное уплотнение разреженных историй остальных агентов: M×L×2"""
    dense = [interpolate_positions(np.asarray(h, dtype=float), factor) for h in histories]
    if not dense:
        return np.zeros((0, 0, 2))
    return np.stack(dense)
