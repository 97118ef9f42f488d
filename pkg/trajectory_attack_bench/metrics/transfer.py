"""
Переносимость атаки: степень успеха на исходной и целевой моделях и их отношение
"""

import logging
from typing import Mapping

import numpy as np

from ..core.errors import TransferUndefinedError

logger = logging.getLogger(__name__)

TRANSFER_METRICS = ("ADE", "FDE", "MR", "ORR")


def success_degree(benign: Mapping[str, float], attacked: Mapping[str, float]) -> float:
    """
    Средний относительный рост ошибки по ADE/FDE/MR/ORR, отрицательные изменения обнуляются

    Метрики с нулевым исходным значением пропускаются; если пропущены все - 0.
    """
    gains = []
    for name in TRANSFER_METRICS:
        if name not in benign or name not in attacked:
            continue
        base = float(benign[name])
        if base <= 0 or not np.isfinite(base):
            continue
        gains.append(max(0.0, (float(attacked[name]) - base) / base))
    return float(np.mean(gains)) if gains else 0.0


def transfer_rate(
    source_benign: Mapping[str, float],
    source_attacked: Mapping[str, float],
    target_benign: Mapping[str, float],
    target_attacked: Mapping[str, float],
) -> float:
    """
    Степень успеха на целевой модели, делённая на степень успеха на исходной

    Raises:
        TransferUndefinedError: Атака не увеличила ошибку исходной модели
    """
    source = success_degree(source_benign, source_attacked)
    if source <= 0:
        raise TransferUndefinedError("степень успеха на исходной модели равна 0")
    return success_degree(target_benign, target_attacked) / source
