"""
Границы динамических параметров, мягкая функция потерь l_dyn и проекция управлений
"""

import logging
from typing import Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import expit

from ..utils.constants import (
    DEFAULT_ACCEL_BOUND,
    DEFAULT_CURVATURE_BOUND,
    DEFAULT_HEADING_RATE_BOUND,
    DEFAULT_SPEED_MAX,
)
from .params import PARAMETER_NAMES, DynParams

logger = logging.getLogger(__name__)


class DynamicBounds(BaseModel):
    """Нижние и верхние границы v, a, κ, dθ в единицах СИ"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    speed_lb: float = Field(default=0.0, description="м/с")
    speed_ub: float = Field(default=DEFAULT_SPEED_MAX, description="м/с")
    accel_lb: float = Field(default=-DEFAULT_ACCEL_BOUND, description="м/с²")
    accel_ub: float = Field(default=DEFAULT_ACCEL_BOUND, description="м/с²")
    curvature_lb: float = Field(default=-DEFAULT_CURVATURE_BOUND, description="1/м")
    curvature_ub: float = Field(default=DEFAULT_CURVATURE_BOUND, description="1/м")
    heading_rate_lb: float = Field(default=-DEFAULT_HEADING_RATE_BOUND, description="рад/с")
    heading_rate_ub: float = Field(default=DEFAULT_HEADING_RATE_BOUND, description="рад/с")

    @model_validator(mode="after")
    def _check_order(self) -> "DynamicBounds":
        for name in PARAMETER_NAMES:
            lb, ub = self.interval(name)
            if not (np.isfinite(lb) and np.isfinite(ub) and lb < ub):
                raise ValueError(f"граница {name}: требуется lb < ub, получено [{lb}, {ub}]")
        return self

    def interval(self, name: str) -> Tuple[float, float]:
        return getattr(self, f"{name}_lb"), getattr(self, f"{name}_ub")

    def span(self, name: str) -> float:
        lb, ub = self.interval(name)
        return ub - lb

    @property
    def control_span(self) -> np.ndarray:
        """Ширина допустимого диапазона управлений [a, κ]"""
        return np.array([self.span("accel"), self.span("curvature")])


def _soft_terms(values: np.ndarray, lb: float, ub: float) -> Tuple[np.ndarray, np.ndarray]:
    """Значения z − σ(z) + 0.5 и их производные по x"""
    z = (values - lb) / (ub - lb)
    sig = expit(z)
    value = z - sig + 0.5
    grad = (1.0 - sig * (1.0 - sig)) / (ub - lb)
    return value, grad


def l_dyn(params: DynParams, bounds: DynamicBounds) -> float:
    """
    Мягкая функция потерь динамики: Σ по параметрам и шагам z − σ(z) + 0.5,
    z = (x − x_lb)/(x_ub − x_lb)
    """
    total = 0.0
    for name, values in params.as_dict().items():
        if values.size == 0:
            continue
        lb, ub = bounds.interval(name)
        terms, _ = _soft_terms(values, lb, ub)
        total += float(np.sum(terms))
    return total


def l_dyn_grad(params: DynParams, bounds: DynamicBounds) -> Dict[str, np.ndarray]:
    """Градиент l_dyn по каждому параметру (та же форма, что у параметров)"""
    grads = {}
    for name, values in params.as_dict().items():
        lb, ub = bounds.interval(name)
        _, grads[name] = _soft_terms(values, lb, ub)
    return grads


def l_dyn_rollout(
    speeds: np.ndarray,
    headings: np.ndarray,
    controls: np.ndarray,
    dt: float,
    bounds: DynamicBounds,
    start: int = 0,
    end: Optional[int] = None,
) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    l_dyn на окне прокатки и его котангенсы по скоростям состояний и управлениям

    Returns:
        (значение, котангенс скоростей (n+1,), котангенс управлений (n, 2))
    """
    params = DynParams.from_arrays(dt, headings, speeds, controls, start, end)
    end = speeds.shape[0] - 1 if end is None else end
    grads = l_dyn_grad(params, bounds)

    cot_speeds = np.zeros_like(speeds)
    cot_controls = np.zeros_like(controls)
    cot_speeds[start:end] += grads["speed"]
    # dθ = v·κ
    cot_speeds[start : end - 1] += grads["heading_rate"] * params.curvature
    cot_controls[start : end - 1, 1] += grads["curvature"] + grads["heading_rate"] * params.speeds[:-1]
    cot_controls[start : end - 1, 0] += grads["accel"]
    return l_dyn(params, bounds), cot_speeds, cot_controls


def _clip_interval(value: float, lo: float, hi: float, fallback: float) -> float:
    if lo > hi:
        return fallback
    return min(max(value, lo), hi)


def project_controls(
    controls: np.ndarray,
    anchor_speed: float,
    dt: float,
    bounds: DynamicBounds,
    reverse: bool = False,
) -> np.ndarray:
    """
    Последовательная проекция управлений: после неё все v, a, κ, dθ прокатки в границах

    Ограничение a зависит от текущей скорости (v остаётся в [v_lb, v_ub]),
    ограничение κ - от скорости на шаге (|v·κ| в границах dθ).

    Args:
        controls: Управления (n, 2)
        anchor_speed: Скорость якоря (начального или конечного состояния)
        dt: Шаг по времени
        bounds: Границы
        reverse: Якорь в конце (обратная во времени прокатка)
    """
    out = np.array(controls, dtype=float, copy=True)
    n = out.shape[0]
    v = float(anchor_speed)
    order = range(n - 1, -1, -1) if reverse else range(n)
    for t in order:
        a = out[t, 0]
        if reverse:
            # v_t = v_{t+1} − a·dt
            lo = max(bounds.accel_lb, (v - bounds.speed_ub) / dt)
            hi = min(bounds.accel_ub, (v - bounds.speed_lb) / dt)
            fallback = bounds.accel_ub if v > bounds.speed_ub else bounds.accel_lb
            a = _clip_interval(a, lo, hi, fallback)
            v_step = v - a * dt
        else:
            lo = max(bounds.accel_lb, (bounds.speed_lb - v) / dt)
            hi = min(bounds.accel_ub, (bounds.speed_ub - v) / dt)
            fallback = bounds.accel_ub if v < bounds.speed_lb else bounds.accel_lb
            a = _clip_interval(a, lo, hi, fallback)
            v_step = v

        k_lo, k_hi = bounds.curvature_lb, bounds.curvature_ub
        if abs(v_step) > 1e-9:
            rate_lo, rate_hi = bounds.heading_rate_lb / v_step, bounds.heading_rate_ub / v_step
            if v_step < 0:
                rate_lo, rate_hi = rate_hi, rate_lo
            k_lo, k_hi = max(k_lo, rate_lo), min(k_hi, rate_hi)
        out[t, 0] = a
        out[t, 1] = _clip_interval(out[t, 1], k_lo, k_hi, 0.0)

        v = v_step if reverse else v + a * dt
    return out
