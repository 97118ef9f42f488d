"""
Реконструкция плотной динамически допустимой траектории по разреженной истории

Инициализация - линейная интерполяция с коэффициентом f, затем Adam (torch) по
управлениям (и начальным курсу/скорости) на L_recon = MSE по узлам + w·l_dyn
с проекцией на границы после каждого шага и бэктрекингом шага.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Tuple

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, Field

from ..core.errors import InvalidInputError, OptimizationDivergedError
from ..dynamics import (
    ControlSequence,
    DynamicBounds,
    DynParams,
    DynState,
    StateTrajectory,
    forward_arrays,
    inverse,
    l_dyn,
    l_dyn_rollout,
    project_controls,
    rollout,
    rollout_pullback,
    rollout_reverse,
)
from ..utils.constants import (
    DEFAULT_RECON_DYN_WEIGHT,
    DEFAULT_RECON_LR,
    DEFAULT_RECON_STEPS,
    DEFAULT_UPSAMPLE_FACTOR,
    MAX_LR_HALVINGS,
)

logger = logging.getLogger(__name__)


class ReconConfig(BaseModel):
    """Гиперпараметры реконструкции"""

    model_config = ConfigDict(extra="forbid")

    steps: int = Field(default=DEFAULT_RECON_STEPS, ge=0)
    lr: float = Field(default=DEFAULT_RECON_LR, gt=0)
    factor: int = Field(default=DEFAULT_UPSAMPLE_FACTOR, ge=1)
    dyn_weight: float = Field(default=DEFAULT_RECON_DYN_WEIGHT, ge=0)
    max_halvings: int = Field(default=MAX_LR_HALVINGS, ge=0)
    bounds: DynamicBounds = Field(default_factory=DynamicBounds)


@dataclass(eq=False)
class DenseTrajectory:
    """
    Плотная траектория, представимая управлениями

    Позиции всегда равны прокатке управлений от якоря: прямой при
    anchored_at="start", обратной во времени при anchored_at="end".
    """

    factor: int
    anchor: DynState
    controls: ControlSequence
    anchored_at: Literal["start", "end"] = "start"
    states: StateTrajectory = field(init=False)

    def __post_init__(self):
        if self.factor < 1:
            raise InvalidInputError("factor должен быть ≥ 1")
        if self.anchored_at == "start":
            self.states = rollout(self.anchor, self.controls)
        else:
            self.states = rollout_reverse(self.anchor, self.controls)

    @property
    def dt(self) -> float:
        return self.controls.dt

    @property
    def positions(self) -> np.ndarray:
        return self.states.positions

    @property
    def start(self) -> DynState:
        return self.states.first

    @property
    def knot_indices(self) -> np.ndarray:
        return np.arange(0, len(self.states), self.factor)

    @property
    def knots(self) -> np.ndarray:
        return self.positions[self.knot_indices]

    def params(self, start: int = 0, end: Optional[int] = None) -> DynParams:
        return DynParams.from_rollout(self.states, self.controls, start, end)

    def with_controls(self, values: np.ndarray, anchor: Optional[DynState] = None) -> "DenseTrajectory":
        return DenseTrajectory(
            self.factor, anchor or self.anchor, self.controls.with_values(values), self.anchored_at
        )

    def reanchored(self, anchored_at: Literal["start", "end"], position: Optional[np.ndarray] = None) -> "DenseTrajectory":
        """Та же траектория с якорем в начале или в конце (позицию якоря можно заменить)"""
        state = self.states.first if anchored_at == "start" else self.states.last
        if position is not None:
            state = DynState(np.asarray(position, dtype=float), state.heading, state.speed)
        return DenseTrajectory(self.factor, state, self.controls, anchored_at)


def _check_history(history, minimum: int) -> np.ndarray:
    knots = np.asarray(history, dtype=float)
    if knots.ndim != 2 or knots.shape[1] != 2 or knots.shape[0] < minimum:
        raise InvalidInputError(f"история должна иметь форму (H ≥ {minimum}, 2), получено {knots.shape}")
    if not np.all(np.isfinite(knots)):
        raise InvalidInputError("история содержит неконечные позиции")
    return knots


def interpolate_positions(history: np.ndarray, factor: int) -> np.ndarray:
    """D[t·f + j] = (1 − j/f)·X[t] + (j/f)·X[t+1]"""
    weights = np.arange(factor) / factor
    segments = (1.0 - weights)[None, :, None] * history[:-1, None, :] + weights[None, :, None] * history[1:, None, :]
    return np.concatenate([segments.reshape(-1, 2), history[-1:]], axis=0)


def linear_interpolate(history, factor: int, dt: float) -> DenseTrajectory:
    """
    Линейная интерполяция истории в плотную траекторию с коэффициентом f

    Управления получаются обратной моделью на интерполированных позициях.

    Args:
        history: Узлы истории (H ≥ 2, 2)
        factor: Коэффициент уплотнения f ≥ 1
        dt: Шаг разреженной истории (с)
    """
    if not isinstance(factor, (int, np.integer)) or factor < 1:
        raise InvalidInputError(f"factor должен быть целым ≥ 1, получено {factor}")
    if not dt > 0:
        raise InvalidInputError(f"dt должен быть положительным, получено {dt}")
    knots = _check_history(history, 2)
    dense = interpolate_positions(knots, int(factor))
    dense_dt = dt / factor

    if dense.shape[0] >= 3:
        params = inverse(dense, dense_dt)
        values = np.stack([params.accel, params.curvature], axis=1)
        values = np.concatenate([values, values[-1:]], axis=0)
        start = DynState(dense[0], float(params.headings[0]), float(params.speeds[0]))
    else:
        delta = dense[1] - dense[0]
        values = np.zeros((1, 2))
        start = DynState(dense[0], float(np.arctan2(delta[1], delta[0])), float(np.linalg.norm(delta) / dense_dt))
    return DenseTrajectory(int(factor), start, ControlSequence(dense_dt, values))


def _factor_for(n_controls: int, n_knots: int) -> int:
    if n_knots < 2 or n_controls % (n_knots - 1) != 0:
        raise InvalidInputError(
            f"число управлений {n_controls} не покрывает {n_knots} узлов равномерной сеткой"
        )
    return n_controls // (n_knots - 1)


def knot_mse(positions: np.ndarray, knots: np.ndarray, factor: int) -> float:
    """Среднее по узлам квадрата расстояния"""
    residual = positions[:: factor][: knots.shape[0]] - knots
    return float(np.mean(np.sum(residual**2, axis=1)))


def recon_loss(
    controls: ControlSequence,
    s0: DynState,
    knots,
    bounds: DynamicBounds,
    dyn_weight: float = 1.0,
) -> float:
    """
    L_recon = MSE(D, X) по узлам + w·l_dyn по параметрам прокатки

    Args:
        controls: Плотные управления
        s0: Начальное состояние
        knots: Узлы истории (H, 2)
        bounds: Границы для l_dyn
        dyn_weight: Вес l_dyn (1 в исходной постановке)
    """
    knots = _check_history(knots, 2)
    factor = _factor_for(len(controls), knots.shape[0])
    traj = rollout(s0, controls)
    total = knot_mse(traj.positions, knots, factor)
    if dyn_weight and len(traj) >= 3:
        total += dyn_weight * l_dyn(DynParams.from_rollout(traj, controls), bounds)
    return total


@dataclass
class _Problem:
    knots: np.ndarray
    factor: int
    dt: float
    bounds: DynamicBounds
    dyn_weight: float

    def evaluate(self, values: np.ndarray, theta0: float, v0: float, with_grad: bool = True):
        p0 = self.knots[0]
        positions, headings, speeds = forward_arrays(p0, theta0, v0, values, self.dt)
        idx = np.arange(0, positions.shape[0], self.factor)
        residual = positions[idx] - self.knots
        mse = float(np.mean(np.sum(residual**2, axis=1)))
        dyn, cot_speeds, cot_controls = l_dyn_rollout(speeds, headings, values, self.dt, self.bounds)
        loss = mse + self.dyn_weight * dyn
        if not with_grad:
            return loss, mse, None
        cot_p = np.zeros_like(positions)
        cot_p[idx] = 2.0 * residual / self.knots.shape[0]
        grad = rollout_pullback(
            DynState(p0, theta0, v0),
            ControlSequence(self.dt, values),
            cot_p,
            cot_speeds=self.dyn_weight * cot_speeds,
        )
        return loss, mse, (grad.controls + self.dyn_weight * cot_controls, grad.heading, grad.speed)


@dataclass
class ReconResult:
    """Плотная траектория D*, её параметры и трасса потерь"""

    dense: DenseTrajectory
    params: DynParams
    trace: List[float]
    knot_mse: float
    start_knot_mse: float


def reconstruct(history, cfg: Optional[ReconConfig] = None, dt: float = 0.5) -> Tuple[DenseTrajectory, DynParams]:
    """
    Реконструкция D* = argmin_u L_recon

    Args:
        history: Узлы истории (H ≥ 3, 2)
        cfg: Конфигурация реконструкции
        dt: Шаг разреженной истории (с)

    Returns:
        (D*, динамические параметры D*)
    """
    result = reconstruct_with_trace(history, cfg, dt)
    return result.dense, result.params


def reconstruct_with_trace(history, cfg: Optional[ReconConfig] = None, dt: float = 0.5) -> ReconResult:
    """
    Реконструкция с трассой потерь по принятым шагам

    Оптимизация стартует с линейной интерполяции, спроецированной на границы
    (скорость и управления). Шаг принимается, только если MSE по узлам не
    превышает MSE этого старта (start_knot_mse); непроецированная интерполяция
    проходит через узлы точно, но может нарушать границы, поэтому опорой не служит.
    """
    cfg = cfg or ReconConfig()
    knots = _check_history(history, 3)
    init = linear_interpolate(knots, cfg.factor, dt)
    if cfg.steps == 0:
        mse = knot_mse(init.positions, knots, cfg.factor)
        return ReconResult(init, init.params(), [], mse, mse)

    bounds = cfg.bounds
    problem = _Problem(knots, cfg.factor, init.dt, bounds, cfg.dyn_weight)
    span = np.concatenate([bounds.control_span, [np.pi, bounds.span("speed")]])

    theta0 = init.anchor.heading
    v0 = float(np.clip(init.anchor.speed, bounds.speed_lb, bounds.speed_ub))
    values = project_controls(init.controls.values, v0, init.dt, bounds)
    x = np.concatenate([values.reshape(-1), [theta0, v0]])

    def unpack(vec: np.ndarray):
        return vec[:-2].reshape(-1, 2), float(vec[-2]), float(vec[-1])

    def project(vec: np.ndarray) -> np.ndarray:
        ctrl, th, v = unpack(vec)
        v = float(np.clip(v, bounds.speed_lb, bounds.speed_ub))
        ctrl = project_controls(ctrl, v, init.dt, bounds)
        return np.concatenate([ctrl.reshape(-1), [th, v]])

    loss, mse, grads = problem.evaluate(*unpack(x))
    mse_init = mse
    trace = [loss]
    if not np.isfinite(loss):
        raise OptimizationDivergedError("неконечная функция потерь на инициализации", trace)

    scale = np.concatenate([np.tile(span[:2], values.shape[0]), span[2:]])
    # переменные нормированы на ширину границ; шаг Adam при lr = 1 задаёт направление
    weights = torch.tensor(x / scale, dtype=torch.float64, requires_grad=True)
    optimizer = torch.optim.Adam([weights], lr=1.0)
    lr = cfg.lr

    for step in range(1, cfg.steps + 1):
        g_ctrl, g_th, g_v = grads
        optimizer.zero_grad()
        weights.grad = torch.from_numpy(np.concatenate([g_ctrl.reshape(-1), [g_th, g_v]]) * scale)
        optimizer.step()
        with torch.no_grad():
            direction = x / scale - weights.detach().numpy()

        accepted = False
        trial_lr = lr
        for _ in range(cfg.max_halvings + 1):
            candidate = project(x - trial_lr * direction * scale)
            cand_loss, cand_mse, _ = problem.evaluate(*unpack(candidate), with_grad=False)
            if not np.isfinite(cand_loss):
                raise OptimizationDivergedError("неконечная функция потерь при реконструкции", trace)
            if cand_loss <= loss and cand_mse <= mse_init:
                accepted = True
                break
            trial_lr *= 0.5
        if not accepted:
            logger.debug(f"Реконструкция: шаг {step} не принят, остановка")
            break

        lr = min(cfg.lr, trial_lr * 1.2)
        x = candidate
        with torch.no_grad():
            weights.copy_(torch.from_numpy(x / scale))
        loss, mse, grads = problem.evaluate(*unpack(x))
        trace.append(loss)
        logger.debug(f"Реконструкция: шаг {step}, L={loss:.6g}, MSE={mse:.3g}, lr={trial_lr:.3g}")

    ctrl, th, v = unpack(x)
    dense = DenseTrajectory(cfg.factor, DynState(knots[0], th, v), ControlSequence(init.dt, ctrl))
    return ReconResult(dense, dense.params(), trace, knot_mse(dense.positions, knots, cfg.factor), mse_init)
