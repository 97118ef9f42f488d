"""
Целевая функция атаки L_adv и её градиент по управлениям

L_adv = −l_obj + α·l_col + β·l_bh + γ·l_dyn, суммируется по кадрам
последовательной атаки; при L_p = 1 кадр один.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..core.errors import InvalidInputError
from ..dynamics import DynState, l_dyn_rollout, rollout_pullback, rollout_reverse_pullback
from ..predictors.base import PredictionModel, Scene, model_pullback, predict
from ..reconstruction import DenseTrajectory, reconstruct
from .config import AttackConfig
from .losses import l_bh_with_grad, l_col_with_grad, l_obj_with_grad, upsample_others

logger = logging.getLogger(__name__)

TERM_NAMES = ("l_obj", "l_col", "l_bh", "l_dyn")


@dataclass
class LossBreakdown:
    """Слагаемые L_adv (сумма по кадрам), итог и итоги по кадрам"""

    l_obj: float = 0.0
    l_col: float = 0.0
    l_bh: float = 0.0
    l_dyn: float = 0.0
    total: float = 0.0
    frames: List[float] = field(default_factory=list)

    def as_dict(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in (*TERM_NAMES, "total")}

    def recompose(self, cfg: AttackConfig) -> float:
        return -self.l_obj + cfg.alpha * self.l_col + cfg.beta * self.l_bh + cfg.gamma * self.l_dyn


@dataclass(eq=False)
class AttackWindow:
    """Кадр атаки: сцена с окном истории X(t) и будущим Y(t), диапазон плотных шагов"""

    scene: Scene
    knot_offset: int
    dense_start: int
    dense_end: int


@dataclass(eq=False)
class AttackProblem:
    """Неизменяемые данные атаки одной сцены"""

    scene: Scene
    benign: DenseTrajectory
    others: np.ndarray
    windows: List[AttackWindow]
    window_len: int

    @property
    def adv_index(self) -> int:
        return self.scene.adv_index

    @property
    def factor(self) -> int:
        return self.benign.factor

    @property
    def original_knots(self) -> np.ndarray:
        return self.scene.histories[self.adv_index]

    def knots(self, dense: DenseTrajectory) -> np.ndarray:
        return dense.positions[:: self.factor]

    def knot_deviation(self, dense: DenseTrajectory) -> float:
        return float(np.max(np.linalg.norm(self.knots(dense) - self.original_knots, axis=1)))

    def window_history(self, positions: np.ndarray, window: int) -> np.ndarray:
        """Узлы окна X(t) атакующего агента из плотных позиций"""
        w = self.windows[window]
        return positions[w.dense_start : w.dense_end + 1 : self.factor]

    def initial_dense(self, variant: str) -> DenseTrajectory:
        """D_adv до оптимизации: Opt-init держит начало D*, Opt-end - текущую позицию X⁰"""
        if variant == "opt-end":
            last = self.benign.states.last
            anchor = DynState(self.original_knots[-1], last.heading, last.speed)
            return DenseTrajectory(self.factor, anchor, self.benign.controls, "end")
        return DenseTrajectory(self.factor, self.benign.start, self.benign.controls, "start")


def build_problem(
    scene: Scene,
    cfg: AttackConfig,
    lp: int = 1,
    benign: Optional[DenseTrajectory] = None,
) -> AttackProblem:
    """
    Подготовка атаки: реконструкция D*_orig, уплотнение остальных агентов, кадры

    Сцена с H_obs наблюдёнными шагами даёт L_p окон длины H = H_obs − L_p + 1.

    Args:
        scene: Сцена с наблюдённой историей
        cfg: Конфигурация атаки
        lp: Число кадров
        benign: Уже реконструированная D*_orig атакующего агента
    """
    h_obs = scene.history_len
    window_len = h_obs - lp + 1
    if lp < 1 or window_len < 2:
        raise InvalidInputError(f"{scene.scene_id}: недостаточно наблюдённых шагов ({h_obs}) для L_p={lp}")
    adv = scene.adv_index
    if benign is None:
        benign, _ = reconstruct(scene.histories[adv], cfg.recon_config(), scene.dt)
    f = cfg.factor
    if benign.factor != f or benign.positions.shape[0] != (h_obs - 1) * f + 1:
        raise InvalidInputError(f"{scene.scene_id}: D*_orig не согласована с историей и f={f}")

    others = upsample_others([scene.histories[j] for j in scene.other_indices], f)
    extended = np.concatenate([scene.histories, scene.futures], axis=1)
    horizon = scene.future_len
    windows = []
    for w in range(lp):
        window_scene = replace(
            scene,
            histories=scene.histories[:, w : w + window_len].copy(),
            futures=extended[:, w + window_len : w + window_len + horizon].copy(),
            scene_id=f"{scene.scene_id}@{w}" if lp > 1 else scene.scene_id,
        )
        windows.append(AttackWindow(window_scene, w, w * f, (w + window_len - 1) * f))
    return AttackProblem(scene, benign, others, windows, window_len)


def objective_cotangent(
    window: AttackWindow,
    prediction,
    cfg: AttackConfig,
) -> Tuple[float, np.ndarray]:
    scene = window.scene
    cot = np.zeros_like(prediction.modes)
    agents = [scene.adv_index] if cfg.objective_agents == "adv" else list(range(scene.num_agents))
    value = 0.0
    for i in agents:
        v, c = l_obj_with_grad(scene.futures[i], prediction.modes[:, i], prediction.probs[i], cfg.mode_rule)
        value += v / len(agents)
        cot[:, i] = c / len(agents)
    return value, cot


def adv_loss_and_grad(
    problem: AttackProblem,
    predictor: PredictionModel,
    dense: DenseTrajectory,
    cfg: AttackConfig,
    with_grad: bool = True,
) -> Tuple[LossBreakdown, Optional[np.ndarray]]:
    """
    L_adv по всем кадрам и градиент по управлениям D_adv (якорь фиксирован)

    Returns:
        (слагаемые, градиент n×2 или None)
    """
    positions = dense.positions
    states = dense.states
    controls = dense.controls.values
    adv = problem.adv_index
    cot_p = np.zeros_like(positions)
    cot_v = np.zeros(positions.shape[0])
    cot_u = np.zeros_like(controls)
    out = LossBreakdown()

    for index, window in enumerate(problem.windows):
        s, e = window.dense_start, window.dense_end
        scene = window.scene.with_agent_history(adv, problem.window_history(positions, index))
        prediction = predict(predictor, scene)
        obj, cot_modes = objective_cotangent(window, prediction, cfg)

        col, g_col = l_col_with_grad(positions[s : e + 1], problem.others[:, s : e + 1])
        bh, g_bh = l_bh_with_grad(positions[s : e + 1], problem.benign.positions[s : e + 1], cfg.eps)
        if e - s >= 2:
            dyn, g_dyn_v, g_dyn_u = l_dyn_rollout(
                states.speeds, states.headings, controls, dense.dt, cfg.bounds, s, e
            )
        else:
            dyn, g_dyn_v, g_dyn_u = 0.0, np.zeros_like(cot_v), np.zeros_like(cot_u)

        frame_total = -obj + cfg.alpha * col + cfg.beta * bh + cfg.gamma * dyn
        out.l_obj += obj
        out.l_col += col
        out.l_bh += bh
        out.l_dyn += dyn
        out.frames.append(frame_total)

        if with_grad:
            if np.any(cot_modes):
                g_x = model_pullback(predictor, scene, -cot_modes)
                cot_p[s : e + 1 : problem.factor] += g_x[adv]
            cot_p[s : e + 1] += cfg.alpha * g_col + cfg.beta * g_bh
            cot_v += cfg.gamma * g_dyn_v
            cot_u += cfg.gamma * g_dyn_u

    out.total = float(np.sum(out.frames))
    if not with_grad:
        return out, None
    return out, controls_gradient(dense, cot_p, cot_v) + cot_u


def controls_gradient(dense: DenseTrajectory, cot_positions: np.ndarray, cot_speeds: Optional[np.ndarray] = None) -> np.ndarray:
    """Обратный проход через прокатку с фиксированным якорем"""
    pullback = rollout_pullback if dense.anchored_at == "start" else rollout_reverse_pullback
    return pullback(dense.anchor, dense.controls, cot_positions, cot_speeds=cot_speeds).controls


def adv_loss(
    scene: Scene,
    predictor: PredictionModel,
    dense: DenseTrajectory,
    cfg: AttackConfig,
    problem: Optional[AttackProblem] = None,
) -> Tuple[float, Dict[str, float]]:
    """
    L_adv = −l_obj + α·l_col + β·l_bh + γ·l_dyn для D_adv атакующего агента сцены

    Returns:
        (итог, слагаемые по именам, включая "total")
    """
    problem = problem or build_problem(scene, cfg, lp=1)
    breakdown, _ = adv_loss_and_grad(problem, predictor, dense, cfg, with_grad=False)
    return breakdown.total, breakdown.as_dict()
