"""
PGD по управлениям: одно- и многокадровая атака с проекцией на границы и ε-шар узлов
"""

import logging
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import torch

from ..core.errors import InvalidInputError, OptimizationDivergedError
from ..dynamics import project_controls
from ..predictors.base import PredictionModel, Scene
from ..reconstruction import DenseTrajectory
from ..utils.constants import MAX_FEASIBILITY_HALVINGS, RESTORE_LR, RESTORE_MARGIN, RESTORE_STEPS
from ..utils.decorators import timed_stage
from .config import AttackConfig, AttackResult
from .objective import AttackProblem, LossBreakdown, adv_loss_and_grad, build_problem, controls_gradient

logger = logging.getLogger(__name__)

LossFn = Callable[[DenseTrajectory, bool], Tuple[LossBreakdown, Optional[np.ndarray]]]


def project(dense: DenseTrajectory, values: np.ndarray, cfg: AttackConfig) -> DenseTrajectory:
    """Проекция управлений на границы при фиксированном якоре"""
    projected = project_controls(
        values, dense.anchor.speed, dense.dt, cfg.bounds, reverse=dense.anchored_at == "end"
    )
    return dense.with_controls(projected)


def feasible_step(
    problem: AttackProblem,
    current: DenseTrajectory,
    proposal: np.ndarray,
    cfg: AttackConfig,
) -> DenseTrajectory:
    """
    Шаг к предложенным управлениям, укороченный делением пополам до попадания узлов в ε-шар

    При s = 0 остаётся текущая (допустимая) траектория.
    """
    base = current.controls.values
    scale = 1.0
    for _ in range(MAX_FEASIBILITY_HALVINGS + 1):
        candidate = project(current, base + scale * (proposal - base), cfg)
        if problem.knot_deviation(candidate) <= cfg.eps:
            return candidate
        scale *= 0.5
    return current


def restore_ball(problem: AttackProblem, start: DenseTrajectory, cfg: AttackConfig) -> Optional[DenseTrajectory]:
    """
    Возврат начальной D_adv в ε-шар узлов

    Adam по нормированным управлениям на сумме квадратов выхода узлов за
    RESTORE_MARGIN·ε, после каждого шага - проекция на границы динамики.

    Returns:
        Траектория с отклонением узлов ≤ ε или None, если шар не достигнут за RESTORE_STEPS шагов
    """
    if problem.knot_deviation(start) <= cfg.eps:
        return start

    span = cfg.bounds.control_span
    target = problem.original_knots
    margin = RESTORE_MARGIN * cfg.eps
    weights = torch.tensor(start.controls.values / span, dtype=torch.float64, requires_grad=True)
    optimizer = torch.optim.Adam([weights], lr=RESTORE_LR)
    current = start

    for step in range(1, RESTORE_STEPS + 1):
        offset = problem.knots(current) - target
        dist = np.linalg.norm(offset, axis=1)
        excess = np.maximum(dist - margin, 0.0)
        cot = np.zeros_like(current.positions)
        cot[:: problem.factor] = (2.0 * excess / np.where(dist > 0, dist, 1.0))[:, None] * offset

        optimizer.zero_grad()
        weights.grad = torch.from_numpy(controls_gradient(current, cot) * span)
        optimizer.step()
        with torch.no_grad():
            current = project(current, weights.detach().numpy() * span, cfg)
            weights.copy_(torch.from_numpy(current.controls.values / span))
        if problem.knot_deviation(current) <= cfg.eps:
            logger.debug(f"{problem.scene.scene_id}: D_adv возвращена в ε-шар за {step} шагов")
            return current
    return None


def unperturbed_result(
    problem: AttackProblem,
    start: DenseTrajectory,
    breakdown: LossBreakdown,
    method: str,
) -> AttackResult:
    """Результат без возмущения: история атакующего агента остаётся исходной"""
    logger.warning(
        f"⚠️ {problem.scene.scene_id}: траектория в границах динамики не входит в ε-шар "
        f"(невязка {problem.knot_deviation(start):.3f} м), история не изменена"
    )
    return AttackResult(
        dense=start,
        history=problem.original_knots.copy(),
        controls=start.controls,
        benign=problem.benign,
        trace=[breakdown.total],
        term_trace=[breakdown.as_dict()],
        method=method,
        variant="opt-end" if start.anchored_at == "end" else "opt-init",
        queries=1,
        feasible=False,
    )


def run_descent(
    problem: AttackProblem,
    start: DenseTrajectory,
    loss_fn: LossFn,
    cfg: AttackConfig,
    propose: Callable[[DenseTrajectory, Optional[np.ndarray], int], np.ndarray],
    method: str,
    use_gradient: bool = True,
    from_start: bool = False,
) -> AttackResult:
    """
    Общий цикл оптимизации с отслеживанием лучшей итерации

    Начальная D_adv сначала возвращается в ε-шар; если это невозможно,
    результат помечается недопустимым и история не меняется.

    Args:
        problem: Данные атаки
        start: Начальная D_adv
        loss_fn: Функция потерь (D, with_grad) → (слагаемые, градиент)
        cfg: Конфигурация
        propose: Предложение новых управлений (текущая D, градиент, номер шага)
        method: Имя метода для результата
        use_gradient: Нужен ли градиент предложению
        from_start: Каждое предложение отсчитывается от start (случайный поиск)
    """
    restored = restore_ball(problem, start, cfg)
    if restored is None:
        return unperturbed_result(problem, start, loss_fn(start, False)[0], method)
    start = restored
    current = start
    breakdown, grad = loss_fn(current, use_gradient)
    trace = [breakdown.total]
    terms = [breakdown.as_dict()]
    best_step, best, best_loss = 0, current, breakdown.total
    queries = 1

    for step in range(1, cfg.pgd_steps + 1):
        proposal = propose(current, grad, step)
        current = feasible_step(problem, start if from_start else current, proposal, cfg)
        breakdown, grad = loss_fn(current, use_gradient)
        queries += 1
        if not np.isfinite(breakdown.total):
            raise OptimizationDivergedError(f"{problem.scene.scene_id}: неконечная L_adv на шаге {step}", trace)
        trace.append(breakdown.total)
        terms.append(breakdown.as_dict())
        if breakdown.total < best_loss:
            best_step, best, best_loss = step, current, breakdown.total
        logger.debug(
            f"{method} шаг {step}: L={breakdown.total:.5f} l_obj={breakdown.l_obj:.4f} "
            f"l_col={breakdown.l_col:.4f} l_bh={breakdown.l_bh:.4f} l_dyn={breakdown.l_dyn:.4f}"
        )

    violations = best.params().violations(cfg.bounds) if len(best.states) >= 3 else {}
    return AttackResult(
        dense=best,
        history=problem.knots(best).copy(),
        controls=best.controls,
        benign=problem.benign,
        trace=trace,
        term_trace=terms,
        violations=violations,
        best_step=best_step,
        method=method,
        variant="opt-end" if start.anchored_at == "end" else "opt-init",
        queries=queries,
    )


def pgd_attack(problem: AttackProblem, predictor: PredictionModel, cfg: AttackConfig) -> AttackResult:
    """Знаковый PGD по управлениям от начальной D_adv варианта cfg.variant"""
    step_sizes = cfg.step_sizes()

    def loss_fn(dense: DenseTrajectory, with_grad: bool):
        return adv_loss_and_grad(problem, predictor, dense, cfg, with_grad)

    def propose(current: DenseTrajectory, grad: Optional[np.ndarray], _step: int) -> np.ndarray:
        return current.controls.values - step_sizes[None, :] * np.sign(grad)

    return run_descent(problem, problem.initial_dense(cfg.variant), loss_fn, cfg, propose, "pgd")


@timed_stage("attack_single")
def attack_single(
    scene: Scene,
    predictor: PredictionModel,
    cfg: AttackConfig,
    benign: Optional[DenseTrajectory] = None,
) -> AttackResult:
    """
    Однокадровая атака (Opt-init или Opt-end) на историю атакующего агента

    Args:
        scene: Сцена
        predictor: Модель предсказания
        cfg: Конфигурация атаки (cfg.lp игнорируется)
        benign: Уже реконструированная D*_orig

    Returns:
        Результат с лучшей итерацией PGD
    """
    problem = build_problem(scene, cfg, lp=1, benign=benign)
    result = pgd_attack(problem, predictor, cfg)
    logger.info(
        f"🎯 {scene.scene_id}: {cfg.variant}, L {result.trace[0]:.4f} → {result.best_loss:.4f} "
        f"(лучший шаг {result.best_step}/{cfg.pgd_steps})"
    )
    return result


@timed_stage("attack_sequential")
def attack_sequential(
    scene: Scene,
    predictor: PredictionModel,
    cfg: AttackConfig,
    benign: Optional[DenseTrajectory] = None,
) -> AttackResult:
    """
    Последовательная атака: одна траектория длины H + L_p − 1, каждое окно длины H которой
    подаётся на вход предсказателю; потери кадров суммируются

    Raises:
        InvalidInputError: Наблюдённых шагов меньше H + L_p − 1 (H ≥ 2)
    """
    if scene.history_len < cfg.lp + 1:
        raise InvalidInputError(
            f"{scene.scene_id}: для L_p={cfg.lp} нужно не менее {cfg.lp + 1} наблюдённых шагов"
        )
    problem = build_problem(scene, cfg, lp=cfg.lp, benign=benign)
    result = pgd_attack(problem, predictor, cfg)
    logger.info(
        f"🎯 {scene.scene_id}: последовательная атака L_p={cfg.lp}, L {result.trace[0]:.4f} → {result.best_loss:.4f}"
    )
    return result


def frame_losses(scene: Scene, predictor: PredictionModel, result: AttackResult, cfg: AttackConfig) -> Dict[str, object]:
    """Потери по кадрам для результата последовательной атаки"""
    problem = build_problem(scene, cfg, lp=cfg.lp, benign=result.benign)
    breakdown, _ = adv_loss_and_grad(problem, predictor, result.dense, cfg, with_grad=False)
    return {"frames": breakdown.frames, "total": breakdown.total}
