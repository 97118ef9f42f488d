"""
Базовые линии атаки: случайный поиск в тех же границах и прямое возмущение узлов без динамики
"""

import logging
from typing import Optional

import numpy as np

from ..dynamics import inverse
from ..predictors.base import PredictionModel, Scene, model_pullback, predict
from ..reconstruction import DenseTrajectory, linear_interpolate
from .config import AttackConfig, AttackResult
from .objective import AttackWindow, objective_cotangent, adv_loss_and_grad, build_problem
from .pgd import run_descent

logger = logging.getLogger(__name__)


def attack_random(
    scene: Scene,
    predictor: PredictionModel,
    cfg: AttackConfig,
    benign: Optional[DenseTrajectory] = None,
) -> AttackResult:
    """
    Случайный поиск по управлениям с тем же ε-шаром, границами и числом запросов, что у PGD

    Каждый кандидат - равномерный шум амплитуды pgd_step_scale·(ub − lb) вокруг D*_orig,
    спроецированный на границы и ε-шар; выбирается лучший по L_adv.
    """
    problem = build_problem(scene, cfg, lp=1, benign=benign)
    rng = np.random.default_rng(cfg.seed)
    amplitude = cfg.pgd_step_scale * cfg.bounds.control_span
    start = problem.initial_dense(cfg.variant)

    def loss_fn(dense: DenseTrajectory, with_grad: bool):
        return adv_loss_and_grad(problem, predictor, dense, cfg, with_grad=False)

    def propose(current: DenseTrajectory, _grad, _step: int) -> np.ndarray:
        noise = rng.uniform(-1.0, 1.0, size=start.controls.values.shape) * amplitude[None, :]
        return start.controls.values + noise

    result = run_descent(problem, start, loss_fn, cfg, propose, "random", use_gradient=False, from_start=True)
    logger.info(f"🎲 {scene.scene_id}: случайный поиск, лучший L={result.best_loss:.4f}")
    return result


def _clip_to_ball(deviation: np.ndarray, radius: float) -> np.ndarray:
    norms = np.linalg.norm(deviation, axis=1, keepdims=True)
    factor = np.minimum(1.0, radius / np.where(norms > 0, norms, 1.0))
    return deviation * factor


def attack_search(
    scene: Scene,
    predictor: PredictionModel,
    cfg: AttackConfig,
) -> AttackResult:
    """
    Возмущение узлов истории знаковым градиентом −l_obj в ε-шаре без модели динамики

    Реалистичность не обеспечивается: флаги нарушений считаются обратной моделью
    по разреженной истории и могут быть истинными.
    """
    adv = scene.adv_index
    original = scene.histories[adv]
    budget = cfg.step_budget or max(cfg.pgd_steps, 1)
    step = 2.0 * cfg.eps * cfg.pgd_step_scale / budget

    def evaluate(history: np.ndarray, with_grad: bool):
        candidate = scene.with_agent_history(adv, history)
        prediction = predict(predictor, candidate)
        obj, cot = objective_cotangent(AttackWindow(candidate, 0, 0, 0), prediction, cfg)
        grad = model_pullback(predictor, candidate, -cot)[adv] if with_grad and np.any(cot) else None
        return obj, grad

    history = original.copy()
    obj, grad = evaluate(history, True)
    trace, terms = [-obj], [{"l_obj": obj, "total": -obj}]
    best_step, best = 0, history.copy()
    for i in range(1, cfg.pgd_steps + 1):
        if grad is not None:
            history = original + _clip_to_ball(history - step * np.sign(grad) - original, cfg.eps)
        obj, grad = evaluate(history, True)
        trace.append(-obj)
        terms.append({"l_obj": obj, "total": -obj})
        if trace[-1] < trace[best_step]:
            best_step, best = i, history.copy()

    dense = linear_interpolate(best, cfg.factor, scene.dt)
    violations = inverse(best, scene.dt).violations(cfg.bounds) if best.shape[0] >= 3 else {}
    logger.info(f"🔍 {scene.scene_id}: поиск по узлам, l_obj={-trace[best_step]:.4f}")
    return AttackResult(
        dense=dense,
        history=best,
        controls=dense.controls,
        benign=linear_interpolate(original, cfg.factor, scene.dt),
        trace=trace,
        term_trace=terms,
        violations=violations,
        best_step=best_step,
        method="search",
        variant="knots",
        queries=cfg.pgd_steps + 1,
    )
