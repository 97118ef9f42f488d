"""
Сборка отчёта: метрики сцены до и после атаки, разбиение Motion/Interaction,
статистика скорости и кривизны сцен и агрегирование по набору
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import InvalidInputError
from ..dynamics import DynamicBounds, inverse
from ..planning.map_model import MapModel
from ..predictors.base import Prediction, Scene
from .prediction import MetricsConfig, displacement_errors, miss_flags, offroad_flags, result_violations
from .sensitivity import agent_sensitivities, delta_sensitivity, planning_aware
from .similarity import SIMILARITY_NAMES, trajectory_similarity

logger = logging.getLogger(__name__)

HEADLINE_METRICS = ("ADE", "FDE", "MR", "ORR")
SPEED_BIN_EDGES = (2.0, 5.0, 10.0)
CURVATURE_BIN_EDGES = (0.01, 0.05)


def motion_interaction_split(scene: Scene, benign: Prediction, adversarial: Prediction) -> Dict[str, Any]:
    """
    Изменение предсказаний под атакой: Motion - у атакующего агента,
    Interaction - среднее по остальным агентам (NaN и флаг при N = 1)
    """
    ade, fde = displacement_errors(adversarial.most_likely(), benign.most_likely())
    adv = scene.adv_index
    others = scene.other_indices
    out: Dict[str, Any] = {
        "motion_ADE": float(ade[adv]),
        "motion_FDE": float(fde[adv]),
        "interaction_defined": bool(others),
    }
    if others:
        out["interaction_ADE"] = float(np.mean(ade[others]))
        out["interaction_FDE"] = float(np.mean(fde[others]))
    else:
        out["interaction_ADE"] = out["interaction_FDE"] = float("nan")
    return out


def scene_stats(scene: Scene) -> Tuple[float, float]:
    """Средние по агентам значения средних |v| и |κ| историй (обратная модель)"""
    if scene.history_len < 3:
        raise InvalidInputError(f"{scene.scene_id}: для статистики нужна история не короче 3 шагов")
    speeds, curvatures = [], []
    for history in scene.histories:
        params = inverse(history, scene.dt)
        speeds.append(float(np.mean(np.abs(params.speeds))))
        curvatures.append(float(np.mean(np.abs(params.curvature))))
    return float(np.mean(speeds)), float(np.mean(curvatures))


def _bin_label(value: float, edges: Sequence[float]) -> str:
    index = int(np.digitize([value], edges)[0])
    lo = "0" if index == 0 else f"{edges[index - 1]:g}"
    hi = "inf" if index == len(edges) else f"{edges[index]:g}"
    return f"[{lo}, {hi})"


def bin_scenes(
    stats: Dict[str, Tuple[float, float]],
    speed_edges: Sequence[float] = SPEED_BIN_EDGES,
    curvature_edges: Sequence[float] = CURVATURE_BIN_EDGES,
) -> Dict[str, Dict[str, List[str]]]:
    """Разбиение сцен по интервалам средней скорости и кривизны (идентификаторы отсортированы)"""
    bins: Dict[str, Dict[str, List[str]]] = {"speed": {}, "curvature": {}}
    for scene_id in sorted(stats):
        speed, curvature = stats[scene_id]
        bins["speed"].setdefault(_bin_label(speed, speed_edges), []).append(scene_id)
        bins["curvature"].setdefault(_bin_label(curvature, curvature_edges), []).append(scene_id)
    return bins


@dataclass
class SceneEval:
    """Метрики одной сцены"""

    scene_id: str
    benign: Dict[str, float] = field(default_factory=dict)
    adversarial: Dict[str, float] = field(default_factory=dict)
    delta_sensitivity: float = 0.0
    similarity: Dict[str, float] = field(default_factory=dict)
    motion_interaction: Dict[str, Any] = field(default_factory=dict)
    violating: bool = False
    speed: float = 0.0
    curvature: float = 0.0
    flags: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SceneEval":
        return cls(**data)


def _scene_metrics(
    scene: Scene,
    prediction: Prediction,
    map_model: Optional[MapModel],
    cfg: MetricsConfig,
    ego_plan: Optional[np.ndarray],
    flags: List[str],
    label: str,
) -> Dict[str, float]:
    ade, fde = displacement_errors(prediction, scene.futures)
    per_agent = {"ADE": ade, "FDE": fde, "MR": miss_flags(prediction, scene.futures, cfg.miss_threshold).astype(float)}
    if map_model is not None and map_model.drivable:
        per_agent["ORR"] = offroad_flags(prediction, map_model).astype(float)
    adv = scene.adv_index
    out = {name: float(values[adv]) for name, values in per_agent.items()}
    weights = agent_sensitivities(scene, prediction.most_likely(), ego_plan, cfg.interaction_cost())
    weighted = planning_aware(per_agent, weights)
    if weighted.unweighted:
        flags.append(f"{label}: PI-метрики невзвешенные")
    out.update(weighted.values)
    return out


def evaluate_scene(
    scene: Scene,
    benign: Prediction,
    adversarial: Prediction,
    adversarial_history: np.ndarray,
    map_model: Optional[MapModel] = None,
    cfg: Optional[MetricsConfig] = None,
    attack_result=None,
    bounds: Optional[DynamicBounds] = None,
    ego_plan: Optional[np.ndarray] = None,
) -> SceneEval:
    """
    Метрики сцены: ADE/FDE/MR/ORR атакующего агента до и после атаки, PI-метрики
    по всем агентам, ΔSensitivity, сходство траекторий, Motion/Interaction, флаг нарушения

    Args:
        scene: Исходная сцена
        benign: Предсказание на исходной истории
        adversarial: Предсказание на атакованной истории
        adversarial_history: Атакованная история атакующего агента (H×2)
        map_model: Карта для ORR (без карты ORR не считается)
        cfg: Пороги метрик
        attack_result: Результат атаки (сходство по плотным траекториям и флаг VR)
        bounds: Границы динамики для VR
        ego_plan: План эго для весов чувствительности (по умолчанию записанное будущее эго)
    """
    cfg = cfg or MetricsConfig()
    flags: List[str] = []
    attacked_scene = scene.with_agent_history(scene.adv_index, adversarial_history)
    out = SceneEval(scene_id=scene.scene_id, flags=flags)
    out.benign = _scene_metrics(scene, benign, map_model, cfg, ego_plan, flags, "benign")
    out.adversarial = _scene_metrics(attacked_scene, adversarial, map_model, cfg, ego_plan, flags, "adversarial")
    out.delta_sensitivity = delta_sensitivity(
        scene,
        benign.most_likely(),
        adversarial.most_likely(),
        attacked_scene.histories,
        cfg.sensitivity_radius,
        cfg.interaction_cost(),
    )
    if attack_result is not None:
        out.similarity = trajectory_similarity(attack_result.benign.positions, attack_result.dense.positions)
        out.violating = result_violations(attack_result, bounds or DynamicBounds())
    else:
        out.similarity = trajectory_similarity(scene.histories[scene.adv_index], adversarial_history)
    out.motion_interaction = motion_interaction_split(scene, benign, adversarial)
    if not out.motion_interaction["interaction_defined"]:
        flags.append("interaction: в сцене один агент")
    if scene.history_len >= 3:
        out.speed, out.curvature = scene_stats(scene)
    return out


def _nanmean(values: List[float]) -> float:
    array = np.asarray([v for v in values if v is not None], dtype=float)
    if array.size == 0 or np.all(np.isnan(array)):
        return float("nan")
    return float(np.nanmean(array))


@dataclass
class EvalReport:
    """Отчёт по набору сцен: записи по сценам (по возрастанию id) и агрегаты"""

    scenes: List[SceneEval] = field(default_factory=list)
    aggregate: Dict[str, Any] = field(default_factory=dict)
    failures: List[Dict[str, Any]] = field(default_factory=list)
    bins: Dict[str, Dict[str, List[str]]] = field(default_factory=dict)

    @property
    def partial(self) -> bool:
        return bool(self.failures)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "partial": self.partial,
            "aggregate": self.aggregate,
            "bins": self.bins,
            "scenes": [s.to_dict() for s in self.scenes],
            "failures": self.failures,
        }


def _mean_dicts(dicts: List[Dict[str, float]]) -> Dict[str, float]:
    names = sorted({k for d in dicts for k, v in d.items() if isinstance(v, (int, float)) and not isinstance(v, bool)})
    return {name: _nanmean([d.get(name) for d in dicts]) for name in names}


def aggregate(evals: Sequence[SceneEval], failures: Sequence[Dict[str, Any]] = ()) -> EvalReport:
    """
    Агрегирование: средние метрики по сценам, VR, средняя ΔSensitivity, средние
    меры сходства и Motion/Interaction, разбиение по скорости и кривизне
    """
    ordered = sorted(evals, key=lambda e: e.scene_id)
    report = EvalReport(scenes=list(ordered), failures=sorted(failures, key=lambda f: str(f.get("scene_id"))))
    if not ordered:
        report.aggregate = {"scenes": 0}
        return report
    report.aggregate = {
        "scenes": len(ordered),
        "benign": _mean_dicts([e.benign for e in ordered]),
        "adversarial": _mean_dicts([e.adversarial for e in ordered]),
        "VR": float(np.mean([e.violating for e in ordered])),
        "delta_sensitivity": _nanmean([e.delta_sensitivity for e in ordered]),
        "similarity": {n: _nanmean([e.similarity.get(n) for e in ordered]) for n in SIMILARITY_NAMES},
        "motion_interaction": _mean_dicts([e.motion_interaction for e in ordered]),
    }
    report.bins = bin_scenes({e.scene_id: (e.speed, e.curvature) for e in ordered})
    return report
