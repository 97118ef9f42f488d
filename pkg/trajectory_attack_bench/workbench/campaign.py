"""
Кампании: реконструкция → атака → оценка по сценам с пулом потоков, возобновление
по хранилищу результатов, перенос между моделями, аугментация и замкнутый цикл
"""

import asyncio
import json
import logging
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..attack import (
    AttackConfig,
    AttackResult,
    attack_random,
    attack_search,
    attack_sequential,
    attack_single,
    generate_augmentation,
)
from ..config import CampaignConfig, PredictorSettings
from ..core.errors import ConfigError, TransferUndefinedError, classify_error, failure_record
from ..metrics import (
    TRANSFER_METRICS,
    EvalReport,
    MetricsConfig,
    SceneEval,
    aggregate,
    evaluate_scene,
    success_degree,
    transfer_rate,
)
from ..observability import CampaignMetrics, SceneTask
from ..planning import MapModel, SimOutcome, adversarial_fixture_set, build_planner, simulate
from ..predictors import (
    BridgePredictor,
    OraclePredictor,
    PredictionModel,
    Scene,
    build_surrogate,
    load_model,
    predict,
)
from ..reconstruction import reconstruct, reconstruct_with_trace
from ..utils.constants import REPORT_FORMAT
from .plots import plot_attack, plot_metric_bars, stamp
from .result_store import ResultStore, SceneRecord
from .scenario_io import ScenarioFile, load_map, load_scenario

logger = logging.getLogger(__name__)

REPORT_FILE = "report.json"
METRICS_FILE = "metrics.prom"
SIDECAR_DIR = "scenes"
PLOTS_DIR = "plots"


def build_predictor(settings: PredictorSettings) -> PredictionModel:
    """Модель по настройкам: мост, сохранённый файл, оракул или встроенный суррогат"""
    if settings.bridge_cmd:
        return BridgePredictor(
            settings.bridge_cmd,
            timeout=settings.bridge_timeout,
            allow_finite_difference=settings.allow_finite_difference,
            num_modes=settings.spec.num_modes,
        )
    if settings.model_path:
        return load_model(settings.model_path)
    if settings.kind == "oracle":
        return OraclePredictor()
    return build_surrogate(settings.spec.model_copy(update={"kind": settings.kind}))


def predictor_label(settings: PredictorSettings) -> str:
    """Имя модели в отчётах; не зависит от того, построена ли модель"""
    if settings.bridge_cmd:
        return "bridge"
    if settings.model_path:
        return f"model:{Path(settings.model_path).name}"
    return settings.kind


def run_attack(
    scene: Scene,
    predictor: PredictionModel,
    cfg: AttackConfig,
    method: str = "pgd",
    benign=None,
) -> AttackResult:
    if method == "random":
        return attack_random(scene, predictor, cfg, benign)
    if method == "search":
        return attack_search(scene, predictor, cfg)
    if cfg.lp > 1:
        return attack_sequential(scene, predictor, cfg, benign)
    return attack_single(scene, predictor, cfg, benign)


def adversarial_history(scene: Scene, result: AttackResult) -> np.ndarray:
    """X_adv лучшей итерации; при лучшем шаге 0 история атакующего агента не меняется"""
    if result.best_step == 0:
        return scene.histories[scene.adv_index].copy()
    return np.asarray(result.history, dtype=float)


def evaluation_window(scene: Scene, lp: int) -> Scene:
    """Последнее окно длины H_obs − L_p + 1, на котором оценивается предсказание"""
    offset = lp - 1
    if offset <= 0:
        return scene
    return scene.with_histories(scene.histories[:, offset:].copy())


@contextmanager
def _stage(metrics: Optional[CampaignMetrics], task: Optional[SceneTask], name: str) -> Iterator[None]:
    started = time.perf_counter()
    try:
        yield
    finally:
        if metrics is not None and task is not None:
            metrics.record_stage(task, name, time.perf_counter() - started)


@dataclass(eq=False)
class SceneOutcome:
    evaluation: SceneEval
    result: AttackResult
    arrays: Dict[str, np.ndarray] = field(default_factory=dict)

    def extras(self) -> Dict[str, Any]:
        r = self.result
        return {
            "method": r.method,
            "variant": r.variant,
            "best_step": r.best_step,
            "best_loss": r.best_loss,
            "best_terms": r.best_terms,
            "queries": r.queries,
            "feasible": r.feasible,
        }


def process_scene(
    scene: Scene,
    predictor: PredictionModel,
    attack_cfg: AttackConfig,
    metrics_cfg: Optional[MetricsConfig] = None,
    map_model: Optional[MapModel] = None,
    method: str = "pgd",
    metrics: Optional[CampaignMetrics] = None,
    task: Optional[SceneTask] = None,
) -> SceneOutcome:
    """
    Конвейер одной сцены

    Args:
        scene: Сцена (H_obs = H + L_p − 1 наблюдённых шагов для последовательной атаки)
        predictor: Модель предсказания
        attack_cfg: Конфигурация атаки
        metrics_cfg: Пороги метрик
        map_model: Карта для ORR
        method: pgd, random или search
    """
    adv = scene.adv_index
    benign = None
    if method != "search":
        with _stage(metrics, task, "reconstruct"):
            benign, _ = reconstruct(scene.histories[adv], attack_cfg.recon_config(), scene.dt)
    with _stage(metrics, task, "attack"):
        result = run_attack(scene, predictor, attack_cfg, method, benign)

    window = evaluation_window(scene, attack_cfg.lp if method == "pgd" else 1)
    offset = scene.history_len - window.history_len
    adv_history = adversarial_history(scene, result)[offset:]
    with _stage(metrics, task, "evaluate"):
        benign_pred = predict(predictor, window)
        adv_pred = predict(predictor, window.with_agent_history(adv, adv_history))
        evaluation = evaluate_scene(
            window,
            benign_pred,
            adv_pred,
            adv_history,
            map_model=map_model,
            cfg=metrics_cfg,
            attack_result=result,
            bounds=attack_cfg.bounds,
        )
    arrays = {
        "histories": window.histories,
        "futures": window.futures,
        "adv_index": np.array(adv),
        "adv_history": adv_history,
        "benign_dense": result.benign.positions,
        "adv_dense": result.dense.positions,
        "benign_pred": benign_pred.most_likely(),
        "adv_pred": adv_pred.most_likely(),
        "trace": np.asarray(result.trace, dtype=float),
    }
    return SceneOutcome(evaluation, result, arrays)


def collect_report(store: ResultStore, scene_ids: Sequence[str], config_hash: str) -> EvalReport:
    """Отчёт, пересчитанный из сохранённых записей сцен"""
    evals, failures = [], []
    for record in store.records_for(list(scene_ids), config_hash):
        if record.ok and record.evaluation is not None:
            evals.append(SceneEval.from_dict(record.evaluation))
        else:
            failures.append(dict(record.failure or {}, scene_id=record.scene_id))
    return aggregate(evals, failures)


def write_json(path: Path, document: Mapping[str, Any]) -> Path:
    """JSON с сортировкой ключей: одинаковые входы дают одинаковые байты"""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


@dataclass(eq=False)
class CampaignRun:
    """Итог кампании"""

    report: EvalReport
    document: Dict[str, Any]
    out_dir: Path
    metrics: CampaignMetrics
    simulation: List[SimOutcome] = field(default_factory=list)

    @property
    def report_path(self) -> Path:
        return self.out_dir / REPORT_FILE

    @property
    def partial(self) -> bool:
        return self.report.partial


class Campaign:
    """Прогон набора сцен в пуле потоков с записью результатов по мере готовности"""

    def __init__(
        self,
        cfg: CampaignConfig,
        scenario: ScenarioFile,
        predictor: Optional[PredictionModel] = None,
        map_model: Optional[MapModel] = None,
    ):
        self.cfg = cfg
        self.scenario = scenario
        self.predictor = predictor
        self.map_model = map_model if map_model is not None else scenario.map_model
        self.attack_cfg = cfg.effective_attack()
        self.config_hash = cfg.config_hash()
        self.seed = cfg.campaign.seed
        self.out_dir = Path(cfg.campaign.out)
        self.store = ResultStore(str(self.out_dir))
        self.metrics = CampaignMetrics(self.config_hash, self.seed)
        self.label = stamp(self.config_hash, self.seed)

    @property
    def workers(self) -> int:
        return self.cfg.campaign.workers or os.cpu_count() or 1

    def _sidecar(self, scene_id: str, arrays: Dict[str, np.ndarray]) -> str:
        relative = f"{SIDECAR_DIR}/{scene_id}.npz"
        path = self.out_dir / relative
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("wb") as fh:
            np.savez(fh, config_hash=np.array(self.config_hash), seed=np.array(self.seed), **arrays)
        return relative

    def run_scene(self, scene: Scene) -> SceneRecord:
        """Обработка сцены; сбой записывается, а не пробрасывается"""
        task = self.metrics.start_scene(scene.scene_id)
        try:
            outcome = process_scene(
                scene,
                self.predictor,
                self.attack_cfg,
                self.cfg.metrics,
                self.map_model,
                self.cfg.campaign.method,
                self.metrics,
                task,
            )
            record = SceneRecord(
                scene_id=scene.scene_id,
                status="ok",
                config_hash=self.config_hash,
                seed=self.seed,
                evaluation=outcome.evaluation.to_dict(),
                sidecar=self._sidecar(scene.scene_id, outcome.arrays),
                extras=outcome.extras(),
            )
            self.metrics.complete_scene(task, True)
        except Exception as e:
            logger.error(f"❌ Сцена {scene.scene_id}: {e}", exc_info=True)
            record = SceneRecord(
                scene_id=scene.scene_id,
                status="failed",
                config_hash=self.config_hash,
                seed=self.seed,
                failure=failure_record(e, {"scene_id": scene.scene_id}),
            )
            self.metrics.complete_scene(task, False, classify_error(e).value)
        self.store.append(record)
        return record

    async def _run_pending(self, pending: Sequence[Scene]) -> None:
        semaphore = asyncio.Semaphore(self.workers)

        async def run_one(scene: Scene) -> None:
            async with semaphore:
                await asyncio.to_thread(self.run_scene, scene)

        await asyncio.gather(*(run_one(scene) for scene in pending))

    def pending(self) -> List[Scene]:
        done = self.store.completed_ids(self.config_hash)
        scenes = sorted(self.scenario.scenes, key=lambda s: s.scene_id)
        pending = [s for s in scenes if s.scene_id not in done]
        skipped = len(scenes) - len(pending)
        self.metrics.record_skipped(skipped)
        if skipped:
            logger.info(f"🔄 Возобновление: {skipped} сцен уже обработаны, осталось {len(pending)}")
        return pending

    def execute(self, limit: Optional[int] = None) -> None:
        """Обработка незавершённых сцен (не более limit)"""
        if self.predictor is None:
            raise ConfigError("кампании не передана модель предсказания")
        pending = self.pending()
        if limit is not None:
            pending = pending[:limit]
        if not pending:
            return
        logger.info(f"🚀 Кампания: {len(pending)} сцен, потоков {self.workers}")
        asyncio.run(self._run_pending(pending))

    def document(self, report: EvalReport, simulation: Sequence[SimOutcome] = ()) -> Dict[str, Any]:
        document: Dict[str, Any] = {
            "format": REPORT_FORMAT,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "method": self.cfg.campaign.method,
            "variant": self.attack_cfg.variant,
            "predictor": predictor_label(self.cfg.predictor),
            "scenario": self.scenario.path.name if self.scenario.path else None,
            **report.to_dict(),
        }
        if simulation:
            document["simulation"] = [_outcome_summary(o) for o in simulation]
        return document

    def plot(self, report: EvalReport) -> List[Path]:
        plots_dir = self.out_dir / PLOTS_DIR
        paths: List[Path] = []
        if report.scenes:
            paths += plot_metric_bars(report.aggregate, plots_dir / "metrics", self.label)
        records = {r.scene_id: r for r in self.store.records_for([s.scene_id for s in report.scenes], self.config_hash)}
        for evaluation in report.scenes[: self.cfg.campaign.plot_scenes]:
            record = records.get(evaluation.scene_id)
            if record is None or record.sidecar is None:
                continue
            with np.load(self.out_dir / record.sidecar, allow_pickle=False) as data:
                arrays = {name: data[name] for name in data.files}
            paths += plot_attack(evaluation.scene_id, arrays, plots_dir / evaluation.scene_id, self.label)
        return paths

    def finish(self, simulation: Sequence[SimOutcome] = ()) -> CampaignRun:
        """Отчёт из хранилища, графики и метрики исполнения"""
        report = collect_report(self.store, self.scenario.scene_ids, self.config_hash)
        document = self.document(report, simulation)
        write_json(self.out_dir / REPORT_FILE, document)
        self.plot(report)
        self.metrics.write(self.out_dir / METRICS_FILE)
        if report.partial:
            logger.warning(f"⚠️ Кампания частичная: {len(report.failures)} сбойных сцен")
        logger.info(f"💾 Отчёт: {self.out_dir / REPORT_FILE}")
        return CampaignRun(report, document, self.out_dir, self.metrics, list(simulation))


def _outcome_summary(outcome: SimOutcome) -> Dict[str, Any]:
    data = outcome.to_dict()
    data.pop("ego", None)
    return data


def _resolve_inputs(cfg: CampaignConfig, scenario: Optional[ScenarioFile]) -> Tuple[ScenarioFile, Optional[MapModel]]:
    if scenario is None:
        if not cfg.campaign.scenario:
            raise ConfigError("не задан файл сценария (--scenario или campaign.scenario)")
        scenario = load_scenario(cfg.campaign.scenario)
    map_model = scenario.map_model
    if cfg.campaign.map:
        map_model = load_map(cfg.campaign.map)
    return scenario, map_model


def run_campaign(
    cfg: CampaignConfig,
    scenario: Optional[ScenarioFile] = None,
    predictor: Optional[PredictionModel] = None,
) -> CampaignRun:
    """
    Полная кампания по конфигурации

    Уже обработанные с тем же хешем конфигурации сцены пропускаются; сбои сцен
    записываются, отчёт помечается частичным.

    Args:
        cfg: Конфигурация кампании
        scenario: Уже загруженный сценарий (по умолчанию cfg.campaign.scenario)
        predictor: Уже построенная модель (по умолчанию по cfg.predictor; закрывается по завершении)
    """
    scenario, map_model = _resolve_inputs(cfg, scenario)
    owns_predictor = predictor is None
    predictor = predictor or build_predictor(cfg.predictor)
    try:
        campaign = Campaign(cfg, scenario, predictor, map_model)
        campaign.execute()
        simulation = run_simulations(cfg, predictor) if cfg.campaign.simulate else []
        return campaign.finish(simulation)
    finally:
        if owns_predictor:
            predictor.close()


def run_simulations(
    cfg: CampaignConfig,
    predictor: PredictionModel,
    episodes=None,
    attacked: Sequence[bool] = (False, True),
) -> List[SimOutcome]:
    """Эпизоды набора (по умолчанию 10 встроенных) без атаки и под последовательной атакой"""
    episodes = episodes if episodes is not None else adversarial_fixture_set(cfg.campaign.seed)
    sim_cfg = cfg.effective_simulation()
    attack_cfg = cfg.effective_attack()
    planner = build_planner(cfg.planner)
    outcomes = []
    for episode in episodes:
        for under_attack in attacked:
            outcomes.append(simulate(episode, predictor, planner, sim_cfg, attack_cfg if under_attack else None))
    failed = sum(o.failed for o in outcomes if o.attacked)
    logger.info(f"🚗 Замкнутый цикл ({planner.name}): под атакой с событиями {failed}/{len(episodes)}")
    return outcomes


@dataclass
class TransferResult:
    """Коэффициенты переноса rates[источник][цель] (None, если не определён)"""

    rates: Dict[str, Dict[str, Optional[float]]] = field(default_factory=dict)
    degrees: Dict[str, Dict[str, float]] = field(default_factory=dict)
    undefined: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {"rates": self.rates, "degrees": self.degrees, "undefined": sorted(self.undefined)}


def _mean_metrics(rows: Sequence[Mapping[str, float]]) -> Dict[str, float]:
    names = [n for n in TRANSFER_METRICS if all(n in r for r in rows)]
    return {n: float(np.mean([r[n] for r in rows])) for n in names}


def transfer_matrix(
    models: Mapping[str, PredictionModel],
    scenes: Sequence[Scene],
    cfg: AttackConfig,
    map_model: Optional[MapModel] = None,
    metrics_cfg: Optional[MetricsConfig] = None,
) -> TransferResult:
    """
    Атака на каждой исходной модели и оценка её историй на всех целевых

    Степени успеха считаются по средним ADE/FDE/MR/ORR набора.
    """
    cfg = cfg.model_copy(update={"lp": 1})
    out = TransferResult()
    ordered = sorted(scenes, key=lambda s: s.scene_id)
    for source_name in sorted(models):
        source = models[source_name]
        benign_rows: Dict[str, List[Dict[str, float]]] = {t: [] for t in models}
        attacked_rows: Dict[str, List[Dict[str, float]]] = {t: [] for t in models}
        for scene in ordered:
            result = run_attack(scene, source, cfg)
            adv_history = adversarial_history(scene, result)
            attacked_scene = scene.with_agent_history(scene.adv_index, adv_history)
            for target_name, target in models.items():
                evaluation = evaluate_scene(
                    scene, predict(target, scene), predict(target, attacked_scene), adv_history, map_model, metrics_cfg
                )
                benign_rows[target_name].append(evaluation.benign)
                attacked_rows[target_name].append(evaluation.adversarial)

        means = {t: (_mean_metrics(benign_rows[t]), _mean_metrics(attacked_rows[t])) for t in models}
        out.rates[source_name], out.degrees[source_name] = {}, {}
        for target_name in sorted(models):
            out.degrees[source_name][target_name] = success_degree(*means[target_name])
            try:
                out.rates[source_name][target_name] = transfer_rate(*means[source_name], *means[target_name])
            except TransferUndefinedError as e:
                out.rates[source_name][target_name] = None
                out.undefined.append(f"{source_name}->{target_name}")
                logger.warning(f"⚠️ Перенос {source_name} → {target_name} не определён: {e}")
    return out


def augment_dataset(
    scenes: Sequence[Scene],
    directions: Sequence[str],
    cfg: AttackConfig,
) -> Tuple[List[Scene], List[AttackResult]]:
    """
    Расширение набора: исходные сцены и по одной сцене на направление с отклонённой
    историей атакующего агента (id вида «<сцена>+<направление>»)
    """
    cfg = cfg.model_copy(update={"lp": 1})
    augmented: List[Scene] = list(scenes)
    results: List[AttackResult] = []
    for scene in scenes:
        benign, _ = reconstruct(scene.histories[scene.adv_index], cfg.recon_config(), scene.dt)
        for direction in directions:
            result = generate_augmentation(scene, direction, cfg, benign)
            shifted = scene.with_agent_history(scene.adv_index, result.history)
            augmented.append(replace(shifted, scene_id=f"{scene.scene_id}+{direction}"))
            results.append(result)
    violating = sum(r.is_violating for r in results)
    if violating:
        logger.warning(f"⚠️ Аугментация: {violating} траекторий нарушают границы динамики")
    logger.info(f"🧭 Аугментация: {len(scenes)} → {len(augmented)} сцен")
    return augmented, results


@dataclass
class ReconSummary:
    scene_id: str
    knot_mse: float
    steps: int
    violating: bool
    flagged: bool

    def row(self) -> List[Any]:
        return [self.scene_id, self.knot_mse, self.steps, self.violating, self.flagged]


def reconstruct_scenes(scenes: Sequence[Scene], cfg: AttackConfig) -> List[ReconSummary]:
    """Реконструкция D* атакующего агента каждой сцены: ошибка по узлам и нарушения границ"""
    recon_cfg = cfg.recon_config()
    out = []
    for scene in sorted(scenes, key=lambda s: s.scene_id):
        result = reconstruct_with_trace(scene.histories[scene.adv_index], recon_cfg, scene.dt)
        out.append(
            ReconSummary(
                scene_id=scene.scene_id,
                knot_mse=float(result.knot_mse),
                steps=len(result.trace),
                violating=result.params.is_violating(recon_cfg.bounds),
                flagged=result.params.any_flagged,
            )
        )
    worst = max((s.knot_mse for s in out), default=0.0)
    logger.info(f"🧩 Реконструировано {len(out)} сцен, максимальная ошибка по узлам {worst:.2e} м²")
    return out
