"""
Метрики кампании: учёт сцен, длительности стадий и экспорт в текстовый формат Prometheus
"""

import logging
import time
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from prometheus_client import CollectorRegistry, Counter, Histogram, Info, write_to_textfile

logger = logging.getLogger(__name__)

STAGE_BUCKETS = (0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0, 30.0, 60.0, 300.0)


@dataclass
class SceneTask:
    """Обработка одной сцены"""

    scene_id: str
    start_time: float
    end_time: Optional[float] = None
    success: bool = False
    error_type: Optional[str] = None
    stages: Dict[str, float] = field(default_factory=dict)

    @property
    def duration(self) -> Optional[float]:
        if self.end_time:
            return self.end_time - self.start_time
        return None


class CampaignMetrics:
    """
    Счётчики кампании и собственный реестр prometheus-client

    Метрики реестра:
    - trajbench_scenes_total{status} - обработанные, пропущенные и сбойные сцены
    - trajbench_stage_seconds{stage} - длительность стадий конвейера
    - trajbench_run_info - хеш конфигурации и зерно
    """

    def __init__(self, config_hash: str = "", seed: int = 0):
        self.registry = CollectorRegistry()
        self.scenes = Counter(
            "trajbench_scenes", "Сцены кампании по итогу", ["status"], registry=self.registry
        )
        self.stage_seconds = Histogram(
            "trajbench_stage_seconds",
            "Длительность стадий конвейера",
            ["stage"],
            buckets=STAGE_BUCKETS,
            registry=self.registry,
        )
        Info("trajbench_run", "Параметры прогона", registry=self.registry).info(
            {"config_hash": config_hash, "seed": str(seed)}
        )

        self.tasks: List[SceneTask] = []
        self.total_scenes = 0
        self.successful_scenes = 0
        self.failed_scenes = 0
        self.skipped_scenes = 0
        self.error_counts: Dict[str, int] = defaultdict(int)
        self.stage_durations: Dict[str, List[float]] = defaultdict(list)

    def start_scene(self, scene_id: str) -> SceneTask:
        self.total_scenes += 1
        return SceneTask(scene_id=scene_id, start_time=time.time())

    def record_stage(self, task: SceneTask, stage: str, duration: float) -> None:
        task.stages[stage] = duration
        self.stage_durations[stage].append(duration)
        self.stage_seconds.labels(stage=stage).observe(duration)

    def complete_scene(self, task: SceneTask, success: bool, error_type: Optional[str] = None) -> None:
        task.end_time = time.time()
        task.success = success
        task.error_type = error_type
        if success:
            self.successful_scenes += 1
            self.scenes.labels(status="ok").inc()
        else:
            self.failed_scenes += 1
            self.scenes.labels(status="failed").inc()
            if error_type:
                self.error_counts[error_type] += 1
        self.tasks.append(task)
        logger.info(
            f"📊 Сцена {task.scene_id}: {'✅ успех' if success else '❌ ошибка'}, время: {task.duration:.2f}с"
        )

    def record_skipped(self, count: int) -> None:
        self.skipped_scenes += count
        if count:
            self.scenes.labels(status="skipped").inc(count)

    def get_success_rate(self) -> float:
        if self.total_scenes == 0:
            return 0.0
        return self.successful_scenes / self.total_scenes

    def get_summary(self) -> Dict:
        durations = [t.duration for t in self.tasks if t.duration is not None]
        return {
            "total_scenes": self.total_scenes,
            "successful_scenes": self.successful_scenes,
            "failed_scenes": self.failed_scenes,
            "skipped_scenes": self.skipped_scenes,
            "success_rate": self.get_success_rate(),
            "average_duration": sum(durations) / len(durations) if durations else 0.0,
            "stage_averages": {
                stage: sum(values) / len(values) for stage, values in sorted(self.stage_durations.items())
            },
            "error_distribution": dict(self.error_counts),
        }

    def write(self, path: Path) -> Path:
        """Запись реестра в текстовом формате Prometheus"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_to_textfile(str(path), self.registry)
        logger.debug(f"Метрики записаны: {path}")
        return path
