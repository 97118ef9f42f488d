"""
Хранилище результатов сцен: JSONL только на дозапись, последняя запись сцены побеждает
"""

import json
import logging
import threading
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Set

logger = logging.getLogger(__name__)

RESULTS_FILE = "results.jsonl"


@dataclass
class SceneRecord:
    """Итог обработки одной сцены"""

    scene_id: str
    status: str  # "ok" | "failed"
    config_hash: str
    seed: int
    evaluation: Optional[Dict[str, Any]] = None
    failure: Optional[Dict[str, Any]] = None
    sidecar: Optional[str] = None
    extras: Dict[str, Any] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class ResultStore:
    """
    Записи сцен кампании в <out>/results.jsonl

    Запись сериализуется блокировкой; чтение берёт последнюю запись каждой сцены,
    поэтому повторный прогон сбойной сцены заменяет прежний сбой.
    """

    def __init__(self, storage_dir: str):
        self.storage_dir = Path(storage_dir)
        self.storage_dir.mkdir(exist_ok=True, parents=True)
        self.path = self.storage_dir / RESULTS_FILE
        self._lock = threading.Lock()
        logger.debug(f"ResultStore: {self.path}")

    def append(self, record: SceneRecord) -> None:
        line = json.dumps(record.to_dict(), ensure_ascii=False, sort_keys=True)
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(line)
                f.write("\n")

    def load(self) -> Dict[str, SceneRecord]:
        """Последние записи по сценам; повреждённая (недописанная) строка пропускается"""
        records: Dict[str, SceneRecord] = {}
        if not self.path.exists():
            return records
        with open(self.path, "r", encoding="utf-8") as f:
            for number, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    data = json.loads(line)
                    record = SceneRecord(**data)
                except (json.JSONDecodeError, TypeError) as e:
                    logger.warning(f"⚠️ {self.path}:{number}: повреждённая запись пропущена ({e})")
                    continue
                records[record.scene_id] = record
        return records

    def completed_ids(self, config_hash: str) -> Set[str]:
        """Сцены, успешно обработанные с той же конфигурацией"""
        return {sid for sid, r in self.load().items() if r.ok and r.config_hash == config_hash}

    def records_for(self, scene_ids: List[str], config_hash: str) -> List[SceneRecord]:
        """Записи перечисленных сцен с данной конфигурацией, по возрастанию id"""
        records = self.load()
        return [
            records[sid]
            for sid in sorted(scene_ids)
            if sid in records and records[sid].config_hash == config_hash
        ]
