"""
Конфигурация кампании: секционный config.json, переопределения ADVDO_* и флагами CLI
"""

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Literal, Mapping, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..attack import AttackConfig
from ..core.errors import ConfigError
from ..metrics import MetricsConfig
from ..planning import PlannerConfig, SimConfig
from ..predictors import SurrogateSpec
from ..reconstruction import ReconConfig
from ..utils.constants import (
    DEFAULT_BRIDGE_TIMEOUT,
    DEFAULT_CONFIG_FILE,
    DEFAULT_LOG_FILE,
    DEFAULT_LOG_FORMAT,
    DEFAULT_LOG_LEVEL,
    DEFAULT_OUTPUT_DIR,
    ENV_PREFIX,
)

logger = logging.getLogger(__name__)

PredictorKind = Literal["constant-velocity", "kinematic-extrapolation", "social-mlp", "oracle"]
AttackMethod = Literal["pgd", "random", "search"]


class LoggingSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    level: str = DEFAULT_LOG_LEVEL
    file: Optional[str] = DEFAULT_LOG_FILE
    format: str = DEFAULT_LOG_FORMAT


class CampaignSettings(BaseModel):
    """Входы, выходы и исполнение кампании"""

    model_config = ConfigDict(extra="forbid")

    scenario: Optional[str] = None
    map: Optional[str] = None
    out: str = DEFAULT_OUTPUT_DIR
    seed: int = 0
    workers: Optional[int] = Field(default=None, ge=1, description="по умолчанию число CPU")
    method: AttackMethod = "pgd"
    simulate: bool = False
    plot_scenes: int = Field(default=5, ge=0, description="сцен с графиками атаки")
    synth_count: int = Field(default=100, ge=1)
    train_epochs: int = Field(default=60, ge=0)
    train_lr: float = Field(default=1e-3, gt=0)


class PredictorSettings(BaseModel):
    """Встроенный суррогат, сохранённая модель или внешний мост"""

    model_config = ConfigDict(extra="forbid")

    kind: PredictorKind = "social-mlp"
    model_path: Optional[str] = None
    bridge_cmd: Optional[str] = None
    bridge_timeout: float = Field(default=DEFAULT_BRIDGE_TIMEOUT, gt=0)
    allow_finite_difference: bool = True
    spec: SurrogateSpec = Field(default_factory=SurrogateSpec)


# ADVDO_<NAME> → (секция, поле)
ENV_OVERRIDES: Dict[str, Tuple[str, str]] = {
    "SEED": ("campaign", "seed"),
    "WORKERS": ("campaign", "workers"),
    "OUT": ("campaign", "out"),
    "ALPHA": ("attack", "alpha"),
    "BETA": ("attack", "beta"),
    "GAMMA": ("attack", "gamma"),
    "EPS": ("attack", "eps"),
    "STEPS": ("attack", "pgd_steps"),
    "LP": ("attack", "lp"),
    "VARIANT": ("attack", "variant"),
    "BRIDGE_CMD": ("predictor", "bridge_cmd"),
    "LOG_LEVEL": ("logging", "level"),
}

# Секции и поля, не влияющие на результаты
_HASH_EXCLUDED = {"logging": None, "campaign": {"out", "workers", "plot_scenes"}}


class CampaignConfig(BaseModel):
    """Полная конфигурация верстака"""

    model_config = ConfigDict(extra="forbid")

    logging: LoggingSettings = Field(default_factory=LoggingSettings)
    campaign: CampaignSettings = Field(default_factory=CampaignSettings)
    attack: AttackConfig = Field(default_factory=AttackConfig)
    reconstruction: ReconConfig = Field(default_factory=ReconConfig)
    metrics: MetricsConfig = Field(default_factory=MetricsConfig)
    planner: PlannerConfig = Field(default_factory=PlannerConfig)
    simulation: SimConfig = Field(default_factory=SimConfig)
    predictor: PredictorSettings = Field(default_factory=PredictorSettings)

    @classmethod
    def from_file(cls, config_file: str = DEFAULT_CONFIG_FILE) -> "CampaignConfig":
        """
        Создание конфигурации из файла

        Отсутствующий файл даёт настройки по умолчанию; нечитаемый или невалидный - ConfigError.
        """
        path = Path(config_file)
        if not path.exists():
            logger.info(f"Файл конфигурации {config_file} не найден, используются настройки по умолчанию")
            return cls()
        try:
            with path.open("r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{config_file}: некорректный JSON (строка {e.lineno}): {e.msg}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"{config_file}: ожидался объект с секциями")
        try:
            config = cls.model_validate(data)
        except ValidationError as e:
            raise ConfigError(f"{config_file}: {_describe(e)}") from e
        logger.info(f"✅ Загружена конфигурация из {config_file}")
        return config

    def with_overrides(self, overrides: Mapping[Tuple[str, str], Any]) -> "CampaignConfig":
        """
        Копия с заменёнными полями {(секция, поле): значение}

        Raises:
            ConfigError: Значение не проходит валидацию
        """
        if not overrides:
            return self
        data = self.model_dump()
        for (section, name), value in overrides.items():
            data[section][name] = value
        try:
            return CampaignConfig.model_validate(data)
        except ValidationError as e:
            raise ConfigError(_describe(e)) from e

    def with_env(self, environ: Optional[Mapping[str, str]] = None) -> "CampaignConfig":
        """Переопределения ADVDO_*; невалидные значения пропускаются с предупреждением"""
        environ = os.environ if environ is None else environ
        config = self
        for suffix, key in ENV_OVERRIDES.items():
            raw = environ.get(f"{ENV_PREFIX}{suffix}")
            if raw is None or raw == "":
                continue
            try:
                config = config.with_overrides({key: raw})
            except ConfigError as e:
                logger.warning(f"⚠️ Некорректное значение {ENV_PREFIX}{suffix}={raw!r} проигнорировано: {e}")
                continue
            logger.info(f"Переопределено из окружения: {key[0]}.{key[1]} = {raw}")
        return config

    def effective_attack(self) -> AttackConfig:
        """Атака с секцией reconstruction и зерном кампании"""
        return self.attack.model_copy(update={"recon": self.reconstruction, "seed": self.campaign.seed})

    def effective_simulation(self) -> SimConfig:
        return self.simulation.model_copy(update={"seed": self.campaign.seed})

    def config_hash(self) -> str:
        """SHA-256 канонического JSON без настроек, не влияющих на результаты"""
        data = self.model_dump(mode="json")
        for section, fields in _HASH_EXCLUDED.items():
            if fields is None:
                data.pop(section, None)
            else:
                for name in fields:
                    data[section].pop(name, None)
        canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _describe(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(p) for p in item.get("loc", ()))
        parts.append(f"{location}: {item.get('msg')}" if location else str(item.get("msg")))
    return "; ".join(parts)
