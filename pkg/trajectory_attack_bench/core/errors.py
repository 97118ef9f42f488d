"""
Иерархия исключений и классификация ошибок для записей о сбоях сцен
"""

import logging
from enum import Enum
from typing import Any, Dict, List, Optional

logger = logging.getLogger(__name__)


class ErrorType(Enum):
    """Типы ошибок для классификации"""

    INVALID_INPUT = "invalid_input"
    OPTIMIZATION_DIVERGED = "optimization_diverged"
    TRAINING = "training"
    CAPABILITY = "capability"
    BRIDGE = "bridge"
    PLANNER = "planner"
    SCENARIO_PARSE = "scenario_parse"
    CONFIG = "config"
    TRANSFER_UNDEFINED = "transfer_undefined"
    UNKNOWN = "unknown"


class BenchError(Exception):
    """Базовое исключение пакета"""

    error_type: ErrorType = ErrorType.UNKNOWN


class InvalidInputError(BenchError, ValueError):
    """Нарушение формы, конечности или предусловия входных данных"""

    error_type = ErrorType.INVALID_INPUT


class OptimizationDivergedError(BenchError):
    """Функция потерь стала неконечной во время оптимизации"""

    error_type = ErrorType.OPTIMIZATION_DIVERGED

    def __init__(self, message: str, trace: Optional[List[float]] = None):
        self.trace = list(trace or [])
        super().__init__(f"{message} (шагов в трассе: {len(self.trace)})")


class TrainingError(BenchError):
    """Расхождение обучения предиктора"""

    error_type = ErrorType.TRAINING

    def __init__(self, message: str, trace: Optional[List[float]] = None):
        self.trace = list(trace or [])
        super().__init__(f"{message} (эпох в трассе: {len(self.trace)})")


class CapabilityError(BenchError):
    """Модель не поддерживает запрошенную операцию"""

    error_type = ErrorType.CAPABILITY


class BridgeError(BenchError):
    """Сбой протокола внешнего предиктора"""

    error_type = ErrorType.BRIDGE


class BridgeTimeoutError(BridgeError):
    """Внешний предиктор не ответил вовремя"""


class PlannerError(BenchError):
    """Планировщик не может построить план"""

    error_type = ErrorType.PLANNER


class ScenarioParseError(BenchError):
    """Ошибка разбора файла сценария или карты"""

    error_type = ErrorType.SCENARIO_PARSE

    def __init__(
        self,
        message: str,
        path: Optional[str] = None,
        line: Optional[int] = None,
        field: Optional[str] = None,
    ):
        self.path = path
        self.line = line
        self.field = field
        location = []
        if path:
            location.append(str(path))
        if line is not None:
            location.append(f"строка {line}")
        if field:
            location.append(f"поле '{field}'")
        prefix = f"[{', '.join(location)}] " if location else ""
        super().__init__(f"{prefix}{message}")


class ConfigError(BenchError):
    """Невалидная конфигурация"""

    error_type = ErrorType.CONFIG


class TransferUndefinedError(BenchError):
    """Исходная атака не дала прироста ошибки, коэффициент переноса не определён"""

    error_type = ErrorType.TRANSFER_UNDEFINED


def classify_error(error: BaseException) -> ErrorType:
    """Классификация исключения в стабильный тип сбоя"""
    if isinstance(error, BenchError):
        return error.error_type
    if isinstance(error, (ValueError, TypeError, IndexError)):
        return ErrorType.INVALID_INPUT
    if isinstance(error, FloatingPointError):
        return ErrorType.OPTIMIZATION_DIVERGED
    return ErrorType.UNKNOWN


def failure_record(error: BaseException, context: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Запись о сбое для хранилища результатов"""
    error_type = classify_error(error)
    record: Dict[str, Any] = {
        "error_type": error_type.value,
        "error": str(error),
        "exception": type(error).__name__,
    }
    trace = getattr(error, "trace", None)
    if trace:
        record["trace_tail"] = [float(x) for x in trace[-5:]]
    if context:
        record.update(context)
    logger.debug(f"🔍 Классифицирована ошибка: {error_type.value} ({type(error).__name__})")
    return record
