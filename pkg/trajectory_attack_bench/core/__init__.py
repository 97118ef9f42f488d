"""Ядро: исключения и классификация ошибок"""

from .errors import (
    BenchError,
    BridgeError,
    BridgeTimeoutError,
    CapabilityError,
    ConfigError,
    ErrorType,
    InvalidInputError,
    OptimizationDivergedError,
    PlannerError,
    ScenarioParseError,
    TrainingError,
    TransferUndefinedError,
    classify_error,
    failure_record,
)

__all__ = [
    "BenchError",
    "BridgeError",
    "BridgeTimeoutError",
    "CapabilityError",
    "ConfigError",
    "ErrorType",
    "InvalidInputError",
    "OptimizationDivergedError",
    "PlannerError",
    "ScenarioParseError",
    "TrainingError",
    "TransferUndefinedError",
    "classify_error",
    "failure_record",
]
