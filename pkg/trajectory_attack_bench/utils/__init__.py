"""Утилиты и вспомогательные функции"""

from .decorators import retry_on_failure, timed_stage
from .timeout import LineReader

__all__ = ["retry_on_failure", "timed_stage", "LineReader"]
