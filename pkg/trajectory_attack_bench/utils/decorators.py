"""
Декораторы для Trajectory Attack Bench: повтор при сбоях и замер стадий
"""

import logging
import time
from functools import wraps
from typing import Callable, ParamSpec, Tuple, Type, TypeVar

logger = logging.getLogger(__name__)

P = ParamSpec("P")
T = TypeVar("T")


def retry_on_failure(
    max_retries: int = 2,
    delay: float = 1.0,
    retry_on: Tuple[Type[BaseException], ...] = (Exception,),
    no_retry: Tuple[Type[BaseException], ...] = (),
):
    """
    Декоратор для повторения синхронных операций при неудаче.

    Args:
        max_retries: Максимальное количество попыток
        delay: Задержка между попытками в секундах
        retry_on: Типы исключений, при которых выполняется повтор
        no_retry: Типы исключений, которые пробрасываются сразу
    """

    def decorator(func: Callable[P, T]) -> Callable[P, T]:
        @wraps(func)
        def wrapper(*args: P.args, **kwargs: P.kwargs) -> T:
            for attempt in range(max_retries):
                try:
                    return func(*args, **kwargs)
                except no_retry:
                    raise
                except retry_on as e:
                    if attempt >= max_retries - 1:
                        raise
                    logger.warning(
                        f"Попытка {attempt + 1}/{max_retries} ({func.__name__}) неудачна: {e}; повтор через {delay}с"
                    )
                    if delay > 0:
                        time.sleep(delay)
            raise RuntimeError("retry_on_failure: max_retries должно быть ≥ 1")

        return wrapper

    return decorator


def timed_stage(stage: str):
    """
    Декоратор, логирующий длительность стадии конвейера (реконструкция, атака, оценка...)

    Args:
        stage: Название стадии для логов
    """

    def decorator(func: Callable[P, T]) -> Callable[P, T]:
        @wraps(func)
        def wrapper(*args: P.args, **kwargs: P.kwargs) -> T:
            started = time.perf_counter()
            try:
                return func(*args, **kwargs)
            finally:
                logger.debug(f"⏱️ {stage}: {time.perf_counter() - started:.3f}с")

        return wrapper

    return decorator
