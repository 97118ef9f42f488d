"""
Логирование верстака: консоль через rich, полный журнал кампании в файл
"""

import logging
from typing import Optional

from rich.logging import RichHandler

# библиотеки, чьи INFO/DEBUG забивают журнал кампании
QUIET_LIBRARIES = ("matplotlib", "PIL", "shapely", "cvxpy", "torch")


class ConsoleLevelFilter(logging.Filter):
    """
    Консоль получает записи не выше WARNING и без сообщений matplotlib о шрифтах

    Сбои сцен (ERROR) при включённом файле уходят только в журнал: в консоли
    их показывает сводка кампании.
    """

    def __init__(self, max_level: int) -> None:
        super().__init__()
        self.max_level = max_level

    def filter(self, record) -> bool:  # type: ignore[override]
        if record.name.startswith("matplotlib.font_manager"):
            return False
        return record.levelno <= self.max_level


def setup_logging(
    level: int = logging.INFO,
    log_file: Optional[str] = "trajectory_bench.log",
    format_string: str = "%(asctime)s - %(levelname)s - %(name)s - %(message)s",
) -> logging.Logger:
    """
    Настройка корневого логгера

    Args:
        level: Уровень логирования
        log_file: Журнал кампании (None - только консоль, тогда в консоль идут и ошибки)
        format_string: Формат строк журнала

    Returns:
        Логгер пакета
    """
    console = RichHandler(show_path=False, rich_tracebacks=False, markup=False)
    console.addFilter(ConsoleLevelFilter(logging.WARNING if log_file else logging.CRITICAL))
    handlers: list[logging.Handler] = [console]

    if log_file:
        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setFormatter(logging.Formatter(format_string))
        handlers.append(file_handler)

    logging.basicConfig(level=level, format="%(message)s", handlers=handlers, force=True)
    for name in QUIET_LIBRARIES:
        logging.getLogger(name).setLevel(logging.WARNING)

    return logging.getLogger("trajectory_attack_bench")
