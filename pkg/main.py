#!/usr/bin/env python3
"""
Trajectory Attack Bench - верстак реалистичных состязательных траекторий
Точка входа CLI: генерация сцен, атаки, оценка, замкнутый цикл, обучение и перенос
"""

import json
import logging
import signal
import sys
from pathlib import Path
from typing import Optional, Sequence

from dotenv import load_dotenv
from rich.console import Console

from trajectory_attack_bench.config import CampaignConfig
from trajectory_attack_bench.config.logging_config import setup_logging
from trajectory_attack_bench.core.errors import BenchError, ConfigError, ScenarioParseError
from trajectory_attack_bench.ui import DisplayUtils
from trajectory_attack_bench.utils.constants import (
    APP_NAME,
    APP_VERSION,
    DEFAULT_CONFIG_FILE,
    DEFAULT_LOG_LEVEL as CFG_DEFAULT_LOG_LEVEL,
    DEFAULT_LOG_FILE as CFG_DEFAULT_LOG_FILE,
    DEFAULT_LOG_FORMAT as CFG_DEFAULT_LOG_FORMAT,
    ENV_PREFIX,
)
from trajectory_attack_bench.workbench.commands import (
    EXIT_CONFIG,
    EXIT_FAILURES,
    CommandContext,
    build_parser,
    cli_overrides,
    run_command,
)

# Константы логирования
DEFAULT_LOG_LEVEL = getattr(logging, str(CFG_DEFAULT_LOG_LEVEL).upper(), logging.INFO)
DEFAULT_LOG_FILE = CFG_DEFAULT_LOG_FILE
DEFAULT_LOG_FORMAT = CFG_DEFAULT_LOG_FORMAT

EPILOG = f"""
Примеры использования:
  python main.py synth --count 100 --out runs/suite
  python main.py train --scenario runs/suite/scenario.json --out runs/suite
  python main.py attack --scenario runs/suite/scenario.json --model runs/suite/model.npz --out runs/opt-init
  python main.py attack --scenario runs/suite/scenario.json --variant opt-end --lp 6 --simulate
  python main.py transfer --scenario runs/suite/scenario.json --models runs/suite/model.npz kinematic-extrapolation
  python main.py report --out runs/opt-init

Переменные окружения (приоритет: флаг CLI > окружение > config.json):
  {ENV_PREFIX}SEED, {ENV_PREFIX}WORKERS, {ENV_PREFIX}OUT
  {ENV_PREFIX}ALPHA, {ENV_PREFIX}BETA, {ENV_PREFIX}GAMMA, {ENV_PREFIX}EPS, {ENV_PREFIX}STEPS, {ENV_PREFIX}LP, {ENV_PREFIX}VARIANT
  {ENV_PREFIX}BRIDGE_CMD  - команда внешнего предсказателя
  {ENV_PREFIX}LOG_LEVEL   - уровень логирования

Коды выхода: 0 - успех, 1 - сбойные сцены или нарушения, 2 - ошибка конфигурации
"""


def signal_handler(sig, frame):
    """Прерывание: записанные сцены сохраняются, повторный запуск продолжит кампанию"""
    print("\n⚠️  Получен сигнал прерывания. Завершение...")
    raise KeyboardInterrupt


def load_logging_config(config_file: str) -> tuple[int, Optional[str], str]:
    """Загрузка конфигурации логирования из файла"""
    log_level = DEFAULT_LOG_LEVEL
    log_file: Optional[str] = DEFAULT_LOG_FILE
    log_format = DEFAULT_LOG_FORMAT

    try:
        config_path = Path(config_file)
        if config_path.exists():
            with config_path.open("r", encoding="utf-8") as f:
                cfg = json.load(f)

            logging_cfg = cfg.get("logging", {})
            level_str = str(logging_cfg.get("level", CFG_DEFAULT_LOG_LEVEL)).upper()
            log_level = getattr(logging, level_str, logging.INFO)
            log_file = logging_cfg.get("file", log_file)
            log_format = logging_cfg.get("format", log_format)
    except Exception as e:
        print(f"⚠️  Ошибка загрузки конфигурации логирования: {e}")
        print("Используются настройки по умолчанию")

    return log_level, log_file, log_format


def _apply_environment_overrides(config: CampaignConfig) -> CampaignConfig:
    """Применение переопределений ADVDO_* (некорректные значения игнорируются с предупреждением)"""
    return config.with_env()


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Разбор аргументов, загрузка конфигурации и выполнение подкоманды"""
    load_dotenv()

    parser = build_parser(
        prog="main.py",
        description=f"{APP_NAME} v{APP_VERSION} - реалистичные состязательные траектории для моделей предсказания",
        epilog=EPILOG,
        config_default=DEFAULT_CONFIG_FILE,
    )
    args = parser.parse_args(argv)

    log_level, log_file, log_format = load_logging_config(args.config)
    logger = setup_logging(level=log_level, log_file=log_file, format_string=log_format)

    console = Console()
    display = DisplayUtils(console)

    try:
        config = CampaignConfig.from_file(args.config)
        config = _apply_environment_overrides(config)
        config = config.with_overrides(cli_overrides(args))
        logging.getLogger().setLevel(getattr(logging, config.logging.level.upper(), log_level))

        logger.info(f"🚀 {args.command}: config_hash={config.config_hash()} seed={config.campaign.seed}")
        code = run_command(args.command, CommandContext(config, args, console, display))

    except (ConfigError, ScenarioParseError) as e:
        display.display_error(str(e))
        logger.error(f"Ошибка конфигурации: {e}")
        return EXIT_CONFIG
    except KeyboardInterrupt:
        console.print("\n⚠️  [yellow]Прервано пользователем[/yellow]")
        logger.info("🏁 Завершение работы (прервано)")
        return EXIT_FAILURES
    except BenchError as e:
        display.display_error(str(e))
        logger.error(f"Ошибка выполнения: {e}", exc_info=True)
        return EXIT_FAILURES
    except Exception as e:
        console.print(f"❌ [bold red]Критическая ошибка: {e}[/bold red]")
        logger.error(f"Критическая ошибка: {e}", exc_info=True)
        return EXIT_FAILURES

    logger.info(f"🏁 Завершение работы (код {code})")
    return code


if __name__ == "__main__":
    signal.signal(signal.SIGINT, signal_handler)
    if sys.platform != "win32":
        signal.signal(signal.SIGTERM, signal_handler)
    elif hasattr(signal, "SIGBREAK"):
        signal.signal(signal.SIGBREAK, signal_handler)

    sys.exit(main())
