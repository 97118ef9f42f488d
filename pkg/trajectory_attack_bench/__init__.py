"""
Trajectory Attack Bench
Реалистичные состязательные траектории для проверки устойчивости моделей предсказания движения:
кинематическая модель, реконструкция, атаки PGD, метрики и замкнутый цикл с планировщиком
"""

from .config import CampaignConfig
from .workbench import load_scenario, run_campaign, synthesize_scenes

__version__ = "1.0.0"
__author__ = "Trajectory Attack Bench Team"

__all__ = ["CampaignConfig", "load_scenario", "run_campaign", "synthesize_scenes"]
