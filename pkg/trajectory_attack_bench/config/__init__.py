"""Модуль конфигурации верстака"""

from .campaign_config import CampaignConfig, CampaignSettings, LoggingSettings, PredictorSettings
from .logging_config import setup_logging

__all__ = ["CampaignConfig", "CampaignSettings", "LoggingSettings", "PredictorSettings", "setup_logging"]
