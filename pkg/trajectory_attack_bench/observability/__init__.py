"""Наблюдаемость кампаний: счётчики сцен и экспорт Prometheus"""

from .metrics import CampaignMetrics, SceneTask

__all__ = ["CampaignMetrics", "SceneTask"]
