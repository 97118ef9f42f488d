"""Верстак: файлы сценариев и карт, генератор сцен, кампании, хранилище результатов, графики и CLI"""

from .campaign import (
    Campaign,
    CampaignRun,
    ReconSummary,
    TransferResult,
    adversarial_history,
    augment_dataset,
    build_predictor,
    collect_report,
    evaluation_window,
    predictor_label,
    process_scene,
    reconstruct_scenes,
    run_attack,
    run_campaign,
    run_simulations,
    transfer_matrix,
)
from .result_store import ResultStore, SceneRecord
from .scenario_io import ScenarioFile, load_map, load_scenario, save_map, save_scenario
from .synth import SynthSpec, synthesize_scenes

__all__ = [
    "Campaign",
    "CampaignRun",
    "ReconSummary",
    "ResultStore",
    "ScenarioFile",
    "SceneRecord",
    "SynthSpec",
    "TransferResult",
    "adversarial_history",
    "augment_dataset",
    "build_predictor",
    "collect_report",
    "evaluation_window",
    "load_map",
    "load_scenario",
    "predictor_label",
    "process_scene",
    "reconstruct_scenes",
    "run_attack",
    "run_campaign",
    "run_simulations",
    "save_map",
    "save_scenario",
    "synthesize_scenes",
    "transfer_matrix",
]
