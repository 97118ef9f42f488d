"""Загрузка конфигурации, приоритет источников и хеш конфигурации"""

import json
import logging

import pytest
from rich.logging import RichHandler

from trajectory_attack_bench.config import CampaignConfig, setup_logging
from trajectory_attack_bench.core.errors import ConfigError


def test_missing_file_gives_defaults(tmp_path):
    config = CampaignConfig.from_file(str(tmp_path / "absent.json"))
    assert config == CampaignConfig()


def test_file_values_are_loaded(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"attack": {"alpha": 0.7, "variant": "opt-end"}}), encoding="utf-8")

    config = CampaignConfig.from_file(str(path))

    assert config.attack.alpha == 0.7
    assert config.attack.variant == "opt-end"
    assert config.attack.beta == CampaignConfig().attack.beta


@pytest.mark.parametrize(
    "content",
    ["{", "[1, 2]", '{"telemetry": {}}', '{"attack": {"eps": -1}}', '{"attack": {"stepz": 3}}'],
    ids=["broken-json", "not-an-object", "unknown-section", "invalid-value", "unknown-field"],
)
def test_invalid_file_raises(tmp_path, content):
    path = tmp_path / "config.json"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(ConfigError):
        CampaignConfig.from_file(str(path))


def test_environment_overrides_file_values():
    config = CampaignConfig().with_env({"ADVDO_SEED": "42", "ADVDO_VARIANT": "opt-end", "ADVDO_LP": "3"})

    assert config.campaign.seed == 42
    assert config.attack.variant == "opt-end"
    assert config.attack.lp == 3


def test_invalid_environment_value_is_ignored():
    config = CampaignConfig().with_env({"ADVDO_ALPHA": "много", "ADVDO_STEPS": "7"})

    assert config.attack.alpha == CampaignConfig().attack.alpha
    assert config.attack.pgd_steps == 7


def test_cli_overrides_win_over_environment():
    config = CampaignConfig().with_env({"ADVDO_EPS": "2.0"}).with_overrides({("attack", "eps"): 0.5})
    assert config.attack.eps == 0.5


def test_invalid_override_raises():
    with pytest.raises(ConfigError):
        CampaignConfig().with_overrides({("campaign", "workers"): 0})


def test_effective_sections_carry_seed_and_reconstruction():
    config = CampaignConfig().with_overrides({("campaign", "seed"): 5, ("reconstruction", "steps"): 2})

    assert config.effective_attack().seed == 5
    assert config.effective_attack().recon.steps == 2
    assert config.effective_simulation().seed == 5


def test_hash_ignores_output_settings():
    base = CampaignConfig()
    moved = base.with_overrides(
        {("campaign", "out"): "/tmp/elsewhere", ("campaign", "workers"): 3, ("logging", "level"): "DEBUG"}
    )
    assert moved.config_hash() == base.config_hash()


@pytest.mark.parametrize("key,value", [(("campaign", "seed"), 1), (("attack", "alpha"), 0.9)])
def test_hash_tracks_result_settings(key, value):
    base = CampaignConfig()
    assert base.with_overrides({key: value}).config_hash() != base.config_hash()


@pytest.fixture
def restore_root_logging():
    root = logging.getLogger()
    saved_handlers, saved_level = list(root.handlers), root.level
    yield
    for handler in list(root.handlers):
        root.removeHandler(handler)
        if handler not in saved_handlers:
            handler.close()
    for handler in saved_handlers:
        root.addHandler(handler)
    root.setLevel(saved_level)


def test_scene_errors_go_to_file_only(tmp_path, restore_root_logging):
    log_file = tmp_path / "bench.log"

    logger = setup_logging(level=logging.DEBUG, log_file=str(log_file))
    logger.error("сцена s0: неконечная L_adv")
    for handler in logging.getLogger().handlers:
        handler.flush()

    assert logger.name == "trajectory_attack_bench"
    assert "ERROR - trajectory_attack_bench - сцена s0" in log_file.read_text(encoding="utf-8")
    console = [h for h in logging.getLogger().handlers if isinstance(h, RichHandler)]
    assert len(console) == 1
    error = logging.makeLogRecord({"name": "trajectory_attack_bench", "levelno": logging.ERROR})
    warning = logging.makeLogRecord({"name": "trajectory_attack_bench", "levelno": logging.WARNING})
    assert not console[0].filter(error)
    assert console[0].filter(warning)
    assert logging.getLogger("cvxpy").level == logging.WARNING


def test_console_only_logging_shows_errors(restore_root_logging):
    setup_logging(log_file=None)

    (console,) = logging.getLogger().handlers
    font = logging.makeLogRecord({"name": "matplotlib.font_manager", "levelno": logging.INFO})
    error = logging.makeLogRecord({"name": "trajectory_attack_bench", "levelno": logging.ERROR})
    assert console.filter(error)
    assert not console.filter(font)
