"""Файлы сценариев, генератор, кампания с возобновлением, перенос и CLI"""

import json
from pathlib import Path
from typing import Optional

import numpy as np
import pytest

from main import main
from trajectory_attack_bench.attack import AttackConfig
from trajectory_attack_bench.config import CampaignConfig
from trajectory_attack_bench.core.errors import ScenarioParseError
from trajectory_attack_bench.metrics import violation_rate
from trajectory_attack_bench.predictors import (
    ConstantVelocityPredictor,
    KinematicExtrapolationPredictor,
    SurrogateSpec,
    train_surrogate,
    training_ade,
)
from trajectory_attack_bench.reconstruction import ReconConfig
from trajectory_attack_bench.utils.constants import REPORT_FORMAT
from trajectory_attack_bench.workbench import SynthSpec, synthesize_scenes
from trajectory_attack_bench.workbench.campaign import (
    Campaign,
    augment_dataset,
    reconstruct_scenes,
    run_campaign,
    transfer_matrix,
)
from trajectory_attack_bench.workbench.result_store import ResultStore
from trajectory_attack_bench.workbench.scenario_io import load_scenario, save_scenario


def scenario_doc() -> dict:
    return {
        "format": "trajbench-scenario/1",
        "dt": 0.5,
        "history_len": 2,
        "future_len": 2,
        "scenes": [
            {
                "id": "s0",
                "adv": "a",
                "ego": "b",
                "agents": [
                    {"id": "a", "history": [[0, 0], [1, 0]], "future": [[2, 0], [3, 0]]},
                    {"id": "b", "history": [[0, 4], [1, 4]], "future": [[2, 4], [3, 4]]},
                ],
            }
        ],
    }


def write_doc(path: Path, doc: dict) -> Path:
    path.write_text(json.dumps(doc, indent=2), encoding="utf-8")
    return path


def campaign_cfg(out: Path, extra: Optional[dict] = None) -> CampaignConfig:
    overrides = {
        ("campaign", "out"): str(out),
        ("campaign", "workers"): 1,
        ("campaign", "plot_scenes"): 1,
        ("predictor", "kind"): "constant-velocity",
        ("attack", "pgd_steps"): 2,
        ("reconstruction", "steps"): 2,
    }
    overrides.update(extra or {})
    return CampaignConfig().with_overrides(overrides)


def small_attack() -> AttackConfig:
    return AttackConfig(pgd_steps=2, recon=ReconConfig(steps=2))


class _FailingOn(ConstantVelocityPredictor):
    def __init__(self, prefix: str):
        self.prefix = prefix

    def forward(self, histories, scene):
        if scene.scene_id.startswith(self.prefix):
            raise FloatingPointError("переполнение")
        return super().forward(histories, scene)


def test_valid_scenario_loads(tmp_path):
    scenario = load_scenario(write_doc(tmp_path / "s.json", scenario_doc()))

    assert scenario.scene_ids == ["s0"]
    scene = scenario.scene("s0")
    assert (scene.adv_index, scene.ego_index) == (0, 1)
    assert scenario.map_model is None


def test_short_history_is_rejected(tmp_path):
    doc = scenario_doc()
    doc["history_len"] = 1

    with pytest.raises(ScenarioParseError) as info:
        load_scenario(write_doc(tmp_path / "s.json", doc))

    assert info.value.field == "history_len"
    assert info.value.line is not None


def test_unknown_field_is_located(tmp_path):
    doc = scenario_doc()
    doc["scenes"][0]["agents"][1]["speed"] = 3.0

    with pytest.raises(ScenarioParseError) as info:
        load_scenario(write_doc(tmp_path / "s.json", doc))

    assert info.value.field == "scenes[0].agents[1].speed"
    assert info.value.line is not None
    assert "лишнее поле" in str(info.value)


def test_ego_must_differ_from_adversary(tmp_path):
    doc = scenario_doc()
    doc["scenes"][0]["ego"] = "a"

    with pytest.raises(ScenarioParseError) as info:
        load_scenario(write_doc(tmp_path / "s.json", doc))

    assert info.value.field == "scenes[0].ego"


def test_history_length_must_match(tmp_path):
    doc = scenario_doc()
    doc["scenes"][0]["agents"][0]["history"].append([2, 0])

    with pytest.raises(ScenarioParseError) as info:
        load_scenario(write_doc(tmp_path / "s.json", doc))

    assert info.value.field == "scenes[0].agents[0].history"


def test_dangling_map_reference(tmp_path):
    doc = scenario_doc()
    doc["map"] = "absent.json"

    with pytest.raises(ScenarioParseError) as info:
        load_scenario(write_doc(tmp_path / "s.json", doc))

    assert info.value.field == "map"


def test_missing_file_and_bad_json(tmp_path):
    with pytest.raises(ScenarioParseError):
        load_scenario(tmp_path / "absent.json")
    broken = tmp_path / "broken.json"
    broken.write_text('{"format": \n', encoding="utf-8")
    with pytest.raises(ScenarioParseError) as info:
        load_scenario(broken)
    assert info.value.line is not None


def test_synthetic_scenario_survives_save_and_load(tmp_path, small_suite):
    path = save_scenario(small_suite, tmp_path / "suite" / "scenario.json")

    loaded = load_scenario(path)

    assert (tmp_path / "suite" / "map.json").exists()
    assert loaded.scene_ids == small_suite.scene_ids
    assert loaded.map_model is not None
    for original, restored in zip(small_suite.scenes, loaded.scenes):
        np.testing.assert_allclose(restored.histories, original.histories)
        np.testing.assert_allclose(restored.futures, original.futures)
        assert restored.agent_ids == original.agent_ids


def test_synthesis_is_seeded():
    spec = SynthSpec(templates=("straight",))

    first = synthesize_scenes(spec, 3, seed=5)
    second = synthesize_scenes(spec, 3, seed=5)

    assert all(sid.endswith("_straight") for sid in first.scene_ids)
    for a, b in zip(first.scenes, second.scenes):
        np.testing.assert_array_equal(a.histories, b.histories)
    assert all(s.history_len == spec.history_len and s.future_len == spec.future_len for s in first.scenes)


def test_campaign_writes_report_sidecars_and_metrics(tmp_path, small_suite):
    cfg = campaign_cfg(tmp_path)

    run = run_campaign(cfg, small_suite, ConstantVelocityPredictor())

    document = json.loads(run.report_path.read_text(encoding="utf-8"))
    assert document["format"] == REPORT_FORMAT
    assert document["config_hash"] == cfg.config_hash()
    assert document["predictor"] == "constant-velocity"
    assert not document["partial"]
    assert [s["scene_id"] for s in document["scenes"]] == sorted(small_suite.scene_ids)
    assert (tmp_path / "metrics.prom").exists()
    for record in ResultStore(str(tmp_path)).load().values():
        assert (tmp_path / record.sidecar).exists()


def test_zero_steps_leave_predictions_unchanged(tmp_path, small_suite):
    cfg = campaign_cfg(tmp_path, {("attack", "pgd_steps"): 0})

    run = run_campaign(cfg, small_suite, ConstantVelocityPredictor())

    for evaluation in run.report.scenes:
        assert evaluation.adversarial == evaluation.benign


def test_rerun_skips_done_scenes_and_keeps_report_bytes(tmp_path, small_suite):
    cfg = campaign_cfg(tmp_path)
    first = run_campaign(cfg, small_suite, ConstantVelocityPredictor()).report_path.read_bytes()
    lines = (tmp_path / "results.jsonl").read_text(encoding="utf-8").splitlines()

    assert Campaign(cfg, small_suite, ConstantVelocityPredictor()).pending() == []
    second = run_campaign(cfg, small_suite, ConstantVelocityPredictor()).report_path.read_bytes()

    assert second == first
    assert (tmp_path / "results.jsonl").read_text(encoding="utf-8").splitlines() == lines


def test_changed_config_reprocesses_every_scene(tmp_path, small_suite):
    run_campaign(campaign_cfg(tmp_path), small_suite, ConstantVelocityPredictor())

    other = campaign_cfg(tmp_path, {("campaign", "seed"): 9})

    assert len(Campaign(other, small_suite, ConstantVelocityPredictor()).pending()) == len(small_suite.scenes)


def test_interrupted_campaign_resumes(tmp_path, small_suite):
    cfg = campaign_cfg(tmp_path)
    campaign = Campaign(cfg, small_suite, ConstantVelocityPredictor())

    campaign.execute(limit=2)

    assert len(campaign.pending()) == len(small_suite.scenes) - 2
    run = run_campaign(cfg, small_suite, ConstantVelocityPredictor())
    assert len(run.report.scenes) == len(small_suite.scenes)


def test_failed_scene_marks_report_partial_and_is_retried(tmp_path, small_suite):
    cfg = campaign_cfg(tmp_path)
    bad = sorted(small_suite.scene_ids)[0]

    run = run_campaign(cfg, small_suite, _FailingOn(bad))

    assert run.partial
    assert [f["scene_id"] for f in run.document["failures"]] == [bad]
    assert len(run.report.scenes) == len(small_suite.scenes) - 1

    retried = run_campaign(cfg, small_suite, ConstantVelocityPredictor())
    assert not retried.partial
    assert len(retried.report.scenes) == len(small_suite.scenes)


def test_transfer_matrix_covers_every_pair(small_suite):
    models = {"cv": ConstantVelocityPredictor(), "ke": KinematicExtrapolationPredictor()}

    result = transfer_matrix(models, small_suite.scenes[:2], small_attack())

    assert sorted(result.rates) == ["cv", "ke"]
    for source in models:
        assert sorted(result.rates[source]) == ["cv", "ke"]
        self_rate = result.rates[source][source]
        if self_rate is None:
            assert f"{source}->{source}" in result.undefined
        else:
            assert self_rate == pytest.approx(1.0)
        assert all(d >= 0.0 for d in result.degrees[source].values())


def test_augmentation_adds_one_scene_per_direction(small_suite):
    scenes = small_suite.scenes[:2]

    augmented, results = augment_dataset(scenes, ["left", "forward"], small_attack())

    assert len(augmented) == 6
    assert len(results) == 4
    assert f"{scenes[0].scene_id}+left" in [s.scene_id for s in augmented]
    np.testing.assert_array_equal(augmented[0].histories, scenes[0].histories)


def test_reconstruction_summaries_are_ordered(small_suite):
    summaries = reconstruct_scenes(small_suite.scenes, small_attack())

    assert [s.scene_id for s in summaries] == sorted(small_suite.scene_ids)
    assert all(s.knot_mse >= 0.0 and s.steps >= 1 for s in summaries)


def write_config(path: Path) -> Path:
    config = {
        "logging": {"file": None},
        "campaign": {"workers": 1, "plot_scenes": 0},
        "attack": {"pgd_steps": 2},
        "reconstruction": {"steps": 2},
        "predictor": {"kind": "constant-velocity"},
    }
    path.write_text(json.dumps(config), encoding="utf-8")
    return path


def test_cli_synth_attack_eval_report(tmp_path):
    config = str(write_config(tmp_path / "config.json"))
    out = str(tmp_path / "run")

    assert main(["--config", config, "synth", "--count", "3", "--out", out]) == 0
    scenario = str(tmp_path / "run" / "scenario.json")
    assert main(["--config", config, "attack", "--scenario", scenario, "--out", out]) == 0
    assert main(["--config", config, "eval", "--scenario", scenario, "--out", out]) == 0
    assert main(["--config", config, "report", "--out", out]) == 0

    report = json.loads((tmp_path / "run" / "report.json").read_text(encoding="utf-8"))
    assert len(report["scenes"]) == 3


def test_cli_configuration_errors_exit_with_two(tmp_path):
    config = str(write_config(tmp_path / "config.json"))
    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")

    assert main(["--config", config, "attack", "--scenario", str(tmp_path / "absent.json")]) == 2
    assert main(["--config", str(broken), "report", "--out", str(tmp_path)]) == 2
    assert main(["--config", config, "report", "--out", str(tmp_path), "--workers", "0"]) == 2
    assert main(["--config", config, "report", "--out", str(tmp_path / "empty")]) == 2


@pytest.mark.bench
def test_augmented_training_keeps_benign_ade():
    suite = synthesize_scenes(SynthSpec(), 60, seed=6)
    train, held_out = suite.scenes[:40], suite.scenes[40:]
    spec = SurrogateSpec(kind="social-mlp", seed=0)
    cfg = AttackConfig()

    augmented, results = augment_dataset(train, ["forward", "backward", "left", "right"], cfg)
    plain, _ = train_surrogate(train, spec)
    enlarged, _ = train_surrogate(augmented, spec)

    def benign_ade(model) -> float:
        return float(np.mean([training_ade(model, scene) for scene in held_out]))

    assert len(augmented) == 5 * len(train)
    assert violation_rate(results, cfg.bounds) == 0.0
    assert benign_ade(enlarged) <= 1.02 * benign_ade(plain)
