"""Метрики предсказания, чувствительность, сходство кривых и переносимость"""

import numpy as np
import pytest
from shapely.geometry import Polygon

from conftest import make_scene, straight_track
from trajectory_attack_bench.attack import AttackConfig, attack_single
from trajectory_attack_bench.core.errors import InvalidInputError, TransferUndefinedError
from trajectory_attack_bench.dynamics import DynamicBounds
from trajectory_attack_bench.metrics import (
    MetricsConfig,
    SceneEval,
    aggregate,
    aggregated_sensitivity,
    bin_scenes,
    displacement_errors,
    dtw_distance,
    evaluate_scene,
    miss_rate,
    nearby_agents,
    offroad_flags,
    offroad_rate,
    planning_aware,
    scene_stats,
    sensitivity,
    success_degree,
    trajectory_similarity,
    transfer_rate,
    violation_rate,
)
from trajectory_attack_bench.planning import Lane, MapModel
from trajectory_attack_bench.predictors import ConstantVelocityPredictor, OraclePredictor, Prediction, Scene, predict
from trajectory_attack_bench.reconstruction import ReconConfig


def road() -> MapModel:
    return MapModel.from_lanes([Lane("main", np.array([[-50.0, 0.0], [200.0, 0.0]]), 7.0)])


def test_displacement_errors_take_best_mode():
    truth = np.zeros((1, 4, 2))
    modes = np.stack([truth + [0.0, 3.0], truth + [0.0, 1.0]])

    ade, fde = displacement_errors(modes, truth)

    np.testing.assert_allclose(ade, [1.0])
    np.testing.assert_allclose(fde, [1.0])


def test_miss_rate_uses_max_pointwise_error():
    truth = np.zeros((2, 3, 2))
    predicted = truth.copy()
    predicted[0, -1] = [2.5, 0.0]
    predicted[1, -1] = [1.5, 0.0]

    assert miss_rate(predicted, truth, threshold=2.0) == pytest.approx(0.5)
    with pytest.raises(InvalidInputError):
        miss_rate(predicted, truth, threshold=0.0)


def test_offroad_rate_counts_agents_leaving_the_road():
    predicted = np.stack([straight_track(0.0, 0.0, 5.0, 6), straight_track(0.0, 0.0, 5.0, 6, heading=np.pi / 2)])
    assert offroad_rate(predicted, road()) == pytest.approx(0.5)


def test_offroad_rate_needs_drivable_area():
    with pytest.raises(InvalidInputError):
        offroad_rate(np.zeros((1, 3, 2)), MapModel([]))


L_SHAPE = np.array([[0.0, 0.0], [30.0, 0.0], [30.0, 7.0], [7.0, 7.0], [7.0, 30.0], [0.0, 30.0]])


def inside_by_ray_casting(point: np.ndarray, ring: np.ndarray) -> bool:
    x, y = point
    inside = False
    for (x1, y1), (x2, y2) in zip(ring, np.roll(ring, -1, axis=0)):
        if (y1 > y) != (y2 > y) and x < x1 + (y - y1) * (x2 - x1) / (y2 - y1):
            inside = not inside
    return inside


def test_offroad_rate_matches_ray_casting_recount(rng):
    road_map = MapModel([Polygon(L_SHAPE)])
    corner_hugging = np.stack([np.linspace(1.0, 29.0, 6), np.full(6, 6.99)], axis=1)
    cutting_corner = np.stack([np.full(6, 7.01), np.linspace(6.0, 10.0, 6)], axis=1)
    predicted = np.concatenate(
        [
            np.stack([corner_hugging, corner_hugging + [0.0, 0.02], cutting_corner, cutting_corner - [0.02, 0.0]]),
            rng.uniform(-2.0, 32.0, size=(12, 6, 2)),
        ]
    )

    expected = [not all(inside_by_ray_casting(p, L_SHAPE) for p in track) for track in predicted]

    np.testing.assert_array_equal(offroad_flags(predicted, road_map), expected)
    assert offroad_rate(predicted, road_map) == pytest.approx(np.mean(expected))
    assert expected[:4] == [False, True, True, False]


def test_identical_curves_have_zero_distance():
    curve = straight_track(0.0, 0.0, 2.0, 8)
    assert all(v == pytest.approx(0.0, abs=1e-9) for v in trajectory_similarity(curve, curve).values())


def test_parallel_shift_similarity():
    a = straight_track(0.0, 0.0, 2.0, 11)
    b = a + [0.0, 2.0]

    values = trajectory_similarity(a, b)

    assert values["DTW"] == pytest.approx(22.0)
    assert values["FD"] == pytest.approx(2.0)
    assert values["PCM"] > 0.0
    assert values["Area"] == pytest.approx(20.0)
    assert values["CL"] == pytest.approx(0.0, abs=1e-12)


def test_area_between_parallel_segments():
    a = np.array([[0.0, 0.0], [10.0, 0.0]])
    b = np.array([[0.0, 2.0], [10.0, 2.0]])
    assert trajectory_similarity(a, b)["Area"] == pytest.approx(20.0)


def warping_paths(n: int, m: int):
    """Все монотонные пути сопоставления из (0, 0) в (n − 1, m − 1)"""
    if (n, m) == (1, 1):
        yield [(0, 0)]
        return
    for di, dj in ((1, 0), (0, 1), (1, 1)):
        if n - di >= 1 and m - dj >= 1:
            for path in warping_paths(n - di, m - dj):
                yield path + [(n - 1, m - 1)]


@pytest.mark.parametrize("n,m", [(2, 5), (4, 4), (6, 3), (6, 6)])
def test_dtw_matches_exhaustive_alignment(rng, n, m):
    a = rng.normal(size=(n, 2))
    b = rng.normal(size=(m, 2))
    cost = np.linalg.norm(a[:, None] - b[None], axis=2)

    best = min(sum(cost[i, j] for i, j in path) for path in warping_paths(n, m))

    assert dtw_distance(a, b) == pytest.approx(best, rel=1e-12)


def test_stationary_curve_has_undefined_pcm():
    still = np.zeros((4, 2))
    values = trajectory_similarity(still, straight_track(0.0, 0.0, 2.0, 4))

    assert np.isnan(values["PCM"])
    assert values["CL"] == pytest.approx(3.0)
    assert values["FD"] == pytest.approx(3.0)


def test_similarity_rejects_single_point():
    with pytest.raises(InvalidInputError):
        trajectory_similarity(np.zeros((1, 2)), np.zeros((3, 2)))


def test_success_degree_ignores_decreases_and_zero_baselines():
    benign = {"ADE": 1.0, "FDE": 2.0, "MR": 0.0, "ORR": 0.0}
    attacked = {"ADE": 2.0, "FDE": 1.0, "MR": 1.0, "ORR": 0.0}
    assert success_degree(benign, attacked) == pytest.approx(0.5)


def test_transfer_rate_is_ratio_of_success_degrees():
    source = ({"ADE": 1.0, "FDE": 1.0}, {"ADE": 3.0, "FDE": 3.0})
    target = ({"ADE": 1.0, "FDE": 1.0}, {"ADE": 2.0, "FDE": 2.0})
    assert transfer_rate(*source, *target) == pytest.approx(0.5)
    assert transfer_rate(*source, *source) == pytest.approx(1.0)


def test_transfer_rate_undefined_without_source_success():
    unchanged = {"ADE": 1.0, "FDE": 1.0}
    with pytest.raises(TransferUndefinedError):
        transfer_rate(unchanged, unchanged, unchanged, {"ADE": 5.0, "FDE": 5.0})


def test_sensitivity_of_coincident_paths_is_peak_gradient():
    path = straight_track(0.0, 0.0, 4.0, 5)
    cfg = MetricsConfig(interaction_weight=1.0, interaction_length=2.0)
    assert sensitivity(path, path, cfg.interaction_cost()) == pytest.approx(0.5)
    far = sensitivity(path + [0.0, 6.0], path, cfg.interaction_cost())
    assert far == pytest.approx(0.5 * np.exp(-3.0))


def test_agent_on_ego_path_is_more_sensitive_than_lateral_one(rng):
    cost = MetricsConfig().interaction_cost()
    for _ in range(20):
        heading = float(rng.uniform(-np.pi, np.pi))
        start = rng.uniform(-50.0, 50.0, 2)
        plan = straight_track(*start, float(rng.uniform(2.0, 15.0)), 12, heading=heading)
        on_path = straight_track(*start, float(rng.uniform(2.0, 15.0)), 12, heading=heading)
        lateral = on_path + 10.0 * np.array([-np.sin(heading), np.cos(heading)])

        assert sensitivity(on_path, plan, cost) > sensitivity(lateral, plan, cost)


def test_nearby_agents_respect_radius(scene):
    assert nearby_agents(scene.histories, scene.adv_index, radius=5.0).size == 0
    np.testing.assert_array_equal(nearby_agents(scene.histories, scene.adv_index, radius=7.0), [1])
    with pytest.raises(InvalidInputError):
        nearby_agents(scene.histories, scene.adv_index, radius=0.0)


def test_aggregated_sensitivity_without_neighbours_is_zero(scene):
    assert aggregated_sensitivity(scene, scene.futures, radius=1.0) == 0.0


def test_planning_aware_weights_metrics():
    result = planning_aware({"ADE": np.array([10.0, 2.0, 6.0])}, np.array([0.0, 1.0, 3.0]))
    assert result.values["PI-ADE"] == pytest.approx(5.0)
    assert not result.unweighted


def test_planning_aware_falls_back_to_plain_mean():
    result = planning_aware({"ADE": np.array([1.0, 3.0])}, np.zeros(2))
    assert result.unweighted
    assert result.values["PI-ADE"] == pytest.approx(2.0)
    with pytest.raises(InvalidInputError):
        planning_aware({"ADE": np.array([1.0, 3.0])}, np.array([-1.0, 1.0]))


def test_scene_stats_average_speed_and_curvature(scene):
    speed, curvature = scene_stats(scene)
    assert speed == pytest.approx((8.0 + 8.0 + 6.0) / 3.0, rel=1e-6)
    assert curvature == pytest.approx(0.0, abs=1e-9)


def test_bins_use_half_open_intervals():
    bins = bin_scenes({"b": (7.0, 0.1), "a": (1.0, 0.0), "c": (5.0, 0.01)})

    assert bins["speed"] == {"[0, 2)": ["a"], "[5, 10)": ["b", "c"]}
    assert bins["curvature"] == {"[0, 0.01)": ["a"], "[0.05, inf)": ["b"], "[0.01, 0.05)": ["c"]}


def test_unattacked_scene_has_no_change(scene):
    model = OraclePredictor()
    prediction = predict(model, scene)

    out = evaluate_scene(scene, prediction, prediction, scene.histories[0], map_model=road())

    assert out.benign["ADE"] == 0.0
    assert out.adversarial == out.benign
    assert out.delta_sensitivity == pytest.approx(0.0)
    assert out.motion_interaction["motion_ADE"] == 0.0
    assert out.similarity["FD"] == 0.0
    assert "ORR" in out.benign
    assert not out.violating


def test_evaluate_scene_without_map_skips_orr(scene):
    prediction = predict(ConstantVelocityPredictor(), scene)
    out = evaluate_scene(scene, prediction, prediction, scene.histories[0])
    assert "ORR" not in out.benign


def test_single_agent_interaction_is_undefined():
    base = make_scene()
    single = Scene(dt=base.dt, histories=base.histories[:1], futures=base.futures[:1], scene_id="solo")
    prediction = Prediction(single.futures[None], np.ones((1, 1)))

    out = evaluate_scene(single, prediction, prediction, single.histories[0])

    assert out.motion_interaction["interaction_defined"] is False
    assert np.isnan(out.motion_interaction["interaction_ADE"])
    assert any("interaction" in flag for flag in out.flags)


def test_aggregate_orders_scenes_and_marks_partial():
    evals = [
        SceneEval("b", benign={"ADE": 1.0}, adversarial={"ADE": 3.0}, violating=True, speed=6.0),
        SceneEval("a", benign={"ADE": 2.0}, adversarial={"ADE": 2.0}, speed=1.0),
    ]

    report = aggregate(evals, [{"scene_id": "c", "error_type": "numeric", "error": "boom"}])

    assert [s.scene_id for s in report.scenes] == ["a", "b"]
    assert report.aggregate["scenes"] == 2
    assert report.aggregate["adversarial"]["ADE"] == pytest.approx(2.5)
    assert report.aggregate["VR"] == pytest.approx(0.5)
    assert report.partial
    assert report.to_dict()["failures"][0]["scene_id"] == "c"


def test_empty_aggregate():
    report = aggregate([])
    assert report.aggregate == {"scenes": 0}
    assert not report.partial


def test_violation_rate_of_projected_attack_is_zero(scene):
    cfg = AttackConfig(pgd_steps=3, recon=ReconConfig(steps=2))
    result = attack_single(scene, ConstantVelocityPredictor(), cfg)

    assert violation_rate([result], DynamicBounds()) == 0.0
    with pytest.raises(InvalidInputError):
        violation_rate([], DynamicBounds())
