"""Геометрия столкновений, планировщики и открытый/замкнутый цикл"""

import numpy as np
import pytest
from pydantic import ValidationError

from trajectory_attack_bench.attack import AttackConfig
from trajectory_attack_bench.core.errors import InvalidInputError, PlannerError
from trajectory_attack_bench.dynamics import ControlSequence, DynamicBounds, DynState
from trajectory_attack_bench.planning import (
    Forecast,
    LatticeMPCPlanner,
    LogEpisode,
    Plan,
    PlannerConfig,
    RulePlanner,
    SimConfig,
    adversarial_fixture_set,
    box_corners,
    boxes_overlap,
    build_planner,
    detect_collision,
    detect_offroad,
    emergency_plan,
    headings_from_positions,
    interpolate_track,
    simulate,
    two_lane_road,
)
from trajectory_attack_bench.planning.lattice_mpc import track_reference
from trajectory_attack_bench.predictors import ConstantVelocityPredictor, OraclePredictor
from trajectory_attack_bench.reconstruction import ReconConfig


def stationary(x: float, y: float, steps: int = 12, dt: float = 0.5) -> Forecast:
    return Forecast(dt, np.array([[x, y]]), np.tile([x, y], (1, steps, 1)), ["blocker"])


def ego(speed: float = 10.0) -> DynState:
    return DynState.from_values(0.0, 0.0, 0.0, speed)


def test_boxes_overlap_by_separating_axis():
    a = box_corners([0.0, 0.0], 0.0, (4.0, 2.0))
    assert boxes_overlap(a, box_corners([3.5, 0.0], 0.0, (4.0, 2.0)))
    assert not boxes_overlap(a, box_corners([4.5, 0.0], 0.0, (4.0, 2.0)))
    assert not boxes_overlap(a, box_corners([0.0, 2.5], 0.0, (4.0, 2.0)))
    assert boxes_overlap(a, box_corners([2.5, 1.5], np.pi / 4, (4.0, 2.0)))


def test_headings_hold_through_stops():
    positions = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 1.0], [1.0, 2.0]])
    np.testing.assert_allclose(headings_from_positions(positions), [0.0, 0.0, np.pi / 2, np.pi / 2, np.pi / 2])


def test_interpolate_track_holds_ends():
    track = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    np.testing.assert_allclose(interpolate_track(track, 0.5, [-1.0, 0.25, 5.0]), [[0.0, 0.0], [0.5, 0.0], [2.0, 0.0]])


def test_collision_reports_onsets_only():
    steps = 6
    ego_positions = np.zeros((steps, 2))
    agent = np.array([[[10.0, 0.0], [2.0, 0.0], [1.0, 0.0], [10.0, 0.0], [1.0, 0.0], [10.0, 0.0]]])

    events = detect_collision(ego_positions, np.zeros(steps), agent, np.zeros((1, steps)), ["a"])
    every = detect_collision(ego_positions, np.zeros(steps), agent, np.zeros((1, steps)), ["a"], onset_only=False)

    assert [e.step for e in events] == [1, 4]
    assert [e.step for e in every] == [1, 2, 4]


def test_offroad_onsets():
    road = two_lane_road()
    positions = np.array([[0.0, 0.0], [0.0, 9.0], [0.0, 9.5], [0.0, 1.0], [0.0, -5.0]])
    assert [e.step for e in detect_offroad(positions, road)] == [1, 4]


def test_rule_planner_keeps_speed_on_empty_road():
    plan = RulePlanner().plan(ego(), two_lane_road(), Forecast.empty(0.5, 12), 6.0)

    assert plan.final_speed == pytest.approx(10.0, abs=1e-6)
    assert np.max(np.abs(plan.positions[:, 1])) < 1e-6
    assert plan.is_feasible(DynamicBounds())


def test_rule_planner_stops_behind_blocking_agent():
    plan = RulePlanner().plan(ego(), two_lane_road(), stationary(30.0, 0.0), 6.0)

    assert plan.final_speed < 0.5
    assert plan.positions[-1, 0] < 30.0 - 4.0
    assert np.all(plan.states.speeds >= -1e-9)
    assert plan.is_feasible(DynamicBounds())


def test_rule_planner_ignores_agents_in_other_lane():
    plan = RulePlanner().plan(ego(), two_lane_road(), stationary(30.0, 3.5), 6.0)
    assert plan.final_speed == pytest.approx(10.0, abs=1e-6)


def test_rule_planner_needs_a_lane():
    lost = DynState.from_values(0.0, 50.0, 0.0, 10.0)
    with pytest.raises(PlannerError):
        RulePlanner().plan(lost, two_lane_road(), Forecast.empty(0.5, 12), 6.0)


def test_lattice_keeps_centre_on_empty_road():
    plan = LatticeMPCPlanner().plan(ego(), two_lane_road(), Forecast.empty(0.5, 12), 6.0)

    assert plan.offset == 0.0
    assert not plan.emergency
    assert plan.is_feasible(DynamicBounds())
    assert plan.final_speed == pytest.approx(10.0, abs=0.5)


def test_lattice_avoids_blocking_agent():
    forecast = stationary(25.0, 0.0)

    plan = LatticeMPCPlanner().plan(ego(), two_lane_road(), forecast, 6.0)

    assert plan.emergency or plan.offset != 0.0
    headings = plan.states.headings
    agents = np.tile([25.0, 0.0], (1, len(plan.positions), 1))
    assert detect_collision(plan.positions, headings, agents, np.zeros((1, len(plan.positions))), ["blocker"]) == []


def test_mpc_tracking_keeps_controls_inside_the_box():
    # поворот радиусом 2 м требует кривизны 0.5 при границе 0.3
    times = np.linspace(0.0, 1.0, 61)
    reference = np.stack([2.0 * np.sin(times * np.pi / 2), 2.0 - 2.0 * np.cos(times * np.pi / 2)], axis=1)
    bounds = DynamicBounds()

    controls = track_reference(ego(12.0), reference, 12.0, bounds)

    assert len(controls) == 60
    assert np.all(controls.values[:, 0] >= bounds.accel_lb - 1e-9)
    assert np.all(controls.values[:, 0] <= bounds.accel_ub + 1e-9)
    assert np.all(np.abs(controls.values[:, 1]) <= bounds.curvature_ub + 1e-9)
    assert Plan("lattice-mpc", ego(12.0), controls).is_feasible(bounds)


def test_mpc_tracking_of_straight_reference_needs_no_steering():
    reference = np.stack([10.0 * 0.1 * np.arange(61), np.zeros(61)], axis=1)

    controls = track_reference(ego(10.0), reference, 10.0, DynamicBounds())

    np.testing.assert_allclose(controls.values, 0.0, atol=1e-3)


def test_emergency_plan_brakes_to_stop():
    plan = emergency_plan(ego(8.0), 6.0, DynamicBounds())

    assert plan.emergency
    assert np.all(np.diff(plan.states.speeds) <= 1e-9)
    assert plan.final_speed == pytest.approx(0.0, abs=1e-6)


def test_plan_resampling_requires_divisor():
    plan = Plan("rule", ego(), ControlSequence.constant(0.5, 4, 0.0, 0.0))
    assert plan.resampled(0.1).values.shape == (20, 2)
    with pytest.raises(InvalidInputError):
        plan.resampled(0.3)


def test_sim_config_checks_timing():
    assert SimConfig(duration=6.0, replan_interval=0.5).expected_replans == 12
    assert SimConfig(mode="open").expected_replans == 1
    with pytest.raises(ValidationError):
        SimConfig(duration=6.0, replan_interval=0.7)
    with pytest.raises(ValidationError):
        SimConfig(mode="open", duration=6.0, horizon=3.0)


def test_build_planner_by_kind():
    assert build_planner(PlannerConfig(kind="lattice-mpc")).name == "lattice-mpc"
    assert build_planner().name == "rule"


def test_fixture_set_is_seeded():
    first = adversarial_fixture_set(seed=2)
    second = adversarial_fixture_set(seed=2)

    assert len(first) == 10
    assert [e.episode_id for e in first][:2] == ["lead_brake_0", "lead_brake_1"]
    np.testing.assert_array_equal(first[5].positions, second[5].positions)


def test_episode_rejects_ego_as_adversary():
    episode = adversarial_fixture_set()[0]
    with pytest.raises(InvalidInputError):
        LogEpisode("bad", episode.dt, episode.positions, 0, 0, 8, episode.map_model)


def test_closed_loop_replans_on_schedule():
    episode = adversarial_fixture_set()[0]
    cfg = SimConfig(mode="closed", duration=6.0, replan_interval=0.5)

    outcome = simulate(episode, OraclePredictor(), RulePlanner(), cfg)

    assert outcome.replans == cfg.expected_replans
    assert outcome.positions.shape == (cfg.total_steps + 1, 2)
    assert not outcome.collided
    assert not outcome.attacked
    assert outcome.to_dict()["mode"] == "closed"


def test_open_loop_plans_once():
    episode = adversarial_fixture_set()[4]
    outcome = simulate(episode, ConstantVelocityPredictor(), RulePlanner(), SimConfig(mode="open"))

    assert outcome.replans == 1
    assert outcome.positions.shape[0] == SimConfig(mode="open").total_steps + 1


def test_simulation_needs_long_enough_log():
    episode = adversarial_fixture_set()[0]
    with pytest.raises(InvalidInputError):
        simulate(episode, OraclePredictor(), RulePlanner(), SimConfig(duration=12.0, horizon=12.0))


@pytest.mark.bench
def test_attacked_closed_loop_runs_sequential_attack():
    episode = adversarial_fixture_set()[4]
    cfg = SimConfig(mode="closed", duration=2.0, replan_interval=0.5, lp=3)
    attack = AttackConfig(pgd_steps=3, recon=ReconConfig(steps=2))

    outcome = simulate(episode, ConstantVelocityPredictor(), RulePlanner(), cfg, attack=attack)

    assert outcome.attacked
    assert outcome.replans == cfg.expected_replans


@pytest.mark.bench
@pytest.mark.parametrize("kind", ["rule", "lattice-mpc"])
def test_oracle_predictor_drives_benign_fixtures_safely(kind):
    planner = build_planner(PlannerConfig(kind=kind))
    cfg = SimConfig(mode="closed", replan_interval=0.5, horizon=6.0)

    outcomes = [simulate(e, OraclePredictor(), planner, cfg) for e in adversarial_fixture_set()]

    assert [o.episode_id for o in outcomes if o.collided] == []
    assert [o.episode_id for o in outcomes if o.offroad] == []


@pytest.mark.bench
@pytest.mark.parametrize("kind", ["rule", "lattice-mpc"])
def test_attack_causes_closed_loop_failures(kind):
    planner = build_planner(PlannerConfig(kind=kind))
    cfg = SimConfig(mode="closed", replan_interval=0.5, horizon=6.0, seed=0)
    episodes = adversarial_fixture_set(seed=0)

    benign = [simulate(e, ConstantVelocityPredictor(), planner, cfg) for e in episodes]
    attacked = [simulate(e, ConstantVelocityPredictor(), planner, cfg, attack=AttackConfig()) for e in episodes]

    assert sum(o.failed for o in benign) == 0
    assert sum(o.failed for o in attacked) >= 3
    assert all(o.attacked for o in attacked)
