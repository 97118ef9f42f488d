"""Тесты кинематической модели: прокатки, VJP, обратная модель и проекция на границы"""

import numpy as np
import pytest

from trajectory_attack_bench.core.errors import InvalidInputError
from trajectory_attack_bench.dynamics import (
    ControlSequence,
    DynParams,
    DynState,
    DynamicBounds,
    inverse,
    l_dyn,
    l_dyn_grad,
    project_controls,
    rollout,
    rollout_pullback,
    rollout_reverse,
    rollout_reverse_pullback,
    substep_rollout,
    wrap_angle,
)


def _random_controls(rng, steps: int, dt: float = 0.1) -> ControlSequence:
    values = np.stack([rng.uniform(-1.0, 1.0, steps), rng.uniform(-0.05, 0.05, steps)], axis=1)
    return ControlSequence(dt, values)


def _objective(positions: np.ndarray, weights: np.ndarray) -> float:
    return float(np.sum(positions * weights))


def test_straight_rollout_moves_at_constant_speed():
    u = ControlSequence.constant(0.1, 10)
    traj = rollout(DynState.from_values(0.0, 0.0, 0.0, 5.0), u)

    assert len(traj) == 11
    np.testing.assert_allclose(traj.positions[:, 0], 0.5 * np.arange(11))
    np.testing.assert_allclose(traj.positions[:, 1], 0.0)
    np.testing.assert_allclose(traj.speeds, 5.0)
    assert traj.path_length() == pytest.approx(5.0)


def test_reverse_rollout_inverts_forward(rng):
    u = _random_controls(rng, 15)
    traj = rollout(DynState.from_values(1.0, -2.0, 0.3, 6.0), u)
    back = rollout_reverse(traj.last, u)

    np.testing.assert_allclose(back.positions, traj.positions, atol=1e-9)
    np.testing.assert_allclose(back.speeds, traj.speeds, atol=1e-9)
    assert back.first.heading == pytest.approx(0.3, abs=1e-9)


def test_forward_pullback_matches_finite_differences(rng):
    u = _random_controls(rng, 8)
    s0 = DynState.from_values(0.0, 0.0, 0.2, 7.0)
    weights = rng.normal(size=(9, 2))
    grad = rollout_pullback(s0, u, weights)

    h = 1e-6
    numeric = np.zeros_like(u.values)
    for idx in np.ndindex(u.values.shape):
        plus, minus = u.values.copy(), u.values.copy()
        plus[idx] += h
        minus[idx] -= h
        numeric[idx] = (
            _objective(rollout(s0, u.with_values(plus)).positions, weights)
            - _objective(rollout(s0, u.with_values(minus)).positions, weights)
        ) / (2 * h)
    np.testing.assert_allclose(grad.controls, numeric, rtol=1e-5, atol=1e-6)

    speed_plus = rollout(DynState.from_values(0.0, 0.0, 0.2, 7.0 + h), u).positions
    speed_minus = rollout(DynState.from_values(0.0, 0.0, 0.2, 7.0 - h), u).positions
    numeric_speed = (_objective(speed_plus, weights) - _objective(speed_minus, weights)) / (2 * h)
    assert grad.speed == pytest.approx(numeric_speed, rel=1e-5, abs=1e-6)
    np.testing.assert_allclose(grad.position, weights.sum(axis=0))


def test_reverse_pullback_matches_finite_differences(rng):
    u = _random_controls(rng, 8)
    s_end = DynState.from_values(10.0, 1.0, -0.1, 5.0)
    weights = rng.normal(size=(9, 2))
    grad = rollout_reverse_pullback(s_end, u, weights)

    h = 1e-6
    numeric = np.zeros_like(u.values)
    for idx in np.ndindex(u.values.shape):
        plus, minus = u.values.copy(), u.values.copy()
        plus[idx] += h
        minus[idx] -= h
        numeric[idx] = (
            _objective(rollout_reverse(s_end, u.with_values(plus)).positions, weights)
            - _objective(rollout_reverse(s_end, u.with_values(minus)).positions, weights)
        ) / (2 * h)
    np.testing.assert_allclose(grad.controls, numeric, rtol=1e-5, atol=1e-6)


def test_inverse_recovers_rollout_parameters(rng):
    u = _random_controls(rng, 12, dt=0.2)
    traj = rollout(DynState.from_values(0.0, 0.0, 0.5, 8.0), u)
    params = inverse(traj.positions, 0.2)

    np.testing.assert_allclose(params.speeds, traj.speeds[:-1], atol=1e-9)
    np.testing.assert_allclose(params.accel, u.accel[:-1], atol=1e-7)
    np.testing.assert_allclose(params.curvature, u.curvature[:-1], atol=1e-7)
    np.testing.assert_allclose(params.headings, wrap_angle(traj.headings[:-1]), atol=1e-9)
    assert not params.any_flagged


def test_inverse_flags_stationary_steps():
    positions = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    params = inverse(positions, 0.5)

    assert params.flagged[0]
    assert params.curvature[0] == 0.0
    assert params.headings[0] == pytest.approx(0.0)


@pytest.mark.parametrize(
    "positions",
    [
        np.zeros((2, 2)),
        np.array([[0.0, 0.0], [np.nan, 1.0], [2.0, 2.0]]),
        np.zeros((4, 3)),
    ],
)
def test_inverse_rejects_bad_input(positions):
    with pytest.raises(InvalidInputError):
        inverse(positions, 0.5)


def test_inverse_rejects_nonpositive_dt():
    with pytest.raises(InvalidInputError):
        inverse(np.zeros((4, 2)), 0.0)


def test_invalid_dt_rejected():
    with pytest.raises(InvalidInputError):
        ControlSequence(0.0, np.zeros((3, 2)))


@pytest.mark.parametrize("reverse", [False, True])
def test_projection_puts_every_parameter_in_bounds(rng, reverse):
    bounds = DynamicBounds()
    for _ in range(20):
        raw = np.stack([rng.uniform(-30, 30, 20), rng.uniform(-1.0, 1.0, 20)], axis=1)
        anchor_speed = float(rng.uniform(0.5, 30.0))
        values = project_controls(raw, anchor_speed, 0.1, bounds, reverse=reverse)
        u = ControlSequence(0.1, values)
        anchor = DynState.from_values(0.0, 0.0, 0.0, anchor_speed)
        traj = rollout_reverse(anchor, u) if reverse else rollout(anchor, u)
        params = DynParams.from_rollout(traj, u)

        assert not params.is_violating(bounds)
        assert np.all(traj.speeds >= bounds.speed_lb - 1e-9)
        assert np.all(traj.speeds <= bounds.speed_ub + 1e-9)


def test_projection_keeps_feasible_controls():
    bounds = DynamicBounds()
    values = np.array([[0.5, 0.01], [-0.5, -0.02], [0.0, 0.0]])
    np.testing.assert_array_equal(project_controls(values, 5.0, 0.1, bounds), values)


def test_l_dyn_is_monotone_ramp():
    bounds = DynamicBounds()
    slow = inverse(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]), 0.5)
    fast = inverse(np.array([[0.0, 0.0], [5.0, 0.0], [10.0, 0.0], [15.0, 0.0]]), 0.5)

    assert l_dyn(fast, bounds) > l_dyn(slow, bounds)
    for grad in l_dyn_grad(fast, bounds).values():
        assert np.all(grad > 0)


def test_l_dyn_term_at_upper_bound():
    bounds = DynamicBounds()
    empty = np.zeros(0)
    params = DynParams(0.5, np.zeros(1), np.array([bounds.speed_ub]), empty, empty, empty)

    assert l_dyn(params, bounds) == pytest.approx(1.5 - 1.0 / (1.0 + np.exp(-1.0)), abs=1e-12)
    assert l_dyn(params, bounds) == pytest.approx(0.76894, abs=1e-5)


def test_inverse_of_circle_gives_its_curvature():
    radius, speed, dt = 10.0, 5.0, 0.5
    theta = np.arange(16) * speed * dt / radius
    positions = radius * np.stack([np.sin(theta), 1.0 - np.cos(theta)], axis=1)

    params = inverse(positions, dt)

    np.testing.assert_allclose(params.curvature, 1.0 / radius, rtol=0.05)
    np.testing.assert_allclose(params.speeds, speed, rtol=0.05)


def test_bounds_require_ordered_intervals():
    with pytest.raises(ValueError):
        DynamicBounds(speed_lb=5.0, speed_ub=1.0)


@pytest.mark.bench
def test_rollout_matches_substepped_integration(rng):
    for _ in range(1000):
        values = np.stack([rng.uniform(-0.5, 0.5, 40), rng.uniform(-0.005, 0.005, 40)], axis=1)
        u = ControlSequence(0.05, values)
        s0 = DynState.from_values(0.0, 0.0, float(rng.uniform(-np.pi, np.pi)), float(rng.uniform(5.0, 15.0)))
        coarse = rollout(s0, u)
        fine = substep_rollout(s0, u, 100)
        error = np.linalg.norm(coarse.positions[-1] - fine.positions[-1])
        assert error <= 0.01 * fine.path_length()
