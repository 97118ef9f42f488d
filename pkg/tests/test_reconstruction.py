"""Тесты реконструкции плотных траекторий"""

import numpy as np
import pytest
from conftest import bicycle_track, straight_track

from trajectory_attack_bench.core.errors import InvalidInputError
from trajectory_attack_bench.dynamics import DynamicBounds
from trajectory_attack_bench.reconstruction import (
    ReconConfig,
    interpolate_positions,
    knot_mse,
    linear_interpolate,
    recon_loss,
    reconstruct,
    reconstruct_with_trace,
)


def test_interpolation_passes_through_knots():
    history = np.array([[0.0, 0.0], [2.0, 0.0], [2.0, 2.0]])
    dense = interpolate_positions(history, 4)

    assert dense.shape == (9, 2)
    np.testing.assert_allclose(dense[::4], history)
    np.testing.assert_allclose(dense[2], [1.0, 0.0])
    np.testing.assert_allclose(dense[6], [2.0, 1.0])


def test_linear_interpolation_of_straight_history_is_exact():
    history = straight_track(0.0, 0.0, 8.0, 4)
    dense = linear_interpolate(history, 5, 0.5)

    assert dense.dt == pytest.approx(0.1)
    assert len(dense.controls) == 15
    np.testing.assert_allclose(dense.knots, history, atol=1e-9)
    np.testing.assert_allclose(dense.controls.values, 0.0, atol=1e-9)


def test_linear_interpolation_rejects_bad_factor():
    with pytest.raises(InvalidInputError):
        linear_interpolate(straight_track(0.0, 0.0, 8.0, 4), 0, 0.5)


def test_reconstruct_straight_history():
    history = straight_track(3.0, -1.0, 10.0, 4, heading=0.4)
    dense, params = reconstruct(history, ReconConfig(steps=20), 0.5)

    assert knot_mse(dense.positions, history, dense.factor) < 1e-10
    assert not params.is_violating(DynamicBounds())
    np.testing.assert_allclose(dense.positions[0], history[0])


def test_reconstruction_trace_never_increases():
    history = bicycle_track(8.0, 0.4, 0.05, 4)
    result = reconstruct_with_trace(history, ReconConfig(steps=30), 0.5)

    assert len(result.trace) >= 1
    assert all(b <= a + 1e-12 for a, b in zip(result.trace, result.trace[1:]))
    assert not result.params.is_violating(ReconConfig().bounds)
    assert result.knot_mse <= result.trace[0] + 1e-12


def test_reconstruction_never_ends_worse_than_projected_start():
    history = straight_track(0.0, 0.0, 8.0, 4)
    history[1::2, 1] += 1.5
    result = reconstruct_with_trace(history, ReconConfig(steps=10), 0.5)

    # зигзаг не проходим в границах кривизны: старт после проекции уже не на узлах
    assert result.start_knot_mse > 0.0
    assert result.knot_mse <= result.start_knot_mse + 1e-12
    assert not result.params.is_violating(ReconConfig().bounds)


def test_reconstruction_is_repeatable():
    history = bicycle_track(8.0, 0.4, 0.05, 4)

    first = reconstruct_with_trace(history, ReconConfig(steps=15), 0.5)
    second = reconstruct_with_trace(history, ReconConfig(steps=15), 0.5)

    assert first.trace == second.trace
    np.testing.assert_array_equal(first.dense.positions, second.dense.positions)


def test_reconstruction_without_steps_returns_interpolation():
    history = bicycle_track(6.0, 0.0, 0.02, 4)
    result = reconstruct_with_trace(history, ReconConfig(steps=0), 0.5)

    assert result.trace == []
    np.testing.assert_allclose(result.dense.positions, linear_interpolate(history, 5, 0.5).positions)


def test_reconstruction_requires_three_knots():
    with pytest.raises(InvalidInputError):
        reconstruct(straight_track(0.0, 0.0, 5.0, 2), ReconConfig(), 0.5)


def test_recon_loss_of_exact_dense_trajectory_is_knot_free():
    history = straight_track(0.0, 0.0, 8.0, 4)
    dense = linear_interpolate(history, 5, 0.5)

    assert recon_loss(dense.controls, dense.start, history, DynamicBounds(), dyn_weight=0.0) < 1e-18
    assert recon_loss(dense.controls, dense.start, history, DynamicBounds(), dyn_weight=1.0) > 0.0


def test_recon_loss_rejects_mismatched_grid():
    history = straight_track(0.0, 0.0, 8.0, 4)
    dense = linear_interpolate(history, 5, 0.5)
    with pytest.raises(InvalidInputError):
        recon_loss(dense.controls, dense.start, history[:3], DynamicBounds())


def test_reanchoring_keeps_positions():
    dense, _ = reconstruct(bicycle_track(7.0, 0.2, 0.03, 4), ReconConfig(steps=5), 0.5)
    end = dense.reanchored("end")

    assert end.anchored_at == "end"
    np.testing.assert_allclose(end.positions, dense.positions, atol=1e-9)
    np.testing.assert_array_equal(end.positions[-1], dense.positions[-1])


@pytest.mark.bench
def test_reconstruction_of_subsampled_rollouts(rng):
    cfg = ReconConfig(steps=100)
    for _ in range(200):
        history = bicycle_track(
            float(rng.uniform(5.0, 10.0)), float(rng.uniform(-0.5, 0.5)), float(rng.uniform(-0.01, 0.01)), 4
        )
        result = reconstruct_with_trace(history, cfg, 0.5)
        assert result.knot_mse < 1e-3
        assert not result.params.is_violating(cfg.bounds)
