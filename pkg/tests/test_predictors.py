"""Суррогаты, градиенты по историям, сохранение моделей и мост"""

import sys
from pathlib import Path

import numpy as np
import pytest

from conftest import adv_ade, bicycle_track, make_scene
from trajectory_attack_bench.attack import AttackConfig, attack_single
from trajectory_attack_bench.core.errors import CapabilityError, InvalidInputError
from trajectory_attack_bench.predictors import (
    BridgePredictor,
    ConstantVelocityPredictor,
    KinematicExtrapolationPredictor,
    OraclePredictor,
    Prediction,
    Scene,
    SocialMLPPredictor,
    SurrogateSpec,
    build_surrogate,
    finite_difference_pullback,
    load_model,
    model_pullback,
    predict,
    save_model,
    train_surrogate,
    training_ade,
)
from trajectory_attack_bench.predictors.adversarial import adversarial_train
from trajectory_attack_bench.predictors.bridge_server import handle
from trajectory_attack_bench.reconstruction import ReconConfig
from trajectory_attack_bench.workbench import SynthSpec, synthesize_scenes

ROOT = Path(__file__).resolve().parents[1]


def social_model(seed: int = 1) -> SocialMLPPredictor:
    return SocialMLPPredictor(SurrogateSpec(kind="social-mlp", seed=seed, num_modes=3, hidden_size=16, init_scale=0.3))


def output_weights(model: SocialMLPPredictor) -> np.ndarray:
    return model.net.fc2.weight.detach().numpy()


def bridge_command(*flags: str):
    code = (
        f"import sys; sys.path.insert(0, {str(ROOT)!r}); "
        "from trajectory_attack_bench.predictors.bridge_server import main; "
        f"sys.exit(main({list(flags)!r}))"
    )
    return [sys.executable, "-c", code]


def test_constant_velocity_continues_last_displacement(scene):
    prediction = predict(ConstantVelocityPredictor(), scene)

    assert prediction.modes.shape == (1, 3, 12, 2)
    np.testing.assert_allclose(prediction.modes[0], scene.futures, atol=1e-9)
    np.testing.assert_allclose(prediction.probs, np.ones((3, 1)))


def test_kinematic_extrapolation_stays_on_constant_turn():
    track = bicycle_track(speed=8.0, accel=0.0, curvature=0.05, steps=16)
    scene = Scene(
        dt=0.5,
        histories=np.stack([track[:4], track[:4] + [0.0, 20.0]]),
        futures=np.stack([track[4:], track[4:] + [0.0, 20.0]]),
        adv_index=0,
        ego_index=1,
    )

    prediction = predict(KinematicExtrapolationPredictor(), scene)

    np.testing.assert_allclose(prediction.modes[0], scene.futures, atol=1e-6)


@pytest.mark.parametrize("offset", [(0.0, 0.0), (120.0, -35.0), (-3.5, 1e3)])
def test_constant_velocity_is_translation_equivariant(scene, offset):
    c = np.asarray(offset)
    moved = Scene(dt=scene.dt, histories=scene.histories + c, futures=scene.futures + c, adv_index=0, ego_index=1)

    base = predict(ConstantVelocityPredictor(), scene).modes
    shifted = predict(ConstantVelocityPredictor(), moved).modes

    np.testing.assert_allclose(shifted, base + c, atol=1e-9)


def test_oracle_returns_recorded_future_without_gradient(scene, rng):
    model = OraclePredictor()
    cot = rng.normal(size=(1, 3, 12, 2))

    np.testing.assert_array_equal(predict(model, scene).most_likely(), scene.futures)
    np.testing.assert_array_equal(model_pullback(model, scene, cot), np.zeros_like(scene.histories))


@pytest.mark.parametrize(
    "model",
    [ConstantVelocityPredictor(), KinematicExtrapolationPredictor(), social_model()],
    ids=["constant-velocity", "kinematic-extrapolation", "social-mlp"],
)
def test_exact_pullback_matches_finite_differences(model, rng):
    scene = make_scene()
    histories = scene.histories + rng.normal(scale=0.2, size=scene.histories.shape)
    cot = rng.normal(size=(model.num_modes, scene.num_agents, scene.future_len, 2))

    exact = model_pullback(model, scene, cot, histories)
    numeric = finite_difference_pullback(model, scene, cot, histories)

    np.testing.assert_allclose(exact, numeric, rtol=1e-4, atol=1e-5)


def test_zero_cotangent_gives_zero_gradient(scene):
    cot = np.zeros((1, 3, 12, 2))
    np.testing.assert_array_equal(model_pullback(ConstantVelocityPredictor(), scene, cot), 0.0)


def test_pullback_rejects_wrong_cotangent_shape(scene):
    with pytest.raises(InvalidInputError):
        model_pullback(ConstantVelocityPredictor(), scene, np.ones((2, 3, 12, 2)))


class _NoGradient(ConstantVelocityPredictor):
    name = "no-gradient"
    has_exact_gradient = False

    def backward(self, histories, scene, cotangent):
        raise AssertionError("точный градиент не должен вызываться")


def test_missing_gradient_falls_back_to_finite_differences(scene, rng):
    cot = rng.normal(size=(1, 3, 12, 2))
    model = _NoGradient()

    numeric = model_pullback(model, scene, cot)
    exact = model_pullback(ConstantVelocityPredictor(), scene, cot)

    np.testing.assert_allclose(numeric, exact, rtol=1e-5, atol=1e-6)


def test_missing_gradient_without_fallback_raises(scene):
    model = _NoGradient()
    model.allow_finite_difference = False

    with pytest.raises(CapabilityError):
        model_pullback(model, scene, np.ones((1, 3, 12, 2)))


def test_predict_rejects_history_shape_mismatch(scene):
    with pytest.raises(InvalidInputError):
        predict(ConstantVelocityPredictor(), scene, scene.histories[:, 1:])


def test_social_mlp_rejects_other_window_lengths():
    scene = make_scene(history_len=6)
    with pytest.raises(InvalidInputError):
        predict(social_model(), scene)


def test_prediction_checks_probability_shape():
    with pytest.raises(InvalidInputError):
        Prediction(np.zeros((2, 3, 5, 2)), np.full((3, 3), 1.0 / 3.0))


def test_min_error_rule_picks_closest_mode(scene):
    far = scene.futures + 5.0
    prediction = Prediction(np.stack([far, scene.futures]), np.tile([0.9, 0.1], (3, 1)))

    np.testing.assert_array_equal(prediction.select_modes("most-likely"), [0, 0, 0])
    np.testing.assert_array_equal(prediction.select_modes("min-error", scene.futures), [1, 1, 1])
    with pytest.raises(InvalidInputError):
        prediction.select_modes("min-error")


def test_saved_social_mlp_predicts_the_same(tmp_path, scene):
    model = social_model(seed=7)
    path = save_model(model, tmp_path / "model.npz")

    restored = load_model(path)

    assert isinstance(restored, SocialMLPPredictor)
    assert restored.spec == model.spec
    np.testing.assert_array_equal(predict(restored, scene).modes, predict(model, scene).modes)


def test_analytic_surrogate_is_saved_by_kind(tmp_path):
    path = save_model(KinematicExtrapolationPredictor(), tmp_path / "ke.npz")
    assert isinstance(load_model(path), KinematicExtrapolationPredictor)


def test_oracle_cannot_be_saved(tmp_path):
    with pytest.raises(InvalidInputError):
        save_model(OraclePredictor(), tmp_path / "oracle.npz")


def test_load_missing_model_raises(tmp_path):
    with pytest.raises(InvalidInputError):
        load_model(tmp_path / "absent.npz")


def test_training_reduces_wta_loss(small_suite):
    spec = SurrogateSpec(kind="social-mlp", seed=0, num_modes=2, hidden_size=16)

    model, trace = train_surrogate(small_suite.scenes, spec, epochs=30, lr=1e-2)

    assert len(trace) == 30
    assert trace[-1] < trace[0]
    assert all(np.isfinite(training_ade(model, s)) for s in small_suite.scenes)


def test_training_is_deterministic_for_seed(small_suite):
    spec = SurrogateSpec(kind="social-mlp", seed=4, num_modes=2, hidden_size=8)

    first, trace_a = train_surrogate(small_suite.scenes, spec, epochs=3)
    second, trace_b = train_surrogate(small_suite.scenes, spec, epochs=3)

    assert trace_a == trace_b
    np.testing.assert_array_equal(output_weights(first), output_weights(second))


def test_analytic_training_reports_constant_loss(small_suite):
    model, trace = train_surrogate(small_suite.scenes, SurrogateSpec(kind="constant-velocity"), epochs=4)

    assert isinstance(model, ConstantVelocityPredictor)
    assert len(set(trace)) == 1


def test_training_on_empty_dataset_raises():
    with pytest.raises(InvalidInputError):
        train_surrogate([], SurrogateSpec())


def test_bridge_server_handles_requests(scene):
    model = build_surrogate(SurrogateSpec(kind="constant-velocity"))
    request = {"cmd": "predict", "dt": scene.dt, "T": scene.future_len, "X": scene.histories.tolist()}

    reply = handle(model, request)

    np.testing.assert_allclose(np.asarray(reply["modes"])[0], scene.futures, atol=1e-9)
    assert handle(model, {"cmd": "grad", "X": scene.histories.tolist(), "dY": []}, with_grad=False) == {
        "error": "unsupported"
    }
    assert handle(model, {"cmd": "shutdown"}) is None
    assert "error" in handle(model, {"cmd": "dance"})


def test_bridge_predictor_matches_in_process_model(scene, rng):
    cot = rng.normal(size=(1, 3, 12, 2))
    reference = KinematicExtrapolationPredictor()

    with BridgePredictor(bridge_command("--kind", "kinematic-extrapolation"), timeout=30.0) as bridge:
        modes = predict(bridge, scene).modes
        grad = model_pullback(bridge, scene, cot)

    np.testing.assert_allclose(modes, predict(reference, scene).modes, atol=1e-9)
    np.testing.assert_allclose(grad, model_pullback(reference, scene, cot), atol=1e-9)


def test_bridge_without_gradient_uses_finite_differences(scene, rng):
    cot = rng.normal(size=(1, 3, 12, 2))

    with BridgePredictor(bridge_command("--no-grad"), timeout=30.0) as bridge:
        grad = model_pullback(bridge, scene, cot)
        assert bridge.has_exact_gradient is False

    np.testing.assert_allclose(grad, model_pullback(ConstantVelocityPredictor(), scene, cot), rtol=1e-4, atol=1e-5)


def test_bridge_without_gradient_and_fallback_raises(scene):
    with BridgePredictor(bridge_command("--no-grad"), timeout=30.0, allow_finite_difference=False) as bridge:
        with pytest.raises(CapabilityError):
            model_pullback(bridge, scene, np.ones((1, 3, 12, 2)))


def test_adversarial_training_leaves_source_model_untouched(small_suite):
    model = social_model(seed=2)
    before = output_weights(model).copy()
    cfg = AttackConfig(pgd_steps=2, recon=ReconConfig(steps=2))

    robust, trace = adversarial_train(model, small_suite.scenes[:3], cfg, epochs=2, lr=1e-2)

    assert len(trace) == 2
    assert all(np.isfinite(trace))
    np.testing.assert_array_equal(output_weights(model), before)
    assert not np.array_equal(output_weights(robust), before)


def test_adversarial_training_needs_social_mlp(small_suite):
    with pytest.raises(InvalidInputError):
        adversarial_train(ConstantVelocityPredictor(), small_suite.scenes, AttackConfig(), epochs=1)


@pytest.mark.bench
def test_social_mlp_overfits_single_scene():
    scene = make_scene()
    spec = SurrogateSpec(kind="social-mlp", seed=0, num_modes=2, hidden_size=64)

    model, trace = train_surrogate([scene], spec, epochs=3000, lr=5e-3)

    assert trace[-1] < trace[0]
    assert training_ade(model, scene) < 0.1


@pytest.mark.bench
def test_adversarial_training_lowers_adversarial_ade():
    suite = synthesize_scenes(SynthSpec(), 60, seed=5)
    train, held_out = suite.scenes[:40], suite.scenes[40:]
    model, _ = train_surrogate(train, SurrogateSpec(kind="social-mlp", seed=0), epochs=100)
    robust, trace = adversarial_train(model, train, AttackConfig(pgd_steps=10), epochs=30, lr=5e-3)
    attack = AttackConfig()

    def adversarial_ade(m: SocialMLPPredictor) -> float:
        errors = []
        for scene in held_out:
            result = attack_single(scene, m, attack)
            errors.append(adv_ade(m, scene.with_agent_history(scene.adv_index, result.history)))
        return float(np.mean(errors))

    assert all(np.isfinite(trace))
    assert adversarial_ade(robust) < adversarial_ade(model)
