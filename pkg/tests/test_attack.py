"""Слагаемые потерь, PGD по управлениям, базовые линии и аугментация"""

import numpy as np
import pytest

from conftest import adv_ade, bicycle_track, make_scene, straight_track
from trajectory_attack_bench.attack import (
    AttackConfig,
    adv_loss,
    adv_loss_and_grad,
    attack_random,
    attack_search,
    attack_sequential,
    attack_single,
    build_problem,
    direction_vector,
    frame_losses,
    generate_augmentation,
    l_bh,
    l_col,
    l_obj,
)
from trajectory_attack_bench.core.errors import InvalidInputError
from trajectory_attack_bench.metrics import result_violations, violation_rate
from trajectory_attack_bench.predictors import (
    ConstantVelocityPredictor,
    KinematicExtrapolationPredictor,
    Scene,
    SurrogateSpec,
    train_surrogate,
)
from trajectory_attack_bench.reconstruction import ReconConfig
from trajectory_attack_bench.workbench import SynthSpec, synthesize_scenes


def curved_scene(history_len: int = 4, future_len: int = 12) -> Scene:
    """Атакующий агент входит в плавный левый поворот, эго едет прямо рядом"""
    total = history_len + future_len
    adv = bicycle_track(speed=8.0, accel=0.0, curvature=0.03, steps=total) + [0.0, 3.5]
    tracks = np.stack([adv, straight_track(-5.0, 0.0, 8.0, total), straight_track(25.0, 0.0, 6.0, total)])
    return Scene(
        dt=0.5,
        histories=tracks[:, :history_len],
        futures=tracks[:, history_len:],
        adv_index=0,
        ego_index=1,
        agent_ids=["adv", "ego", "lead"],
        scene_id="curve",
    )


def attack_cfg(**overrides) -> AttackConfig:
    values = {"pgd_steps": 8, "recon": ReconConfig(steps=3)}
    values.update(overrides)
    return AttackConfig(**values)


def test_l_obj_is_mean_step_distance():
    truth = np.zeros((4, 2))
    assert l_obj(truth, truth + [3.0, 4.0]) == pytest.approx(5.0)
    assert l_obj(truth, truth) == 0.0


def test_l_obj_min_error_rule_uses_closest_mode():
    truth = np.zeros((3, 2))
    modes = np.stack([truth + 10.0, truth + [1.0, 0.0]])
    assert l_obj(truth, modes, np.array([0.8, 0.2]), rule="most-likely") == pytest.approx(np.hypot(10.0, 10.0))
    assert l_obj(truth, modes, np.array([0.8, 0.2]), rule="min-error") == pytest.approx(1.0)


def test_l_col_without_others_is_zero():
    assert l_col(np.zeros((5, 2)), np.zeros((0, 5, 2))) == 0.0


def test_l_col_is_reciprocal_distance():
    dense = np.zeros((3, 2))
    others = np.tile([3.0, 0.0], (1, 3, 1))
    assert l_col(dense, others) == pytest.approx(0.25)


def test_l_bh_is_zero_on_reference_and_grows():
    reference = straight_track(0.0, 0.0, 5.0, 6)
    assert l_bh(reference, reference, eps=1.0) == pytest.approx(0.0)
    near = l_bh(reference + [0.0, 0.5], reference, eps=1.0)
    far = l_bh(reference + [0.0, 2.0], reference, eps=1.0)
    assert 0.0 < near < far


def test_adv_loss_breakdown_recomposes(scene):
    cfg = attack_cfg()
    problem = build_problem(scene, cfg)

    total, terms = adv_loss(scene, ConstantVelocityPredictor(), problem.initial_dense("opt-init"), cfg, problem)

    assert terms["l_obj"] == pytest.approx(0.0, abs=1e-3)
    expected = -terms["l_obj"] + cfg.alpha * terms["l_col"] + cfg.beta * terms["l_bh"] + cfg.gamma * terms["l_dyn"]
    assert total == pytest.approx(expected)


@pytest.mark.parametrize("variant", ["opt-init", "opt-end"])
def test_control_gradient_matches_finite_differences(variant, rng):
    scene = curved_scene()
    cfg = attack_cfg(variant=variant)
    model = ConstantVelocityPredictor()
    problem = build_problem(scene, cfg)
    start = problem.initial_dense(variant)
    dense = start.with_controls(start.controls.values + rng.normal(scale=[0.05, 0.002], size=start.controls.values.shape))

    _, grad = adv_loss_and_grad(problem, model, dense, cfg)

    step = 1e-6
    numeric = np.zeros_like(grad)
    values = dense.controls.values
    for idx in np.ndindex(*values.shape):
        plus, minus = values.copy(), values.copy()
        plus[idx] += step
        minus[idx] -= step
        up, _ = adv_loss_and_grad(problem, model, dense.with_controls(plus), cfg, with_grad=False)
        down, _ = adv_loss_and_grad(problem, model, dense.with_controls(minus), cfg, with_grad=False)
        numeric[idx] = (up.total - down.total) / (2 * step)

    np.testing.assert_allclose(grad, numeric, rtol=1e-3, atol=1e-5)


def test_zero_steps_keep_the_start():
    result = attack_single(curved_scene(), ConstantVelocityPredictor(), attack_cfg(pgd_steps=0))

    assert result.best_step == 0
    assert len(result.trace) == 1
    assert result.queries == 1


def test_pgd_never_ends_worse_and_stays_in_ball():
    scene = curved_scene()
    cfg = attack_cfg(pgd_steps=10)

    result = attack_single(scene, KinematicExtrapolationPredictor(), cfg)

    assert len(result.trace) == cfg.pgd_steps + 1
    assert result.best_loss <= result.trace[0]
    assert result.best_loss == min(result.trace)
    assert result.max_knot_deviation(scene.histories[0]) <= cfg.eps
    assert result.feasible
    assert not result.is_violating


def zigzag_scene() -> Scene:
    """История атакующего агента с поперечными скачками 1.5 м на каждом шаге"""
    scene = make_scene()
    history = scene.histories[0].copy()
    history[1::2, 1] += 1.5
    return scene.with_agent_history(0, history)


@pytest.mark.parametrize("variant", ["opt-init", "opt-end"])
def test_poorly_reconstructed_history_stays_in_true_ball(variant):
    scene = zigzag_scene()
    cfg = AttackConfig(eps=0.2, pgd_steps=5, variant=variant, recon=ReconConfig(steps=3))

    result = attack_single(scene, ConstantVelocityPredictor(), cfg)

    assert result.max_knot_deviation(scene.histories[0]) <= cfg.eps
    if not result.feasible:
        np.testing.assert_array_equal(result.history, scene.histories[0])
        assert result.best_step == 0
        assert not result_violations(result, cfg.bounds)


def test_random_search_stays_in_true_ball():
    scene = zigzag_scene()
    cfg = AttackConfig(eps=0.2, pgd_steps=5, recon=ReconConfig(steps=3))

    result = attack_random(scene, ConstantVelocityPredictor(), cfg)

    assert result.max_knot_deviation(scene.histories[0]) <= cfg.eps


def test_pgd_is_deterministic():
    scene = curved_scene()
    first = attack_single(scene, ConstantVelocityPredictor(), attack_cfg())
    second = attack_single(scene, ConstantVelocityPredictor(), attack_cfg())

    assert first.trace == second.trace
    np.testing.assert_array_equal(first.history, second.history)


def test_variants_keep_their_anchor():
    scene = curved_scene()
    opt_init = attack_single(scene, ConstantVelocityPredictor(), attack_cfg(variant="opt-init"))
    opt_end = attack_single(scene, ConstantVelocityPredictor(), attack_cfg(variant="opt-end"))

    np.testing.assert_allclose(opt_init.dense.positions[0], opt_init.benign.positions[0], atol=1e-9)
    np.testing.assert_allclose(opt_end.dense.positions[-1], scene.histories[0, -1], atol=1e-9)
    assert opt_init.variant == "opt-init"
    assert opt_end.variant == "opt-end"


def test_sequential_attack_sums_frame_losses():
    scene = curved_scene(history_len=6, future_len=10)
    cfg = attack_cfg(lp=3, pgd_steps=4)

    result = attack_sequential(scene, ConstantVelocityPredictor(), cfg)
    frames = frame_losses(scene, ConstantVelocityPredictor(), result, cfg)

    assert result.history.shape == (6, 2)
    assert len(frames["frames"]) == 3
    assert frames["total"] == pytest.approx(sum(frames["frames"]))
    assert frames["total"] == pytest.approx(result.best_loss)


def test_sequential_attack_needs_enough_history():
    with pytest.raises(InvalidInputError):
        attack_sequential(curved_scene(), ConstantVelocityPredictor(), attack_cfg(lp=4))


def test_random_search_uses_same_budget():
    scene = curved_scene()
    cfg = attack_cfg(pgd_steps=6, seed=11)

    first = attack_random(scene, ConstantVelocityPredictor(), cfg)
    second = attack_random(scene, ConstantVelocityPredictor(), cfg)

    assert first.method == "random"
    assert first.queries == cfg.pgd_steps + 1
    assert first.trace == second.trace
    assert first.best_loss <= first.trace[0]


def test_knot_search_stays_in_eps_ball():
    scene = curved_scene()
    cfg = attack_cfg(pgd_steps=6, eps=0.5)

    result = attack_search(scene, ConstantVelocityPredictor(), cfg)

    assert result.method == "search"
    assert result.max_knot_deviation(scene.histories[0]) <= cfg.eps + 1e-9
    assert result.trace[result.best_step] == min(result.trace)


def test_direction_vectors_are_relative_to_heading():
    np.testing.assert_allclose(direction_vector("forward", 0.0), [1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(direction_vector("left", 0.0), [0.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(direction_vector("backward", np.pi / 2), [0.0, -1.0], atol=1e-12)
    with pytest.raises(InvalidInputError):
        direction_vector("up", 0.0)


def test_augmentation_moves_along_direction():
    scene = make_scene()
    cfg = attack_cfg(alpha=0.0, pgd_steps=6)

    result = generate_augmentation(scene, "left", cfg)

    shift = np.mean((result.dense.positions - result.benign.positions) @ np.array([0.0, 1.0]))
    assert shift >= 0.0
    assert result.method == "augment"
    assert result.max_knot_deviation(scene.histories[0]) <= cfg.eps + 1e-6


def test_augmentation_rejects_non_unit_direction(scene):
    with pytest.raises(InvalidInputError):
        generate_augmentation(scene, np.array([2.0, 0.0]), attack_cfg())


def test_augmentation_weighs_collision_with_alpha():
    scene = make_scene(gap=2.0)
    cfg = attack_cfg(alpha=0.5, pgd_steps=4)

    result = generate_augmentation(scene, "right", cfg)
    reweighted = generate_augmentation(scene, "right", cfg.model_copy(update={"gamma": 7.0}))

    terms = result.best_terms
    assert terms["l_col"] > 0.0
    assert terms["total"] == pytest.approx(-terms["l_obj"] + cfg.alpha * terms["l_col"])
    assert reweighted.trace == result.trace


@pytest.fixture(scope="module")
def trained_suite():
    """Набор из 100 синтетических сцен и обученная на нём social-mlp"""
    suite = synthesize_scenes(SynthSpec(), 100, seed=0)
    model, _ = train_surrogate(suite.scenes, SurrogateSpec(kind="social-mlp", seed=0))
    return suite.scenes, model


@pytest.mark.bench
def test_default_attack_raises_surrogate_ade_by_half(trained_suite):
    scenes, model = trained_suite
    cfg = AttackConfig()
    benign, attacked, results = [], [], []
    for scene in scenes:
        result = attack_single(scene, model, cfg)
        results.append(result)
        benign.append(adv_ade(model, scene))
        attacked.append(adv_ade(model, scene.with_agent_history(scene.adv_index, result.history)))
        assert result.max_knot_deviation(scene.histories[scene.adv_index]) <= cfg.eps

    assert np.mean(attacked) >= 1.5 * np.mean(benign)
    assert violation_rate(results, cfg.bounds) == 0.0


@pytest.mark.bench
def test_pgd_beats_random_search_on_objective(trained_suite):
    scenes, model = trained_suite
    cfg = AttackConfig(seed=7)
    pgd, searched = [], []
    for scene in scenes:
        pgd_result = attack_single(scene, model, cfg)
        random_result = attack_random(scene, model, cfg)
        assert random_result.queries == pgd_result.queries
        pgd.append(pgd_result.best_terms["l_obj"])
        searched.append(random_result.best_terms["l_obj"])

    assert np.mean(pgd) > np.mean(searched)
