"""Общие фикстуры тестов"""

import numpy as np
import pytest

from trajectory_attack_bench.dynamics import ControlSequence, DynState, rollout
from trajectory_attack_bench.metrics import displacement_errors
from trajectory_attack_bench.predictors import Scene, predict
from trajectory_attack_bench.workbench import SynthSpec, synthesize_scenes


def straight_track(x0: float, y0: float, speed: float, steps: int, dt: float = 0.5, heading: float = 0.0) -> np.ndarray:
    """Позиции равномерного прямолинейного движения, steps точек"""
    t = np.arange(steps) * dt
    direction = np.array([np.cos(heading), np.sin(heading)])
    return np.array([x0, y0]) + speed * t[:, None] * direction


def bicycle_track(speed: float, accel: float, curvature: float, steps: int, dt: float = 0.5) -> np.ndarray:
    """Узлы прокатки модели велосипеда с постоянным управлением"""
    u = ControlSequence.constant(dt, steps - 1, accel, curvature)
    return rollout(DynState.from_values(0.0, 0.0, 0.0, speed), u).positions


def make_scene(
    history_len: int = 4,
    future_len: int = 12,
    dt: float = 0.5,
    scene_id: str = "lane_follow",
    gap: float = 3.5,
) -> Scene:
    """Атакующий агент в соседней полосе, эго и фоновый агент впереди"""
    total = history_len + future_len
    tracks = np.stack(
        [
            straight_track(0.0, gap, 8.0, total, dt),
            straight_track(-5.0, 0.0, 8.0, total, dt),
            straight_track(25.0, 0.0, 6.0, total, dt),
        ]
    )
    return Scene(
        dt=dt,
        histories=tracks[:, :history_len],
        futures=tracks[:, history_len:],
        adv_index=0,
        ego_index=1,
        agent_ids=["adv", "ego", "lead"],
        scene_id=scene_id,
    )


def adv_ade(model, scene: Scene) -> float:
    """ADE лучшей моды атакующего агента"""
    a = scene.adv_index
    ade, _ = displacement_errors(predict(model, scene).modes[:, [a]], scene.futures[[a]])
    return float(ade[0])


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)


@pytest.fixture
def scene() -> Scene:
    return make_scene()


@pytest.fixture(scope="session")
def small_suite():
    """Шесть синтетических сцен (H=4, T=12) с картой"""
    return synthesize_scenes(SynthSpec(), 6, seed=3)
