"""
Дифференцируемая кинематическая модель велосипеда

Прямой проход (явный Эйлер):
    v[t+1] = v[t] + a[t]·dt
    θ[t+1] = θ[t] + v[t]·κ[t]·dt
    p[t+1] = p[t] + v[t]·(cos θ[t], sin θ[t])·dt

Обратный во времени проход (якорь в последнем состоянии) точно обращает
прямой: v[t] = v[t+1] − a[t]·dt, θ[t] = θ[t+1] − v[t]·κ[t]·dt,
p[t] = p[t+1] − v[t]·(cos θ[t], sin θ[t])·dt.

Оба прохода векторизованы через кумулятивные суммы, а их VJP выписаны
аналитически.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Union, overload

import numpy as np

from ..core.errors import InvalidInputError

logger = logging.getLogger(__name__)


def wrap_angle(theta):
    """Нормализация угла в полуинтервал (−π, π]"""
    wrapped = np.pi - np.mod(np.pi - np.asarray(theta, dtype=float), 2.0 * np.pi)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def _require_finite(name: str, value) -> np.ndarray:
    array = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(array)):
        raise InvalidInputError(f"{name}: обнаружены неконечные значения")
    return array


@dataclass(frozen=True, eq=False)
class DynState:
    """Кинематическое состояние: позиция (м), курс (рад), скорость (м/с)"""

    position: np.ndarray
    heading: float
    speed: float

    def __post_init__(self):
        position = _require_finite("position", self.position).reshape(-1)
        if position.shape != (2,):
            raise InvalidInputError(f"position должна быть 2-вектором, получено {position.shape}")
        heading = float(_require_finite("heading", self.heading))
        speed = float(_require_finite("speed", self.speed))
        object.__setattr__(self, "position", position)
        object.__setattr__(self, "heading", wrap_angle(heading))
        object.__setattr__(self, "speed", speed)

    @classmethod
    def from_values(cls, x: float, y: float, heading: float, speed: float) -> "DynState":
        return cls(np.array([x, y], dtype=float), heading, speed)

    def to_dict(self) -> dict:
        return {
            "position": [float(self.position[0]), float(self.position[1])],
            "heading": self.heading,
            "speed": self.speed,
        }


@dataclass(frozen=True)
class ControlAction:
    """Управление: ускорение a (м/с²) и кривизна κ (1/м)"""

    accel: float
    curvature: float


@dataclass(frozen=True, eq=False)
class ControlSequence:
    """Последовательность управлений с равномерным шагом dt"""

    dt: float
    values: np.ndarray  # (n, 2): [a, κ]

    def __post_init__(self):
        if not (isinstance(self.dt, (int, float)) and math.isfinite(self.dt) and self.dt > 0):
            raise InvalidInputError(f"dt должен быть положительным, получено {self.dt}")
        values = _require_finite("controls", self.values)
        if values.ndim != 2 or values.shape[1] != 2 or values.shape[0] == 0:
            raise InvalidInputError(f"controls должны иметь форму (n>0, 2), получено {values.shape}")
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "values", values.copy())

    @classmethod
    def from_actions(cls, dt: float, actions: Sequence[ControlAction]) -> "ControlSequence":
        return cls(dt, np.array([[u.accel, u.curvature] for u in actions], dtype=float).reshape(-1, 2))

    @classmethod
    def constant(cls, dt: float, steps: int, accel: float = 0.0, curvature: float = 0.0) -> "ControlSequence":
        return cls(dt, np.tile([accel, curvature], (steps, 1)).astype(float))

    @property
    def accel(self) -> np.ndarray:
        return self.values[:, 0]

    @property
    def curvature(self) -> np.ndarray:
        return self.values[:, 1]

    @property
    def actions(self) -> List[ControlAction]:
        return [ControlAction(float(a), float(k)) for a, k in self.values]

    def with_values(self, values: np.ndarray) -> "ControlSequence":
        return ControlSequence(self.dt, values)

    def __len__(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True, eq=False)
class StateTrajectory(Sequence[DynState]):
    """Результат прокатки: массивы состояний, индексируемые как последовательность DynState"""

    dt: float
    positions: np.ndarray  # (n+1, 2)
    headings: np.ndarray  # (n+1,) без нормализации, как в рекуррентности
    speeds: np.ndarray  # (n+1,)

    @overload
    def __getitem__(self, index: int) -> DynState: ...

    @overload
    def __getitem__(self, index: slice) -> List[DynState]: ...

    def __getitem__(self, index: Union[int, slice]):
        if isinstance(index, slice):
            return [self[i] for i in range(*index.indices(len(self)))]
        return DynState(self.positions[index], float(self.headings[index]), float(self.speeds[index]))

    def __len__(self) -> int:
        return int(self.positions.shape[0])

    def __iter__(self) -> Iterator[DynState]:
        for i in range(len(self)):
            yield self[i]

    @property
    def first(self) -> DynState:
        return self[0]

    @property
    def last(self) -> DynState:
        return self[len(self) - 1]

    def path_length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.positions, axis=0), axis=1)))


@dataclass
class RolloutGradient:
    """Градиент скалярной функции прокатки по управлениям и якорному состоянию"""

    controls: np.ndarray  # (n, 2)
    position: np.ndarray  # (2,)
    heading: float = 0.0
    speed: float = 0.0

    def flat(self) -> np.ndarray:
        return np.concatenate([self.controls.reshape(-1), self.position, [self.heading, self.speed]])


def _unit(theta: np.ndarray) -> np.ndarray:
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def _normal(theta: np.ndarray) -> np.ndarray:
    return np.stack([-np.sin(theta), np.cos(theta)], axis=-1)


def forward_arrays(p0: np.ndarray, theta0: float, v0: float, u: np.ndarray, dt: float):
    """Прямая прокатка на массивах: (positions, headings, speeds)"""
    a = u[:, 0]
    kappa = u[:, 1]
    speeds = np.concatenate([[v0], v0 + dt * np.cumsum(a)])
    headings = np.concatenate([[theta0], theta0 + dt * np.cumsum(speeds[:-1] * kappa)])
    steps = dt * speeds[:-1, None] * _unit(headings[:-1])
    positions = np.concatenate([np.asarray(p0, float)[None, :], p0 + np.cumsum(steps, axis=0)], axis=0)
    return positions, headings, speeds


def reverse_arrays(p_end: np.ndarray, theta_end: float, v_end: float, u: np.ndarray, dt: float):
    """Обратная во времени прокатка от конечного состояния: (positions, headings, speeds)"""
    a = u[:, 0]
    kappa = u[:, 1]
    # суффиксные суммы по s ≥ t
    speeds = np.concatenate([v_end - dt * np.cumsum(a[::-1])[::-1], [v_end]])
    headings = np.concatenate(
        [theta_end - dt * np.cumsum((speeds[:-1] * kappa)[::-1])[::-1], [theta_end]]
    )
    steps = dt * speeds[:-1, None] * _unit(headings[:-1])
    suffix = np.cumsum(steps[::-1], axis=0)[::-1]
    positions = np.concatenate([np.asarray(p_end, float)[None, :] - suffix, np.asarray(p_end, float)[None, :]])
    return positions, headings, speeds


def _check_rollout_inputs(state: DynState, u: ControlSequence) -> None:
    if not isinstance(state, DynState):
        raise InvalidInputError("ожидалось состояние DynState")
    if not isinstance(u, ControlSequence):
        raise InvalidInputError("ожидалась последовательность ControlSequence")


def rollout(s0: DynState, u: ControlSequence) -> StateTrajectory:
    """
    Прямая прокатка модели велосипеда Φ(s0, u)

    Returns:
        |u|+1 состояний, начиная с s0
    """
    _check_rollout_inputs(s0, u)
    positions, headings, speeds = forward_arrays(s0.position, s0.heading, s0.speed, u.values, u.dt)
    if not np.all(np.isfinite(positions)):
        raise InvalidInputError("прокатка дала неконечные позиции")
    return StateTrajectory(u.dt, positions, headings, speeds)


def rollout_reverse(s_end: DynState, u: ControlSequence) -> StateTrajectory:
    """Прокатка в обратном времени: |u|+1 состояний, заканчивающихся s_end"""
    _check_rollout_inputs(s_end, u)
    positions, headings, speeds = reverse_arrays(s_end.position, s_end.heading, s_end.speed, u.values, u.dt)
    if not np.all(np.isfinite(positions)):
        raise InvalidInputError("прокатка дала неконечные позиции")
    return StateTrajectory(u.dt, positions, headings, speeds)


def _cotangents(n_states: int, cot_positions, cot_headings, cot_speeds):
    cot_p = _require_finite("cotangent", cot_positions)
    if cot_p.shape != (n_states, 2):
        raise InvalidInputError(f"котангенс позиций должен иметь форму ({n_states}, 2), получено {cot_p.shape}")
    cot_th = np.zeros(n_states) if cot_headings is None else _require_finite("cotangent", cot_headings)
    cot_v = np.zeros(n_states) if cot_speeds is None else _require_finite("cotangent", cot_speeds)
    if cot_th.shape != (n_states,) or cot_v.shape != (n_states,):
        raise InvalidInputError("котангенсы курса и скорости должны иметь длину числа состояний")
    return cot_p, cot_th, cot_v


def _suffix_after(x: np.ndarray) -> np.ndarray:
    """out[t] = Σ_{k>t} x[k] для t = 0..len(x)−2"""
    return np.cumsum(x[::-1], axis=0)[::-1][1:]


def rollout_pullback(
    s0: DynState,
    u: ControlSequence,
    cot_positions: np.ndarray,
    cot_headings: Optional[np.ndarray] = None,
    cot_speeds: Optional[np.ndarray] = None,
) -> RolloutGradient:
    """
    Точная обратная производная прямой прокатки (VJP)

    Args:
        s0: Начальное состояние
        u: Управления
        cot_positions: Котангенс по позициям, форма (|u|+1, 2)
        cot_headings: Необязательный котангенс по курсам
        cot_speeds: Необязательный котангенс по скоростям

    Returns:
        Градиент по управлениям и по s0
    """
    _check_rollout_inputs(s0, u)
    n = len(u)
    cot_p, cot_th, cot_v = _cotangents(n + 1, cot_positions, cot_headings, cot_speeds)
    dt = u.dt
    kappa = u.values[:, 1]
    _, headings, speeds = forward_arrays(s0.position, s0.heading, s0.speed, u.values, dt)

    # шаг t входит во все p[k], k > t
    w = dt * _suffix_after(cot_p)
    g_v_direct = np.sum(w * _unit(headings[:-1]), axis=1)
    g_th_direct = speeds[:-1] * np.sum(w * _normal(headings[:-1]), axis=1)

    g_theta = cot_th.copy()
    g_theta[:-1] += g_th_direct
    h_theta = dt * _suffix_after(g_theta)
    g_kappa = h_theta * speeds[:-1]

    g_speed = cot_v.copy()
    g_speed[:-1] += g_v_direct + h_theta * kappa
    g_accel = dt * _suffix_after(g_speed)

    return RolloutGradient(
        controls=np.stack([g_accel, g_kappa], axis=1),
        position=cot_p.sum(axis=0),
        heading=float(g_theta.sum()),
        speed=float(g_speed.sum()),
    )


def rollout_reverse_pullback(
    s_end: DynState,
    u: ControlSequence,
    cot_positions: np.ndarray,
    cot_headings: Optional[np.ndarray] = None,
    cot_speeds: Optional[np.ndarray] = None,
) -> RolloutGradient:
    """Точная VJP обратной во времени прокатки; градиент якоря относится к s_end"""
    _check_rollout_inputs(s_end, u)
    n = len(u)
    cot_p, cot_th, cot_v = _cotangents(n + 1, cot_positions, cot_headings, cot_speeds)
    dt = u.dt
    kappa = u.values[:, 1]
    _, headings, speeds = reverse_arrays(s_end.position, s_end.heading, s_end.speed, u.values, dt)

    # шаг s входит во все p[k], k ≤ s, со знаком минус
    w = -dt * np.cumsum(cot_p, axis=0)[:-1]
    g_v_direct = np.sum(w * _unit(headings[:-1]), axis=1)
    g_th_direct = speeds[:-1] * np.sum(w * _normal(headings[:-1]), axis=1)

    g_theta = cot_th.copy()
    g_theta[:-1] += g_th_direct
    h_theta = -dt * np.cumsum(g_theta)[:-1]
    g_kappa = h_theta * speeds[:-1]

    g_speed = cot_v.copy()
    g_speed[:-1] += g_v_direct + h_theta * kappa
    g_accel = -dt * np.cumsum(g_speed)[:-1]

    return RolloutGradient(
        controls=np.stack([g_accel, g_kappa], axis=1),
        position=cot_p.sum(axis=0),
        heading=float(g_theta.sum()),
        speed=float(g_speed.sum()),
    )


def substep_rollout(s0: DynState, u: ControlSequence, substeps: int) -> StateTrajectory:
    """Прокатка с дроблением каждого шага на substeps подшагов (эталон для проверки точности)"""
    if substeps < 1:
        raise InvalidInputError("substeps должен быть ≥ 1")
    fine = ControlSequence(u.dt / substeps, np.repeat(u.values, substeps, axis=0))
    traj = rollout(s0, fine)
    idx = np.arange(0, len(traj), substeps)
    return StateTrajectory(u.dt, traj.positions[idx], traj.headings[idx], traj.speeds[idx])
