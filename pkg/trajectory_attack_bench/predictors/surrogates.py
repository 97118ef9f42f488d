"""
Встроенные суррогатные модели предсказания

constant-velocity и kinematic-extrapolation - аналитические (K=1),
social-mlp - небольшая MLP с социальными признаками 4 ближайших агентов и
K независимыми головами поверх базовой линии постоянной скорости.
"""

import json
import logging
from copy import deepcopy
from pathlib import Path
from typing import Literal, Optional, Tuple, Union

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial.distance import cdist
from torch import nn

from ..core.errors import InvalidInputError
from ..dynamics import wrap_angle
from ..utils.constants import (
    DEFAULT_FUTURE_LEN,
    DEFAULT_HISTORY_LEN,
    DEFAULT_SOCIAL_MODES,
    MODEL_FORMAT,
    SOCIAL_NEIGHBORS,
)
from .base import Prediction, PredictionModel, Scene

logger = logging.getLogger(__name__)

SurrogateKind = Literal["constant-velocity", "kinematic-extrapolation", "social-mlp"]

_TINY = 1e-9


class SurrogateSpec(BaseModel):
    """Описание суррогата: тип, архитектура и зерно"""

    model_config = ConfigDict(extra="forbid")

    kind: SurrogateKind = "social-mlp"
    seed: int = 0
    history_len: int = Field(default=DEFAULT_HISTORY_LEN, ge=2)
    horizon: int = Field(default=DEFAULT_FUTURE_LEN, ge=1)
    num_modes: int = Field(default=DEFAULT_SOCIAL_MODES, ge=1)
    hidden_size: int = Field(default=64, ge=1)
    neighbors: int = Field(default=SOCIAL_NEIGHBORS, ge=0)
    output_scale: float = Field(default=1.0, gt=0)
    init_scale: float = Field(default=0.01, ge=0)


def _constant_velocity_baseline(X: np.ndarray, horizon: int) -> np.ndarray:
    steps = np.arange(1, horizon + 1, dtype=float)
    last = X[:, -1]
    disp = X[:, -1] - X[:, -2]
    return last[:, None, :] + steps[None, :, None] * disp[:, None, :]


def _constant_velocity_pullback(X: np.ndarray, cot: np.ndarray) -> np.ndarray:
    """cot: N×T×2 на базовую линию постоянной скорости"""
    steps = np.arange(1, cot.shape[1] + 1, dtype=float)
    grad = np.zeros_like(X)
    grad[:, -1] = np.einsum("t,ntd->nd", 1.0 + steps, cot)
    grad[:, -2] = -np.einsum("t,ntd->nd", steps, cot)
    return grad


class ConstantVelocityPredictor(PredictionModel):
    """Ŷ_t = X⁰ + t·(X⁰ − X⁻¹)"""

    name = "constant-velocity"

    def forward(self, histories: np.ndarray, scene: Scene) -> Prediction:
        modes = _constant_velocity_baseline(histories, scene.future_len)[None]
        return Prediction(modes, np.ones((histories.shape[0], 1)))

    def backward(self, histories: np.ndarray, scene: Scene, cotangent: np.ndarray) -> np.ndarray:
        return _constant_velocity_pullback(histories, cotangent.sum(axis=0))


def _perp_over_norm2(d: np.ndarray, norm: np.ndarray) -> np.ndarray:
    """∂ atan2(d_y, d_x)/∂d = (−d_y, d_x)/|d|²"""
    safe = np.where(norm > _TINY, norm, 1.0)
    out = np.stack([-d[:, 1], d[:, 0]], axis=1) / (safe**2)[:, None]
    return np.where((norm > _TINY)[:, None], out, 0.0)


class KinematicExtrapolationPredictor(PredictionModel):
    """
    Продолжение движения с постоянными скоростью и кривизной по трём последним точкам

    Хорды соседних шагов равны, угол между ними постоянен, поэтому на истории
    с постоянной кривизной предсказание лежит на той же окружности.
    """

    name = "kinematic-extrapolation"

    @staticmethod
    def _geometry(X: np.ndarray):
        d2 = X[:, -1] - X[:, -2]
        d1 = X[:, -2] - X[:, -3] if X.shape[1] >= 3 else d2
        n2 = np.linalg.norm(d2, axis=1)
        n1 = np.linalg.norm(d1, axis=1)
        th2 = np.arctan2(d2[:, 1], d2[:, 0])
        th1 = np.arctan2(d1[:, 1], d1[:, 0])
        turn = np.where((n1 > _TINY) & (n2 > _TINY), wrap_angle(th2 - th1), 0.0)
        return d1, d2, n1, n2, th2, turn

    def forward(self, histories: np.ndarray, scene: Scene) -> Prediction:
        _, _, _, n2, th2, turn = self._geometry(histories)
        steps = np.arange(1, scene.future_len + 1, dtype=float)
        psi = th2[:, None] + steps[None, :] * turn[:, None]
        chords = n2[:, None, None] * np.stack([np.cos(psi), np.sin(psi)], axis=-1)
        modes = histories[:, -1][:, None, :] + np.cumsum(chords, axis=1)
        return Prediction(modes[None], np.ones((histories.shape[0], 1)))

    def backward(self, histories: np.ndarray, scene: Scene, cotangent: np.ndarray) -> np.ndarray:
        X = histories
        cot = cotangent.sum(axis=0)
        d1, d2, n1, n2, th2, turn = self._geometry(X)
        steps = np.arange(1, scene.future_len + 1, dtype=float)
        psi = th2[:, None] + steps[None, :] * turn[:, None]
        unit = np.stack([np.cos(psi), np.sin(psi)], axis=-1)
        normal = np.stack([-np.sin(psi), np.cos(psi)], axis=-1)

        # хорда j входит во все Ŷ_k, k ≥ j
        suffix = np.cumsum(cot[:, ::-1], axis=1)[:, ::-1]
        g_len = np.sum(unit * suffix, axis=(1, 2))
        g_psi = n2[:, None] * np.sum(normal * suffix, axis=2)
        turning = (n1 > _TINY) & (n2 > _TINY)
        # ψ_j = (1+j)·θ₂ − j·θ₁ при ненулевом повороте, иначе θ₂
        g_th2 = np.where(turning, np.sum(g_psi * (1.0 + steps), axis=1), np.sum(g_psi, axis=1))
        g_th1 = np.where(turning, -np.sum(g_psi * steps, axis=1), 0.0)

        safe_n2 = np.where(n2 > _TINY, n2, 1.0)
        g_d2 = np.where((n2 > _TINY)[:, None], d2 / safe_n2[:, None], 0.0) * g_len[:, None]
        g_d2 += _perp_over_norm2(d2, n2) * g_th2[:, None]
        g_d1 = _perp_over_norm2(d1, n1) * g_th1[:, None]

        grad = np.zeros_like(X)
        grad[:, -1] += cot.sum(axis=1) + g_d2
        grad[:, -2] -= g_d2
        if X.shape[1] >= 3:
            grad[:, -2] += g_d1
            grad[:, -3] -= g_d1
        else:
            grad[:, -1] += g_d1
            grad[:, -2] -= g_d1
        return grad


class OraclePredictor(PredictionModel):
    """Идеальный предсказатель: возвращает записанное будущее сцены"""

    name = "oracle"

    def forward(self, histories: np.ndarray, scene: Scene) -> Prediction:
        return Prediction(scene.futures[None].copy(), np.ones((scene.num_agents, 1)))

    def backward(self, histories: np.ndarray, scene: Scene, cotangent: np.ndarray) -> np.ndarray:
        return np.zeros_like(histories)


class SocialMLPNet(nn.Module):
    """Двухслойная tanh-MLP над нормированными признаками (float64)"""

    def __init__(self, d_in: int, hidden: int, d_out: int):
        super().__init__()
        self.fc1 = nn.Linear(d_in, hidden, dtype=torch.float64)
        self.fc2 = nn.Linear(hidden, d_out, dtype=torch.float64)
        self.register_buffer("feature_mean", torch.zeros(d_in, dtype=torch.float64))
        self.register_buffer("feature_scale", torch.ones(d_in, dtype=torch.float64))

    def forward(self, raw: torch.Tensor) -> torch.Tensor:
        z = (raw - self.feature_mean) / self.feature_scale
        return self.fc2(torch.tanh(self.fc1(z)))

    def all_finite(self) -> bool:
        return all(bool(torch.isfinite(value).all()) for value in self.state_dict().values())


class SocialMLPPredictor(PredictionModel):
    """
    MLP с социальными признаками

    Признаки агента: собственная история относительно текущей позиции и для
    каждого из M ближайших соседей флаг наличия, относительная позиция и
    последнее смещение соседа. Выход: K остатков к базовой линии постоянной
    скорости и K логитов вероятностей мод. Градиент по историям - autograd;
    выбор соседей кусочно-постоянен и в градиент не входит.
    """

    name = "social-mlp"

    def __init__(self, spec: SurrogateSpec, net: Optional[SocialMLPNet] = None):
        self.spec = spec
        self.num_modes = spec.num_modes
        self.net = net or self.initial_net(spec)

    @staticmethod
    def feature_dim(spec: SurrogateSpec) -> int:
        return 2 * (spec.history_len - 1) + 5 * spec.neighbors

    @staticmethod
    def output_dim(spec: SurrogateSpec) -> int:
        return spec.num_modes * spec.horizon * 2 + spec.num_modes

    @classmethod
    def initial_net(cls, spec: SurrogateSpec) -> SocialMLPNet:
        """Сеть с весами из генератора torch с зерном spec.seed"""
        d_in, d_out = cls.feature_dim(spec), cls.output_dim(spec)
        net = SocialMLPNet(d_in, spec.hidden_size, d_out)
        generator = torch.Generator().manual_seed(spec.seed)
        with torch.no_grad():
            net.fc1.weight.normal_(0.0, 1.0 / np.sqrt(d_in), generator=generator)
            net.fc1.bias.zero_()
            net.fc2.weight.normal_(0.0, spec.init_scale, generator=generator)
            net.fc2.bias.zero_()
        return net

    def copy(self) -> "SocialMLPPredictor":
        return SocialMLPPredictor(self.spec, deepcopy(self.net))

    def _check_shapes(self, histories: np.ndarray, scene: Scene) -> None:
        if histories.shape[1] != self.spec.history_len or scene.future_len != self.spec.horizon:
            raise InvalidInputError(
                f"social-mlp обучена на H={self.spec.history_len}, T={self.spec.horizon}; "
                f"получено H={histories.shape[1]}, T={scene.future_len}"
            )

    def neighbor_index(self, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Индексы M ближайших по текущей позиции соседей (N×M) и маска их наличия"""
        n, m = X.shape[0], self.spec.neighbors
        dist = cdist(X[:, -1], X[:, -1])
        np.fill_diagonal(dist, np.inf)
        neighbors = np.zeros((n, m), dtype=np.int64)
        mask = np.zeros((n, m), dtype=bool)
        if m and n > 1:
            take = min(m, n - 1)
            neighbors[:, :take] = np.argsort(dist, axis=1, kind="stable")[:, :take]
            mask[:, :take] = True
        return neighbors, mask

    @staticmethod
    def features(X: torch.Tensor, neighbors: np.ndarray, mask: np.ndarray) -> torch.Tensor:
        """Ненормированные признаки N×D"""
        n = X.shape[0]
        last = X[:, -1]
        own = (X[:, :-1] - last[:, None]).reshape(n, -1)
        idx = torch.from_numpy(neighbors)
        flag = torch.from_numpy(mask).to(X.dtype)[..., None]
        # rel[i, j] = X_j⁰ − X_i⁰, disp_j = X_j⁰ − X_j⁻¹
        rel = (last[idx] - last[:, None]) * flag
        disp = (X[idx, -1] - X[idx, -2]) * flag
        return torch.cat([own, torch.cat([flag, rel, disp], dim=2).reshape(n, -1)], dim=1)

    def raw_features(self, X: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            return self.features(torch.tensor(X, dtype=torch.float64), *self.neighbor_index(X)).numpy()

    def outputs(self, X: torch.Tensor, neighbors: np.ndarray, mask: np.ndarray) -> Tuple[torch.Tensor, torch.Tensor]:
        """Моды K×N×T×2 и логиты вероятностей N×K"""
        spec = self.spec
        n, k, t = X.shape[0], spec.num_modes, spec.horizon
        out = self.net(self.features(X, neighbors, mask))
        residual = out[:, : k * t * 2].reshape(n, k, t, 2) * spec.output_scale
        steps = torch.arange(1, t + 1, dtype=X.dtype)
        baseline = X[:, -1][:, None] + steps[None, :, None] * (X[:, -1] - X[:, -2])[:, None]
        return (baseline[:, None] + residual).permute(1, 0, 2, 3), out[:, k * t * 2 :]

    def scene_outputs(self, scene: Scene) -> Tuple[torch.Tensor, torch.Tensor]:
        """Выход сети на историях сцены с графом вычислений по весам"""
        self._check_shapes(scene.histories, scene)
        X = torch.tensor(scene.histories, dtype=torch.float64)
        return self.outputs(X, *self.neighbor_index(scene.histories))

    def forward(self, histories: np.ndarray, scene: Scene) -> Prediction:
        self._check_shapes(histories, scene)
        with torch.no_grad():
            modes, logits = self.outputs(torch.tensor(histories, dtype=torch.float64), *self.neighbor_index(histories))
            probs = torch.softmax(logits, dim=1)
        return Prediction(modes.numpy().copy(), probs.numpy().copy())

    def backward(self, histories: np.ndarray, scene: Scene, cotangent: np.ndarray) -> np.ndarray:
        self._check_shapes(histories, scene)
        X = torch.tensor(histories, dtype=torch.float64, requires_grad=True)
        modes, _ = self.outputs(X, *self.neighbor_index(histories))
        # только по X: градиенты весов не накапливаются
        (grad,) = torch.autograd.grad(modes, X, grad_outputs=torch.tensor(cotangent, dtype=torch.float64))
        return grad.numpy()


def build_surrogate(spec: SurrogateSpec) -> PredictionModel:
    """Суррогат по описанию (social-mlp инициализируется из spec.seed)"""
    if spec.kind == "constant-velocity":
        return ConstantVelocityPredictor()
    if spec.kind == "kinematic-extrapolation":
        return KinematicExtrapolationPredictor()
    return SocialMLPPredictor(spec)


def save_model(model: PredictionModel, path: Union[str, Path]) -> Path:
    """Сохранение суррогата в .npz (описание в JSON + state_dict сети)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(model, SocialMLPPredictor):
        spec = model.spec
        arrays = {name: value.detach().numpy() for name, value in model.net.state_dict().items()}
    elif model.name in ("constant-velocity", "kinematic-extrapolation"):
        spec = SurrogateSpec(kind=model.name)  # type: ignore[arg-type]
        arrays = {}
    else:
        raise InvalidInputError(f"модель {model.name} не сохраняется в файл")
    header = json.dumps({"format": MODEL_FORMAT, "spec": spec.model_dump()}, sort_keys=True)
    with path.open("wb") as fh:
        np.savez(fh, header=np.array(header), **arrays)
    logger.info(f"💾 Модель {model.name} сохранена: {path}")
    return path


def load_model(path: Union[str, Path]) -> PredictionModel:
    """Загрузка суррогата из .npz"""
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"файл модели не найден: {path}")
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        if header.get("format") != MODEL_FORMAT:
            raise InvalidInputError(f"{path}: неизвестный формат модели {header.get('format')}")
        spec = SurrogateSpec(**header["spec"])
        if spec.kind != "social-mlp":
            return build_surrogate(spec)
        state = {name: torch.from_numpy(np.array(data[name])) for name in data.files if name != "header"}
    model = SocialMLPPredictor(spec)
    try:
        model.net.load_state_dict(state)
    except RuntimeError as e:
        raise InvalidInputError(f"{path}: веса не соответствуют описанию модели: {e}") from e
    logger.info(f"📂 Модель {model.name} загружена: {path}")
    return model
