"""Модели предсказания: интерфейс, суррогаты, обучение и мост к внешним моделям"""

from .base import (
    ModeRule,
    Prediction,
    PredictionModel,
    Scene,
    finite_difference_pullback,
    model_pullback,
    predict,
)
from .bridge import BridgePredictor
from .surrogates import (
    ConstantVelocityPredictor,
    KinematicExtrapolationPredictor,
    OraclePredictor,
    SocialMLPNet,
    SocialMLPPredictor,
    SurrogateSpec,
    build_surrogate,
    load_model,
    save_model,
)
from .training import train_surrogate, training_ade, wta_loss

__all__ = [
    "BridgePredictor",
    "ConstantVelocityPredictor",
    "KinematicExtrapolationPredictor",
    "ModeRule",
    "OraclePredictor",
    "Prediction",
    "PredictionModel",
    "Scene",
    "SocialMLPNet",
    "SocialMLPPredictor",
    "SurrogateSpec",
    "build_surrogate",
    "finite_difference_pullback",
    "load_model",
    "model_pullback",
    "predict",
    "save_model",
    "train_surrogate",
    "training_ade",
    "wta_loss",
]
