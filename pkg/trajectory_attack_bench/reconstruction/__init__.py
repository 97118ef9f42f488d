"""Реконструкция плотных динамически допустимых траекторий"""

from .reconstructor import (
    DenseTrajectory,
    ReconConfig,
    ReconResult,
    interpolate_positions,
    knot_mse,
    linear_interpolate,
    recon_loss,
    reconstruct,
    reconstruct_with_trace,
)

__all__ = [
    "DenseTrajectory",
    "ReconConfig",
    "ReconResult",
    "interpolate_positions",
    "knot_mse",
    "linear_interpolate",
    "recon_loss",
    "reconstruct",
    "reconstruct_with_trace",
]
