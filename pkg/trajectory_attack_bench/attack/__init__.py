"""Реалистичные состязательные траектории: PGD по управлениям, базовые линии и аугментация"""

from .augmentation import DIRECTION_NAMES, direction_vector, generate_augmentation
from .baselines import attack_random, attack_search
from .config import AttackConfig, AttackResult, AttackVariant
from .losses import l_bh, l_bh_with_grad, l_col, l_col_with_grad, l_obj, l_obj_with_grad, upsample_others
from .objective import AttackProblem, LossBreakdown, adv_loss, adv_loss_and_grad, build_problem
from .pgd import attack_sequential, attack_single, frame_losses

__all__ = [
    "AttackConfig",
    "AttackProblem",
    "AttackResult",
    "AttackVariant",
    "DIRECTION_NAMES",
    "LossBreakdown",
    "adv_loss",
    "adv_loss_and_grad",
    "attack_random",
    "attack_search",
    "attack_sequential",
    "attack_single",
    "build_problem",
    "direction_vector",
    "frame_losses",
    "generate_augmentation",
    "l_bh",
    "l_bh_with_grad",
    "l_col",
    "l_col_with_grad",
    "l_obj",
    "l_obj_with_grad",
    "upsample_others",
]
