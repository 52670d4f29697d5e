"""Mixed-order self-paced curriculum learning on small synthetic problems:
perturbation uncertainty, rank-fused difficulty, mixed-order batch plans,
self-paced and OHEM baselines, and gradient-conflict analysis."""

from .core_math import (
    entropy,
    finite_difference_gradient,
    inverse_loss,
    loss,
    loss_based_uncertainty,
    sigmoid,
)
from .datagen import Dataset, GenSpec, generate
from .difficulty import DifficultyRecord, fuse_ranks, quadrant_classify, rank_descending
from .experiment import ExperimentConfig, compare, run
from .model import ForwardTrace, MlpModel, grad_wrt_latent, grad_wrt_prediction
from .scheduler import (
    BatchPlan,
    SpConfig,
    age_schedule,
    anti_mixed_plan,
    mixed_order_plan,
    ohem_plan,
    random_plan,
    sp_weight,
)
from .uncertainty import UncertaintyConfig, batch_score_uncertainty, estimate_uncertainty

__version__ = "0.1.0"
