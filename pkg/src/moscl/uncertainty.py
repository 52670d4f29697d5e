"""Perturbation-based uncertainty: entropy of the mean prediction under G
random multiplicative disturbances of the hidden feature map."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict

import numpy as np

from . import kernels
from .core_math import entropy
from .model import MlpModel


@dataclass
class UncertaintyConfig:
    G: int = 8
    gamma: float = 0.3
    seed: int = 0
    entropy_mode: str = "paper"

    def __post_init__(self):
        if self.G < 1:
            raise ValueError("G must be >= 1")
        if self.gamma < 0.0:
            raise ValueError("gamma must be >= 0")


def sample_perturbation(dim: int, gamma: float, rng: np.random.Generator) -> np.ndarray:
    """One disturbance vector with entries i.i.d. uniform on [-gamma, +gamma]."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return rng.uniform(-gamma, gamma, dim)


def _mean_entropy(p_bar: np.ndarray, head: str, mode: str) -> float:
    if head == "sigmoid":
        return entropy(float(p_bar[0]), mode=mode)
    # multi-class extension: sum the per-component entropy terms
    return float(sum(entropy(float(p), mode=mode) for p in p_bar))


def estimate_uncertainty(
    model: MlpModel, x: np.ndarray, cfg: UncertaintyConfig, rng=None
) -> float:
    """u = H(mean of G perturbed predictions)."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    T = rng.uniform(-cfg.gamma, cfg.gamma, (1, cfg.G, model.hidden_dim))
    p_bar = kernels.mean_perturbed_predictions(
        model.W1, model.b1, model.W2, model.b2,
        np.asarray(x, dtype=np.float64)[None, :], T, model._act, model._head,
    )[0]
    return _mean_entropy(p_bar, model.head, cfg.entropy_mode)


def batch_score_uncertainty(
    model: MlpModel,
    X: np.ndarray,
    sample_ids: np.ndarray,
    cfg: UncertaintyConfig,
    epoch: int = 0,
) -> Dict[int, float]:
    """Uncertainty per sample id.  Each sample draws its own RNG stream from
    (seed, sample_id, epoch), so scoring is order-independent and the
    perturbations are resampled at every scoring epoch."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        raise ValueError("dataset is empty")
    N = X.shape[0]
    T = np.empty((N, cfg.G, model.hidden_dim))
    for row, sid in enumerate(sample_ids):
        stream = np.random.default_rng([cfg.seed, int(sid), epoch])
        T[row] = stream.uniform(-cfg.gamma, cfg.gamma, (cfg.G, model.hidden_dim))
    P = kernels.mean_perturbed_predictions(
        model.W1, model.b1, model.W2, model.b2, X, T, model._act, model._head
    )
    return {
        int(sid): _mean_entropy(P[row], model.head, cfg.entropy_mode)
        for row, sid in enumerate(sample_ids)
    }


def dump_scores(path, losses: Dict[int, float], uncertainties: Dict[int, float]) -> None:
    """Score dump shared with the difficulty module: JSON array of
    {sample_id, loss, uncertainty} records, ordered by sample id."""
    records = [
        {
            "sample_id": sid,
            "loss": losses[sid],
            "uncertainty": uncertainties.get(sid),
        }
        for sid in sorted(losses)
    ]
    with open(path, "w") as fh:
        json.dump(records, fh, indent=1)


def load_scores(path):
    with open(path) as fh:
        return json.load(fh)
