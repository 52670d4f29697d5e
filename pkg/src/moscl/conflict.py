"""Pairwise gradient-conflict measurement: cosine angles between per-sample
parameter gradients and the rank correlation between conflict and loss sum."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.stats import spearmanr

from .model import MlpModel

MAX_EXHAUSTIVE_N = 64
PAIR_CAP = 2000


@dataclass
class ConflictReport:
    pairs: List[Tuple[int, int, float, float]]  # (id_i, id_j, cosine, loss_sum)
    spearman_rho: Optional[float]
    degenerate: bool = False
    model_tag: str = ""

    def to_json(self) -> dict:
        return {
            "model_tag": self.model_tag,
            "spearman_rho": self.spearman_rho,
            "degenerate": self.degenerate,
            "n_pairs": len(self.pairs),
            "pairs": [
                {"id_i": i, "id_j": j, "cosine": c, "loss_sum": s}
                for i, j, c, s in self.pairs
            ],
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    def save_pairs_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id_i", "id_j", "cosine", "conflict", "loss_sum"])
            for i, j, c, s in self.pairs:
                writer.writerow([i, j, repr(c), repr(1.0 - c), repr(s)])


def gradient_cosine(g_i: np.ndarray, g_j: np.ndarray) -> float:
    """Cosine of the angle between two gradient vectors."""
    g_i = np.asarray(g_i, dtype=np.float64)
    g_j = np.asarray(g_j, dtype=np.float64)
    if g_i.shape != g_j.shape:
        raise ValueError("gradient dimension mismatch")
    ni = np.linalg.norm(g_i)
    nj = np.linalg.norm(g_j)
    if ni == 0.0 or nj == 0.0:
        raise ValueError("conflict undefined for a zero gradient")
    return float(np.dot(g_i, g_j) / (ni * nj))


def latent_gradient_scale(y: int, y_hat: float) -> float:
    """Magnitude of dL/dz for the sigmoid+MSE model, written through the
    squared residual: 2*y_hat*l when y=1 (l = (1-y_hat)^2), and
    2*y_hat^2*sqrt(r) with r = (1-y_hat)^2 when y=0, so that the scale is an
    exact rewrite of the closed-form latent gradient on both branches."""
    if y == 1:
        return 2.0 * y_hat * (1.0 - y_hat) ** 2
    if y == 0:
        return 2.0 * y_hat**2 * np.sqrt((1.0 - y_hat) ** 2)
    raise ValueError(f"label must be 0 or 1, got {y}")


def conflict_loss_monotonicity(
    model: MlpModel,
    X: np.ndarray,
    labels: np.ndarray,
    sample_ids: Optional[np.ndarray] = None,
    loss_kind: str = "mse",
    seed: int = 0,
    model_tag: str = "",
) -> ConflictReport:
    """Pairwise (conflict = 1 - cosine, loss_sum = l_i + l_j) over the
    dataset, with the Spearman rank correlation between them.

    Pairs where either gradient vanishes are skipped.  For N above
    MAX_EXHAUSTIVE_N, PAIR_CAP pairs are sampled with the given seed.
    An all-constant conflict column is reported as degenerate.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = X.shape[0]
    if n < 3:
        raise ValueError("need at least 3 samples")
    if sample_ids is None:
        sample_ids = np.arange(n)
    order = np.argsort(sample_ids)  # report independent of input order

    grads = {}
    losses = {}
    per_loss, _ = model.batch_losses(X, labels, loss_kind)
    for row in order:
        sid = int(sample_ids[row])
        grads[sid] = model.per_sample_gradient(X[row], int(labels[row]), loss_kind)
        losses[sid] = float(per_loss[row])
    ids = sorted(grads)

    all_pairs = [(a, b) for k, a in enumerate(ids) for b in ids[k + 1 :]]
    if n > MAX_EXHAUSTIVE_N and len(all_pairs) > PAIR_CAP:
        rng = np.random.default_rng(seed)
        pick = rng.choice(len(all_pairs), size=PAIR_CAP, replace=False)
        all_pairs = [all_pairs[k] for k in sorted(pick)]

    pairs = []
    for a, b in all_pairs:
        ga, gb = grads[a], grads[b]
        na, nb = np.linalg.norm(ga), np.linalg.norm(gb)
        if na == 0.0 or nb == 0.0:
            continue
        cos = float(np.dot(ga, gb) / (na * nb))
        pairs.append((a, b, cos, losses[a] + losses[b]))

    conflicts = np.asarray([1.0 - c for _, _, c, _ in pairs])
    loss_sums = np.asarray([s for _, _, _, s in pairs])
    degenerate = bool(
        len(pairs) < 2
        or np.ptp(conflicts) == 0.0
        or np.ptp(loss_sums) == 0.0
    )
    rho = None
    if not degenerate:
        rho = float(spearmanr(conflicts, loss_sums).statistic)
    return ConflictReport(
        pairs=pairs, spearman_rho=rho, degenerate=degenerate, model_tag=model_tag
    )


def has_converged(epoch_losses: List[float], rel_tol: float = 1e-4, window: int = 5) -> bool:
    """Convergence rule: relative improvement of mean epoch loss below
    rel_tol for `window` consecutive epochs."""
    if len(epoch_losses) < window + 1:
        return False
    recent = epoch_losses[-(window + 1):]
    for prev, cur in zip(recent, recent[1:]):
        if prev <= 0.0:
            continue
        if (prev - cur) / abs(prev) >= rel_tol:
            return False
    return True
