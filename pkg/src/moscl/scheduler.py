"""Per-epoch mini-batch plans: random, mixed-order (hard paired with easy),
anti-mixed (hard with hard), OHEM oversampling, and self-paced loss weights."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence

import numpy as np

from .difficulty import DifficultyRecord


@dataclass
class BatchPlan:
    epoch: int
    batches: List[List[int]]
    batch_size: int
    allows_duplicates: bool = False

    def flat_order(self) -> np.ndarray:
        return np.asarray(
            [i for batch in self.batches for i in batch], dtype=np.int64
        )

    def covers_exactly(self, ids: Iterable[int]) -> bool:
        flat = sorted(i for batch in self.batches for i in batch)
        return flat == sorted(ids)


@dataclass
class SpConfig:
    regularizer: str = "linear"  # "hard" or "linear"
    lambda0: float = 0.5
    growth: float = 0.0

    def __post_init__(self):
        if self.regularizer not in ("hard", "linear"):
            raise ValueError(f"unknown SP regularizer {self.regularizer!r}")
        if self.lambda0 <= 0.0:
            raise ValueError("lambda0 must be positive")


def _chunk(order: Sequence[int], b: int) -> List[List[int]]:
    return [list(order[k : k + b]) for k in range(0, len(order), b)]


def random_plan(
    ids: Sequence[int], b: int, rng: np.random.Generator, epoch: int = 0
) -> BatchPlan:
    """Uniform shuffle chunked into batches of b."""
    ids = list(ids)
    if not ids:
        raise ValueError("no sample ids")
    order = [ids[k] for k in rng.permutation(len(ids))]
    return BatchPlan(epoch=epoch, batches=_chunk(order, b), batch_size=b)


def _sorted_hard_first(records: Sequence[DifficultyRecord]) -> List[int]:
    # smaller d = harder; ties broken by ascending sample id
    for r in records:
        if r.d is None:
            raise ValueError(f"sample {r.sample_id} has no difficulty score")
    return [r.sample_id for r in sorted(records, key=lambda r: (r.d, r.sample_id))]


def mixed_order_plan(
    records: Sequence[DifficultyRecord], b: int, epoch: int = 0
) -> BatchPlan:
    """Pair hard with easy: interleave the hardness-sorted list from both
    ends (hard, easy, hard, easy, ...) and chunk into batches of b.  For b=2
    this pairs position k with position N-1-k; odd N leaves the median
    sample in a short final batch."""
    order_sorted = _sorted_hard_first(records)
    n = len(order_sorted)
    interleaved = []
    lo, hi = 0, n - 1
    while lo <= hi:
        interleaved.append(order_sorted[lo])
        if hi != lo:
            interleaved.append(order_sorted[hi])
        lo += 1
        hi -= 1
    return BatchPlan(epoch=epoch, batches=_chunk(interleaved, b), batch_size=b)


def anti_mixed_plan(
    records: Sequence[DifficultyRecord], b: int, epoch: int = 0
) -> BatchPlan:
    """Hard with hard: contiguous chunks of the hardness-sorted list."""
    return BatchPlan(
        epoch=epoch,
        batches=_chunk(_sorted_hard_first(records), b),
        batch_size=b,
    )


def ohem_plan(
    losses: Dict[int, float],
    b: int,
    oversample_ratio: float,
    rng: np.random.Generator,
    epoch: int = 0,
) -> BatchPlan:
    """Online hard example mining: the top-loss fraction of ids appears twice
    in the shuffled order.  ratio=1 degenerates to plain random coverage."""
    if not 0.0 < oversample_ratio <= 1.0:
        raise ValueError("oversample_ratio must be in (0, 1]")
    ids = sorted(losses)
    n_hard = int(oversample_ratio * len(ids)) if oversample_ratio < 1.0 else 0
    by_loss = sorted(ids, key=lambda i: (-losses[i], i))
    pool = ids + by_loss[:n_hard]
    order = [pool[k] for k in rng.permutation(len(pool))]
    return BatchPlan(
        epoch=epoch,
        batches=_chunk(order, b),
        batch_size=b,
        allows_duplicates=n_hard > 0,
    )


def sp_weight(l: float, cfg: SpConfig, lam: float = None) -> float:
    """Self-paced loss multiplier v in [0, 1], non-increasing in the loss.
    hard: 1 if l < lambda else 0; linear: max(0, 1 - l/lambda)."""
    if lam is None:
        lam = cfg.lambda0
    if lam <= 0.0:
        raise ValueError("age lambda must be positive")
    if cfg.regularizer == "hard":
        return 1.0 if l < lam else 0.0
    return max(0.0, 1.0 - l / lam)


def age_schedule(epoch: int, cfg: SpConfig) -> float:
    """Linear age growth: lambda = lambda0 + growth * epoch."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return cfg.lambda0 + cfg.growth * epoch


def batch_d_sums(plan: BatchPlan, d_by_id: Dict[int, int]) -> List[int]:
    return [sum(d_by_id[i] for i in batch) for batch in plan.batches]


def d_sum_spread(plan: BatchPlan, d_by_id: Dict[int, int]) -> int:
    """max - min of batch d-sums over full-size batches (a short final batch
    is excluded so the spread compares like with like)."""
    sums = [
        s
        for s, batch in zip(batch_d_sums(plan, d_by_id), plan.batches)
        if len(batch) == plan.batch_size
    ]
    if not sums:
        return 0
    return max(sums) - min(sums)


def dump_plan(path, plans: Sequence[BatchPlan]) -> None:
    """Debug dump: JSON array of epochs, each an array of id batches."""
    doc = [{"epoch": p.epoch, "batches": p.batches} for p in plans]
    with open(path, "w") as fh:
        json.dump(doc, fh)
