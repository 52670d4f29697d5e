"""Training harness: random warmup, online difficulty scoring, scheduler
dispatch, per-epoch metrics, and multi-seed scheduler comparisons.

The three-phase loop: random mini-batches for the first `warmup_epochs`,
then at every rescore boundary the dataset is scored (loss and/or
perturbation uncertainty), ranks are fused into difficulty scores, and the
configured scheduler rebuilds the epoch's batch plan.
"""

from __future__ import annotations

import csv
import os
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import difficulty, scheduler, uncertainty
from .datagen import Dataset, load_dataset
from .model import MlpModel
from . import kernels

SCHEDULERS = ("random", "mixed", "anti_mixed", "sp_hard", "sp_linear", "ohem")
DIFFICULTY_SOURCES = ("loss", "uncertainty", "both")

METRICS_HEADER = [
    "epoch",
    "mean_loss",
    "recall_class0",
    "recall_class1",
    "minority_recall",
    "mean_uncertainty",
    "d_sum_spread",
]


@dataclass
class ExperimentConfig:
    dataset: str = ""
    scheduler: str = "mixed"
    difficulty_source: str = "both"
    warmup_epochs: int = 10
    total_epochs: int = 60
    rescore_every: int = 1
    batch_size: int = 2
    lr: float = 0.1
    hidden_dim: int = 8
    activation: str = "tanh"
    head: str = "sigmoid"
    loss_kind: str = "mse"
    G: int = 8
    gamma: float = 0.3
    sp_regularizer: str = "linear"
    sp_lambda0: float = 0.5
    sp_growth: float = 0.0
    ohem_ratio: float = 0.25
    seed: int = 0
    outdir: str = ""

    def __post_init__(self):
        if self.scheduler not in SCHEDULERS:
            raise ValueError(f"unknown scheduler {self.scheduler!r}")
        if self.difficulty_source not in DIFFICULTY_SOURCES:
            raise ValueError(f"unknown difficulty_source {self.difficulty_source!r}")
        if self.warmup_epochs >= self.total_epochs:
            raise ValueError("warmup_epochs must be < total_epochs")
        if self.rescore_every < 1:
            raise ValueError("rescore_every must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr <= 0.0:
            raise ValueError("lr must be positive")

    # -- flat key=value config text -----------------------------------------

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        values = {}
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, _, raw = line.partition("=")
                values[key.strip()] = raw.strip()
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_strings(values)

    @classmethod
    def from_strings(cls, values: Dict[str, object]) -> "ExperimentConfig":
        kwargs = {
            name: _cast(cls, name, values[name])
            for name in cls.__dataclass_fields__
            if name in values
        }
        unknown = set(values) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**kwargs)

    def write_resolved(self, path) -> None:
        with open(path, "w") as fh:
            for key, value in sorted(asdict(self).items()):
                fh.write(f"{key}={value}\n")


def _cast(cls, name: str, value) -> object:
    if not isinstance(value, str):
        return value
    proto = cls.__dataclass_fields__[name].default
    if isinstance(proto, bool):
        return value.lower() in ("1", "true", "yes")
    if isinstance(proto, int):
        return int(value)
    if isinstance(proto, float):
        return float(value)
    return value


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


class _Run:
    """Single training run; owns the model, score caches, and output files."""

    def __init__(self, cfg: ExperimentConfig, dataset: Dataset, outdir: Path):
        self.cfg = cfg
        self.dataset = dataset
        self.outdir = outdir
        self.X = dataset.X
        self.labels = dataset.labels
        self.ids = dataset.ids
        self.row_of_id = {int(i): k for k, i in enumerate(self.ids)}
        self.model = MlpModel(
            input_dim=self.X.shape[1],
            hidden_dim=cfg.hidden_dim,
            out_dim=1 if cfg.head == "sigmoid" else 2,
            activation=cfg.activation,
            head=cfg.head,
            seed=cfg.seed,
        )
        self.sp_cfg = scheduler.SpConfig(
            regularizer="hard" if cfg.scheduler == "sp_hard" else cfg.sp_regularizer,
            lambda0=cfg.sp_lambda0,
            growth=cfg.sp_growth,
        )
        self.u_cfg = uncertainty.UncertaintyConfig(G=cfg.G, gamma=cfg.gamma, seed=cfg.seed)
        self.weights = np.ones(len(dataset))
        self.plan: Optional[scheduler.BatchPlan] = None
        self.d_by_id: Optional[Dict[int, int]] = None
        self.last_mean_uncertainty: Optional[float] = None
        self.epoch_losses: List[float] = []

    def _epoch_rng(self, epoch: int) -> np.random.Generator:
        return np.random.default_rng([self.cfg.seed, 1, epoch])

    def _score(self, epoch: int):
        """Loss (and, when needed, uncertainty) snapshot of every sample."""
        cfg = self.cfg
        per_loss, _ = self.model.batch_losses(self.X, self.labels, cfg.loss_kind)
        losses = {int(i): float(per_loss[self.row_of_id[int(i)]]) for i in self.ids}
        uncertainties: Dict[int, float] = {}
        need_u = cfg.scheduler in ("mixed", "anti_mixed") and cfg.difficulty_source in (
            "uncertainty",
            "both",
        )
        if need_u:
            uncertainties = uncertainty.batch_score_uncertainty(
                self.model, self.X, self.ids, self.u_cfg, epoch=epoch
            )
            self.last_mean_uncertainty = float(
                np.mean([uncertainties[int(i)] for i in self.ids])
            )
        return losses, uncertainties

    def _records(self, losses, uncertainties):
        src = self.cfg.difficulty_source
        if src == "loss":
            return difficulty.single_source_records(losses, "loss")
        if src == "uncertainty":
            return difficulty.single_source_records(uncertainties, "uncertainty")
        return difficulty.fuse_ranks(losses, uncertainties)

    def _build_plan(self, epoch: int) -> scheduler.BatchPlan:
        cfg = self.cfg
        scored = cfg.scheduler in ("mixed", "anti_mixed", "ohem", "sp_hard", "sp_linear")
        in_warmup = epoch < cfg.warmup_epochs
        boundary = (
            not in_warmup and (epoch - cfg.warmup_epochs) % cfg.rescore_every == 0
        )
        if in_warmup or not scored:
            self.d_by_id = None
            return scheduler.random_plan(
                self.ids.tolist(), cfg.batch_size, self._epoch_rng(epoch), epoch
            )
        if boundary or self.plan is None:
            losses, uncertainties = self._score(epoch)
            self._dump_scores(epoch, losses, uncertainties)
            if cfg.scheduler in ("sp_hard", "sp_linear"):
                lam = scheduler.age_schedule(epoch - cfg.warmup_epochs, self.sp_cfg)
                for sid, l in losses.items():
                    self.weights[self.row_of_id[sid]] = scheduler.sp_weight(
                        l, self.sp_cfg, lam
                    )
                self.d_by_id = None
            elif cfg.scheduler == "ohem":
                self.d_by_id = None
                return scheduler.ohem_plan(
                    losses, cfg.batch_size, cfg.ohem_ratio, self._epoch_rng(epoch), epoch
                )
            else:
                records = self._records(losses, uncertainties)
                self.d_by_id = {r.sample_id: r.d for r in records}
                build = (
                    scheduler.mixed_order_plan
                    if cfg.scheduler == "mixed"
                    else scheduler.anti_mixed_plan
                )
                return build(records, cfg.batch_size, epoch)
        elif cfg.scheduler in ("mixed", "anti_mixed", "ohem"):
            return replace(self.plan, epoch=epoch)
        # sp_* schedulers always batch randomly
        return scheduler.random_plan(
            self.ids.tolist(), cfg.batch_size, self._epoch_rng(epoch), epoch
        )

    def _dump_scores(self, epoch, losses, uncertainties):
        uncertainty.dump_scores(
            self.outdir / f"scores_epoch{epoch}.json", losses, uncertainties
        )

    def _train_epoch(self, plan: scheduler.BatchPlan) -> float:
        order = np.asarray(
            [self.row_of_id[i] for i in plan.flat_order()], dtype=np.int64
        )
        m = self.model
        losses = kernels.sgd_epoch(
            m.W1, m.b1, m.W2, m.b2,
            self.X, self.labels, order, plan.batch_size, self.weights, self.cfg.lr,
            m._act, m._head, {"mse": 0, "ce": 1}[self.cfg.loss_kind],
        )
        return float(np.mean(losses))

    def _recalls(self):
        _, _, Y = self.model.forward_batch(self.X)
        if self.cfg.head == "sigmoid":
            pred = (Y[:, 0] > 0.5).astype(np.int64)
        else:
            pred = Y.argmax(axis=1)
        recalls = {}
        for c in (0, 1):
            mask = self.labels == c
            recalls[c] = (
                float((pred[mask] == c).mean()) if mask.any() else float("nan")
            )
        return recalls

    def execute(self) -> Path:
        cfg = self.cfg
        metrics_path = self.outdir / "metrics.csv"
        timings_path = self.outdir / "timings.csv"
        cfg.write_resolved(self.outdir / "config_resolved.txt")
        with open(metrics_path, "w", newline="") as mfh, open(
            timings_path, "w", newline=""
        ) as tfh:
            mw = csv.writer(mfh)
            tw = csv.writer(tfh)
            mw.writerow(METRICS_HEADER)
            tw.writerow(["epoch", "wall_time_s"])
            for epoch in range(cfg.total_epochs):
                t0 = time.perf_counter()
                self.plan = self._build_plan(epoch)
                mean_loss = self._train_epoch(self.plan)
                if not np.isfinite(mean_loss):
                    raise RuntimeError(
                        f"non-finite mean loss {mean_loss} at epoch {epoch}; "
                        "reduce lr or inspect the dataset"
                    )
                self.epoch_losses.append(mean_loss)
                recalls = self._recalls()
                spread = (
                    scheduler.d_sum_spread(self.plan, self.d_by_id)
                    if self.d_by_id is not None
                    else None
                )
                mw.writerow(
                    [
                        epoch,
                        _fmt(mean_loss),
                        _fmt(recalls[0]),
                        _fmt(recalls[1]),
                        _fmt(recalls[self.dataset.minority_label]),
                        _fmt(self.last_mean_uncertainty),
                        _fmt(spread),
                    ]
                )
                tw.writerow([epoch, f"{time.perf_counter() - t0:.6f}"])
        self.model.save(self.outdir / "checkpoint.json")
        return self.outdir


def run(cfg: ExperimentConfig, dataset: Optional[Dataset] = None) -> Path:
    """Execute one training run; returns the run directory."""
    if dataset is None:
        sidecar = Path(cfg.dataset).with_suffix(".json")
        dataset = load_dataset(cfg.dataset, sidecar if sidecar.exists() else None)
    outdir = resolve_outdir(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    return _Run(cfg, dataset, outdir).execute()


def resolve_outdir(outdir: str) -> Path:
    root = os.environ.get("MOSCL_OUTPUT_ROOT", ".")
    path = Path(outdir if outdir else "run")
    return path if path.is_absolute() else Path(root) / path


def final_metrics(run_dir: Path) -> Dict[str, float]:
    with open(Path(run_dir) / "metrics.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    last = rows[-1]
    return {
        "mean_loss": float(last["mean_loss"]),
        "minority_recall": float(last["minority_recall"]),
        "recall_class0": float(last["recall_class0"]),
        "recall_class1": float(last["recall_class1"]),
    }


def compare(
    configs: List[ExperimentConfig],
    seeds: List[int],
    dataset: Optional[Dataset] = None,
    labels: Optional[List[str]] = None,
) -> Dict:
    """Run the config x seed grid and summarize final minority recall and
    loss per config (mean and spread over seeds), plus per-seed win counts
    of every config against the first one."""
    if len(configs) < 2:
        raise ValueError("compare needs at least 2 configs")
    if labels is None:
        labels = [c.scheduler for c in configs]
    cells: Dict[str, Dict[int, Optional[Dict[str, float]]]] = {}
    for label, cfg in zip(labels, configs):
        cells[label] = {}
        for seed in seeds:
            variant = replace(
                cfg, seed=seed, outdir=str(Path(cfg.outdir or "compare") / f"{label}_seed{seed}")
            )
            try:
                run_dir = run(variant, dataset=dataset)
                cells[label][seed] = final_metrics(run_dir)
            except Exception as exc:  # noqa: BLE001 - cell failures are recorded
                cells[label][seed] = {"error": str(exc)}
    summary = {"seeds": seeds, "configs": {}, "wins_vs_baseline": {}}
    baseline = labels[0]
    for label in labels:
        vals = [
            cells[label][s]["minority_recall"]
            for s in seeds
            if "error" not in cells[label][s]
        ]
        losses = [
            cells[label][s]["mean_loss"]
            for s in seeds
            if "error" not in cells[label][s]
        ]
        summary["configs"][label] = {
            "minority_recall_mean": float(np.mean(vals)) if vals else None,
            "minority_recall_spread": (max(vals) - min(vals)) if len(vals) > 1 else 0.0,
            "mean_loss_mean": float(np.mean(losses)) if losses else None,
            "failed_seeds": [s for s in seeds if "error" in cells[label][s]],
            "per_seed_minority_recall": {
                str(s): cells[label][s].get("minority_recall") for s in seeds
            },
        }
        if label != baseline:
            wins = sum(
                1
                for s in seeds
                if "error" not in cells[label][s]
                and "error" not in cells[baseline][s]
                and cells[label][s]["minority_recall"]
                >= cells[baseline][s]["minority_recall"]
            )
            summary["wins_vs_baseline"][label] = wins
    return summary


def export_scatter(scores_path, out_csv, mode: str = "value") -> None:
    """Fig-style scatter export of (loss, uncertainty) pairs, either raw
    values or descending rank indices."""
    if mode not in ("value", "index"):
        raise ValueError(f"unknown scatter mode {mode!r}")
    records = uncertainty.load_scores(scores_path)
    ids = [r["sample_id"] for r in records]
    losses = [r["loss"] for r in records]
    us = [r["uncertainty"] for r in records]
    if any(u is None for u in us):
        raise ValueError("scores file has no uncertainty column to export")
    if mode == "index":
        rank_l = difficulty.rank_descending(losses, ids)
        rank_u = difficulty.rank_descending(us, ids)
        rows = [(rank_l[i], rank_u[i]) for i in ids]
    else:
        rows = list(zip(losses, us))
    with open(out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["loss", "uncertainty"])
        for l, u in rows:
            writer.writerow([_fmt(l), _fmt(u)])
