"""Command-line entry point.

Subcommands: gen-data, train, score, compare, export-scatter,
analyze-conflicts.  Failures exit nonzero with an error JSON on stderr.
The MOSCL_OUTPUT_ROOT environment variable prefixes relative output paths.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import conflict, difficulty, experiment, uncertainty
from .datagen import Dataset, GenSpec, generate, load_dataset, save_dataset
from .experiment import ExperimentConfig
from .model import MlpModel


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    for f in dataclasses.fields(ExperimentConfig):
        p.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, default=None)


def _config_from_args(args) -> ExperimentConfig:
    overrides = {
        f.name: getattr(args, f.name)
        for f in dataclasses.fields(ExperimentConfig)
        if getattr(args, f.name) is not None
    }
    if args.config:
        return ExperimentConfig.from_file(args.config, **overrides)
    return ExperimentConfig.from_strings(overrides)


def _load_with_sidecar(dataset_csv: str) -> Dataset:
    sidecar = Path(dataset_csv).with_suffix(".json")
    return load_dataset(dataset_csv, sidecar if sidecar.exists() else None)


def cmd_gen_data(args) -> None:
    spec = GenSpec(
        n_total=args.n_total,
        minority_fraction=args.minority_fraction,
        label_noise_rate=args.label_noise_rate,
        feature_noise_rate=args.feature_noise_rate,
        cluster_separation=args.cluster_separation,
        dim=args.dim,
        seed=args.seed,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(generate(spec), out, out.with_suffix(".json"))
    print(out)


def cmd_train(args) -> None:
    run_dir = experiment.run(_config_from_args(args))
    print(run_dir)


def cmd_score(args) -> None:
    """Score a dataset with a saved checkpoint: losses, uncertainties, and
    the rank-fused difficulty CSV."""
    dataset = _load_with_sidecar(args.dataset)
    model = MlpModel.load(args.checkpoint)
    per_loss, _ = model.batch_losses(dataset.X, dataset.labels, args.loss_kind)
    losses = {int(i): float(per_loss[k]) for k, i in enumerate(dataset.ids)}
    cfg = uncertainty.UncertaintyConfig(G=args.G, gamma=args.gamma, seed=args.seed)
    us = uncertainty.batch_score_uncertainty(model, dataset.X, dataset.ids, cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    uncertainty.dump_scores(out, losses, us)
    records = difficulty.fuse_ranks(losses, us)
    difficulty.dump_difficulty_csv(out.with_suffix(".csv"), records)
    print(out)


def cmd_compare(args) -> None:
    base = _config_from_args(args)
    schedulers = args.schedulers.split(",")
    seeds = [int(s) for s in args.seeds.split(",")]
    configs = [dataclasses.replace(base, scheduler=s) for s in schedulers]
    summary = experiment.compare(configs, seeds, labels=schedulers)
    out = experiment.resolve_outdir(base.outdir or "compare") / "comparison.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        json.dump(summary, fh, indent=1)
    json.dump(summary["configs"], sys.stdout, indent=1)
    print()


def cmd_export_scatter(args) -> None:
    experiment.export_scatter(args.scores, args.out, mode=args.mode)
    print(args.out)


def cmd_analyze_conflicts(args) -> None:
    dataset = _load_with_sidecar(args.dataset)
    model = MlpModel.load(args.checkpoint)
    report = conflict.conflict_loss_monotonicity(
        model,
        dataset.X,
        dataset.labels,
        sample_ids=dataset.ids,
        loss_kind=args.loss_kind,
        seed=args.seed,
        model_tag=args.checkpoint,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    report.save(out)
    if args.pairs_csv:
        report.save_pairs_csv(args.pairs_csv)
    print(json.dumps({"spearman_rho": report.spearman_rho, "degenerate": report.degenerate}))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="moscl",
        description="Mixed-order self-paced curriculum learning lab",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic quadrant dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n-total", type=int, default=400)
    p.add_argument("--minority-fraction", type=float, default=0.1)
    p.add_argument("--label-noise-rate", type=float, default=0.1)
    p.add_argument("--feature-noise-rate", type=float, default=0.05)
    p.add_argument("--cluster-separation", type=float, default=3.0)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="run one training configuration")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score a dataset with a checkpoint")
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--loss-kind", default="mse")
    p.add_argument("--G", type=int, default=8)
    p.add_argument("--gamma", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("compare", help="scheduler comparison over seeds")
    _add_config_flags(p)
    p.add_argument("--schedulers", default="random,mixed")
    p.add_argument("--seeds", default="0,1,2")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("export-scatter", help="loss/uncertainty scatter CSV")
    p.add_argument("--scores", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=["value", "index"], default="value")
    p.set_defaults(func=cmd_export_scatter)

    p = sub.add_parser("analyze-conflicts", help="pairwise gradient conflict report")
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pairs-csv", default=None)
    p.add_argument("--loss-kind", default="mse")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_analyze_conflicts)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except Exception as exc:  # noqa: BLE001 - CLI error contract
        json.dump(
            {"error": type(exc).__name__, "message": str(exc)},
            sys.stderr,
        )
        sys.stderr.write("\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
