"""Command-line entry point.

Subcommands: ``gen-data {burgers,navier-stokes}``, ``train``, ``evaluate``,
``noise-sweep`` and ``inspect-checkpoint``. Exit codes: 0 success, 1 usage
error, 2 runtime error. ``PHQFNO_LOG_LEVEL`` sets the logging level.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .binfmt import FormatError, canonical_json
from .comm import CommError
from .evaluation import (NoiseSweepSpec, evaluate, noise_sweep, write_fields, write_report,
                         write_sweep)
from .hybrid import TABLE_CONFIGS, ConfigError, count_params, load_checkpoint, table_config
from .optim import NonFiniteGradient
from .pde import SolverError, burgers_dataset, navier_stokes_dataset, read_shard, write_shard
from .training import TrainConfig, TrainingError, train

LOG_ENV = "PHQFNO_LOG_LEVEL"
log = logging.getLogger("phqfno")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def load_train_config(path, seed: int | None = None) -> TrainConfig:
    """Read a training config JSON file.

    ``model`` may be a full model dict or the name of a preset, optionally
    with ``model_overrides``.
    """
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    model = raw.get("model", {})
    overrides = raw.pop("model_overrides", {})
    if isinstance(model, str):
        if model not in TABLE_CONFIGS:
            raise UsageError(f"unknown model preset {model!r}; choose from {sorted(TABLE_CONFIGS)}")
        raw["model"] = table_config(model, **overrides).to_dict()
    elif overrides:
        raw["model"] = dict(model, **overrides)
    if seed is not None:
        raw["seed"] = seed
    try:
        return TrainConfig.from_dict(raw)
    except TypeError as exc:
        raise UsageError(f"config {path}: {exc}") from None


def _gen_data(args) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.problem == "burgers":
        kw = {"nu": args.nu} if args.nu is not None else {}
        shard = burgers_dataset(args.count, args.seed, grid=args.grid,
                                fine=args.fine or 256, **kw)
    else:
        kw = {"nu": args.nu} if args.nu is not None else {}
        shard = navier_stokes_dataset(args.count, args.seed, grid=args.grid,
                                      fine=args.fine or 64, **kw)
    stem = args.name or f"{args.problem}_seed{args.seed}_n{args.count}"
    write_shard(out / f"{stem}.shard", shard)
    meta = dict(shard.meta, count=len(shard), file=f"{stem}.shard")
    (out / f"{stem}.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    log.info("wrote %d samples to %s", len(shard), out / f"{stem}.shard")


def _train(args) -> None:
    config = load_train_config(args.config, args.seed)
    if args.epochs is not None:
        config.epochs = args.epochs
    train_shard = read_shard(args.train)
    test_shard = read_shard(args.test) if args.test else None
    out = Path(args.out)
    result = train(config, train_shard, test_shard, workers=args.workers, out_dir=out)
    last = result.history[-1]
    print(f"epochs={config.epochs} train_loss={last['global_train_loss']:.6e} "
          f"test_rel_error={last['test_rel_error']:.6e} checkpoint={result.checkpoint}")


def _evaluate(args) -> None:
    ckpt = load_checkpoint(args.checkpoint)
    shard = read_shard(args.data)
    report = evaluate(ckpt, shard)
    write_report(args.out, report)
    if args.fields:
        write_fields(args.fields, shard, report)
    print(f"samples={len(report.errors)} mean_rel_error={report.mean:.6e}")


def _noise_sweep(args) -> None:
    ckpt = load_checkpoint(args.checkpoint)
    cfg = ckpt.config
    if args.data:
        inputs = read_shard(args.data).inputs
    else:
        from .pde.grf import GrfSpec, sample_grf
        fine = sample_grf(GrfSpec(cfg.grid * 32, cfg.dim, seed=args.seed), args.batch)
        sl = (slice(None),) + (slice(None, None, 32),) * cfg.dim
        inputs = fine[sl]
    spec = NoiseSweepSpec(means=np.linspace(0.0, args.max_mean, args.cells),
                          stds=np.linspace(0.0, args.max_std, args.cells),
                          batch=args.batch, seed=args.seed, after_lift=args.after_lift)
    rows = noise_sweep(ckpt.params, cfg, inputs, spec)
    write_sweep(args.out, rows)
    for layer in sorted({r["layer"] for r in rows}):
        sims = [r["similarity"] for r in rows if r["layer"] == layer]
        print(f"{layer}: cells={len(sims)} mean_similarity={np.mean(sims):.6f}")


def _inspect(args) -> None:
    ckpt = load_checkpoint(args.checkpoint)
    info = {"config": ckpt.config.to_dict(), "config_digest": ckpt.config.digest(),
            "param_counts": count_params(ckpt.config),
            "arrays": {k: list(v.shape) for k, v in ckpt.params.items()},
            "meta": ckpt.meta}
    print(json.dumps(json.loads(canonical_json(info)), indent=2, sort_keys=True))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="phqfno", description="Hybrid quantum/classical Fourier neural operators")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-data", help="generate a dataset shard")
    g.add_argument("problem", choices=["burgers", "navier-stokes"])
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--nu", type=float, default=None, help="viscosity")
    g.add_argument("--grid", type=int, default=8, help="stored (coarse) grid")
    g.add_argument("--fine", type=int, default=None, help="solver grid")
    g.add_argument("--name", default=None, help="file stem")
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=_gen_data)

    t = sub.add_parser("train", help="train a model")
    t.add_argument("--config", required=True, help="training config JSON")
    t.add_argument("--train", required=True, help="training shard")
    t.add_argument("--test", default=None, help="test shard")
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--workers", type=int, default=1)
    t.add_argument("--out", required=True, help="output directory")
    t.set_defaults(func=_train)

    e = sub.add_parser("evaluate", help="per-sample relative errors of a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True, help="test shard")
    e.add_argument("--out", required=True, help="per-sample CSV")
    e.add_argument("--fields", default=None, help="optional truth/prediction/difference CSV")
    e.set_defaults(func=_evaluate)

    n = sub.add_parser("noise-sweep", help="input-noise robustness heatmap")
    n.add_argument("--checkpoint", required=True)
    n.add_argument("--data", default=None, help="input shard (default: fresh GRF samples)")
    n.add_argument("--out", default="noise_sweep.csv")
    n.add_argument("--seed", type=int, default=0)
    n.add_argument("--batch", type=int, default=5)
    n.add_argument("--cells", type=int, default=10, help="grid points per axis")
    n.add_argument("--max-mean", type=float, default=0.5)
    n.add_argument("--max-std", type=float, default=0.5)
    n.add_argument("--after-lift", action="store_true", help="add noise after the lifting layer")
    n.set_defaults(func=_noise_sweep)

    i = sub.add_parser("inspect-checkpoint", help="print checkpoint header as JSON")
    i.add_argument("checkpoint")
    i.set_defaults(func=_inspect)
    return p


def _check(args) -> None:
    for name in ("count", "workers", "batch", "cells"):
        v = getattr(args, name, None)
        if v is not None and v < 1:
            raise UsageError(f"--{name} must be at least 1")
    if getattr(args, "epochs", None) is not None and args.epochs < 0:
        raise UsageError("--epochs must be non-negative")


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        _check(args)
        args.func(args)
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return 1
    except (ConfigError, FormatError, SolverError, TrainingError, NonFiniteGradient, CommError,
            OSError, ValueError) as exc:
        print(f"phqfno: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
