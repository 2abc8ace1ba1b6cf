"""Test-set evaluation and the input-noise robustness sweep."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .hybrid import (Checkpoint, ConfigError, HybridConfig, forward, forward_lifted,
                     with_coordinates)
from .pde.shard import DatasetShard
from .training import predict, relative_errors

SWEEP_COLUMNS = ["mean", "std", "similarity", "layer"]


def cosine_similarity_batch(clean, noisy) -> float:
    """Mean over the batch of per-sample cosine similarity."""
    a = np.asarray(clean, dtype=float)
    b = np.asarray(noisy, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    a = a.reshape(a.shape[0], -1)
    b = b.reshape(b.shape[0], -1)
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    if np.any(na == 0) or np.any(nb == 0):
        raise ValueError("cosine similarity undefined for a zero-norm output")
    sim = np.clip(np.sum(a * b, axis=1) / (na * nb), -1.0, 1.0)
    # rounding can leave identical samples a few ulps away from 1
    sim = np.where(np.all(a == b, axis=1), 1.0, sim)
    return float(np.mean(sim))


@dataclass
class NoiseSweepSpec:
    means: np.ndarray = field(default_factory=lambda: np.linspace(0.0, 0.5, 10))
    stds: np.ndarray = field(default_factory=lambda: np.linspace(0.0, 0.5, 10))
    batch: int = 5
    seed: int = 0
    layers: tuple[str, ...] = ("quantum", "classical")
    after_lift: bool = False

    def __post_init__(self):
        self.means = np.atleast_1d(np.asarray(self.means, dtype=float))
        self.stds = np.atleast_1d(np.asarray(self.stds, dtype=float))
        if self.means.size == 0 or self.stds.size == 0:
            raise ValueError("noise grids must be non-empty")
        if np.any(self.stds < 0):
            raise ValueError("standard deviations must be non-negative")
        if self.batch < 1:
            raise ValueError("batch size must be at least 1")


def layer_outputs(params: dict, cfg: HybridConfig, u: np.ndarray,
                  lift_noise: np.ndarray | None = None) -> dict[str, np.ndarray]:
    """Outputs of the quantum and classical Fourier layers for inputs ``u``."""
    capture: dict = {}
    if lift_noise is None:
        forward(u, params, cfg, capture)
    else:
        p = {k: ad._lift(v) for k, v in params.items()}
        x = ad.Tensor(with_coordinates(u, cfg.dim))
        v = ad.matmul(x, p["lift_w"]) + p["lift_b"] + lift_noise
        forward_lifted(v, p, cfg, capture)
    return capture


def noise_sweep(params: dict, cfg: HybridConfig, inputs: np.ndarray,
                spec: NoiseSweepSpec | None = None) -> list[dict]:
    """Similarity between clean and noisy layer outputs for every (mean, std) cell.

    Each cell draws its noise from its own stream seeded by ``(seed, i, j)``.
    """
    spec = spec or NoiseSweepSpec()
    u = np.asarray(inputs, dtype=float)[: spec.batch]
    if len(u) < spec.batch:
        raise ValueError(f"need {spec.batch} inputs, got {len(u)}")
    clean = layer_outputs(params, cfg, u)
    layers = [name for name in spec.layers if name in clean]
    if not layers:
        raise ConfigError(f"model has none of the layers {spec.layers}")
    rows = []
    noise_shape = u.shape + ((cfg.d_v,) if spec.after_lift else ())
    for i, mu in enumerate(spec.means):
        for j, sigma in enumerate(spec.stds):
            rng = np.random.default_rng([spec.seed, i, j])
            noise = mu + sigma * rng.standard_normal(noise_shape)
            if spec.after_lift:
                noisy = layer_outputs(params, cfg, u, lift_noise=noise)
            else:
                noisy = layer_outputs(params, cfg, u + noise)
            for name in layers:
                rows.append({"mean": float(mu), "std": float(sigma),
                             "similarity": cosine_similarity_batch(clean[name], noisy[name]),
                             "layer": name})
    return rows


def write_sweep(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([f"{r['mean']:.6g}", f"{r['std']:.6g}", f"{r['similarity']:.12e}",
                        r["layer"]])


@dataclass
class EvalReport:
    errors: np.ndarray
    predictions: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.mean(self.errors))


def evaluate(ckpt: Checkpoint, shard: DatasetShard) -> EvalReport:
    cfg = ckpt.config
    expect = (cfg.grid,) * cfg.dim
    if shard.grid != expect:
        raise ConfigError(f"shard grid {shard.grid} does not match checkpoint grid {expect}")
    pred = predict(ckpt.params, cfg, shard.inputs)
    return EvalReport(relative_errors(pred, shard.targets), pred)


def write_report(path, report: EvalReport) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["sample", "rel_error"])
        for i, e in enumerate(report.errors):
            w.writerow([i, f"{e:.12e}"])


def write_fields(path, shard: DatasetShard, report: EvalReport) -> None:
    """Long-format CSV of truth, prediction and difference at every grid point."""
    with open(Path(path), "w", newline="") as f:
        w = csv.writer(f)
        dims = shard.targets.ndim - 1
        w.writerow(["sample"] + [f"i{d}" for d in range(dims)]
                   + ["truth", "prediction", "difference"])
        for s in range(len(shard)):
            for idx in np.ndindex(shard.targets.shape[1:]):
                t = shard.targets[(s,) + idx]
                p = report.predictions[(s,) + idx]
                w.writerow([s, *idx, f"{t:.12e}", f"{p:.12e}", f"{p - t:.12e}"])
