"""Data-parallel training: scatter shards once, allreduce gradients every step."""
from __future__ import annotations

import csv
import hashlib
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import autodiff as ad
from .binfmt import canonical_json
from .comm import Endpoint, run_group
from .hybrid import HybridConfig, as_tensors, forward, init_params, save_checkpoint
from .optim import AdamState, NonFiniteGradient, adam_step
from .pde.shard import DatasetShard

METRIC_COLUMNS = ["epoch", "global_train_loss", "test_rel_error", "wall_seconds"]


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    model: HybridConfig = field(default_factory=HybridConfig)
    epochs: int = 20
    batch_size: int | None = None
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    loss: str = "rel_l2"
    schedule: str = "constant"
    checkpoint_every: int = 0

    def __post_init__(self):
        if isinstance(self.model, dict):
            self.model = HybridConfig.from_dict(self.model)
        if self.loss != "rel_l2":
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown schedule {self.schedule!r}")

    def lr_at(self, step: int, total: int) -> float:
        """Learning rate for 0-based ``step`` out of ``total`` updates."""
        if self.schedule == "constant" or total <= 1:
            return self.lr
        return 0.5 * self.lr * (1.0 + np.cos(np.pi * step / total))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = self.model.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)

    def digest(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict())).hexdigest()[:16]


@dataclass
class TrainResult:
    params: dict[str, np.ndarray]
    history: list[dict]
    checkpoint: Path | None = None


# --- losses --------------------------------------------------------------------

def relative_errors(pred: np.ndarray, true: np.ndarray) -> np.ndarray:
    pred, true = np.asarray(pred, dtype=float), np.asarray(true, dtype=float)
    axes = tuple(range(1, true.ndim))
    den = np.sqrt(np.sum(true ** 2, axis=axes))
    if np.any(den == 0):
        raise ValueError("relative error undefined for a zero-norm target")
    return np.sqrt(np.sum((pred - true) ** 2, axis=axes)) / den


def relative_l2_loss(pred, true: np.ndarray) -> ad.Tensor:
    """Batch mean of ``||pred - true|| / ||true||`` per sample."""
    pred = ad._lift(pred)
    true = np.asarray(true, dtype=float)
    if pred.shape != true.shape:
        raise ad.ShapeError("rel-l2", [pred.shape, true.shape])
    axes = tuple(range(1, true.ndim))
    den = np.sqrt(np.sum(true ** 2, axis=axes))
    if np.any(den == 0):
        raise ValueError("relative error undefined for a zero-norm target")
    num = ad.sqrt(ad.sum(ad.square(pred - true), axis=axes))
    return ad.mean(num / den)


def loss_and_grad(params: dict[str, np.ndarray], cfg: HybridConfig, x: np.ndarray,
                  y: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
    with ad.Tape() as tape:
        p = as_tensors(params)
        loss = relative_l2_loss(forward(x, p, cfg), y)
    grads = ad.backward(tape, loss, list(p.values()))
    return float(loss.data), grads


def predict(params: dict[str, np.ndarray], cfg: HybridConfig, x: np.ndarray,
            chunk: int = 256) -> np.ndarray:
    outs = [forward(x[i:i + chunk], params, cfg).data for i in range(0, len(x), chunk)]
    return np.concatenate(outs) if outs else np.zeros((0,) + x.shape[1:])


# --- sharding ------------------------------------------------------------------

def split_shards(shard: DatasetShard, workers: int) -> list[DatasetShard]:
    """Equal contiguous shards; the tail beyond a multiple of ``workers`` is dropped."""
    per = len(shard) // workers
    if per == 0:
        raise ValueError(f"{len(shard)} samples cannot feed {workers} workers")
    return [shard.subset(slice(r * per, (r + 1) * per)) for r in range(workers)]


def _batches(n: int, batch: int | None, rng: np.random.Generator) -> list[np.ndarray]:
    if batch is None or batch >= n:
        return [np.arange(n)]
    order = rng.permutation(n)
    return [order[i:i + batch] for i in range(0, n - batch + 1, batch)]


def params_hash(params: dict[str, np.ndarray]) -> str:
    h = hashlib.sha256()
    for k in sorted(params):
        h.update(k.encode())
        h.update(np.ascontiguousarray(params[k], dtype="<f8").tobytes())
    return h.hexdigest()


# --- training loop ---------------------------------------------------------------

def train(config: TrainConfig, train_shard: DatasetShard, test_shard: DatasetShard | None = None,
          workers: int = 1, transport: str | None = None, out_dir=None,
          init: dict[str, np.ndarray] | None = None,
          on_step: Callable[[int, dict[str, np.ndarray]], None] | None = None) -> TrainResult:
    """Train with ``workers`` data-parallel replicas; returns rank 0's result.

    Each worker sees ``len(train_shard) // workers`` samples. With
    ``batch_size`` set, each worker takes ``batch_size // workers`` local
    samples per step. ``on_step(step, params)`` runs on rank 0 after each update.
    """
    cfg = config.model
    expect = (cfg.grid,) * cfg.dim
    if train_shard.grid != expect:
        raise ValueError(f"shard grid {train_shard.grid} does not match model grid {expect}")
    pieces = split_shards(train_shard, workers)
    start = {k: v.copy() for k, v in (init or init_params(cfg, config.seed)).items()}
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    local_batch = None
    if config.batch_size is not None:
        local_batch = max(1, config.batch_size // workers)

    def worker(ep: Endpoint):
        local = ep.scatter(pieces if ep.is_root else None)
        params = {k: v.copy() for k, v in start.items()}
        state = AdamState()
        history: list[dict] = []
        t0 = time.perf_counter()
        last_ckpt = None
        meta = {"train_config": config.to_dict(), "train_digest": config.digest(),
                "workers": workers}

        def checkpoint(name: str, p):
            path = out_dir / name
            save_checkpoint(path, cfg, p, dict(meta, epoch=len(history) - 1))
            return path

        def record(epoch: int, train_loss: float):
            if not ep.is_root:
                return
            test_err = float("nan")
            if test_shard is not None and len(test_shard):
                test_err = float(np.mean(relative_errors(
                    predict(params, cfg, test_shard.inputs), test_shard.targets)))
            history.append({"epoch": epoch, "global_train_loss": train_loss,
                            "test_rel_error": test_err,
                            "wall_seconds": time.perf_counter() - t0})

        init_loss = ep.allreduce_mean({"loss": np.array(
            float(relative_l2_loss(predict(params, cfg, local.inputs), local.targets).data))})
        record(0, float(init_loss["loss"]))
        step = 0
        per_epoch = len(_batches(len(local), local_batch, np.random.default_rng(0)))
        total = per_epoch * config.epochs
        for epoch in range(1, config.epochs + 1):
            rng = np.random.default_rng([config.seed, epoch])
            losses = []
            for idx in _batches(len(local), local_batch, rng):
                loss, grads = loss_and_grad(params, cfg, local.inputs[idx], local.targets[idx])
                grads["__loss__"] = np.array(loss)
                grads = ep.allreduce_mean(grads)
                gl = float(grads.pop("__loss__"))
                if not np.isfinite(gl):
                    if ep.is_root and out_dir is not None:
                        last_ckpt = checkpoint("last_good.ckpt", params)
                    raise TrainingError(f"non-finite loss at epoch {epoch}; last good "
                                        f"parameters saved to {last_ckpt}")
                try:
                    params, state = adam_step(params, grads, state,
                                              config.lr_at(step, total), config.beta1,
                                              config.beta2, config.eps)
                except NonFiniteGradient:
                    if ep.is_root and out_dir is not None:
                        last_ckpt = checkpoint("last_good.ckpt", params)
                    raise
                losses.append(gl)
                step += 1
                if on_step is not None and ep.is_root:
                    on_step(step, params)
            hashes = ep.allgather(params_hash(params))
            if len(set(hashes)) != 1:
                raise TrainingError(f"workers diverged after epoch {epoch}")
            record(epoch, float(np.mean(losses)))
            if (ep.is_root and out_dir is not None and config.checkpoint_every
                    and epoch % config.checkpoint_every == 0):
                checkpoint(f"epoch_{epoch:04d}.ckpt", params)
        if not ep.is_root:
            return None
        final = None
        if out_dir is not None:
            final = checkpoint("final.ckpt", params)
            write_metrics(out_dir / "metrics.csv", history)
        return TrainResult(params, history, final)

    return run_group(workers, worker, transport)


def write_metrics(path, history: list[dict]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(METRIC_COLUMNS)
        for row in history:
            w.writerow([row["epoch"], f"{row['global_train_loss']:.10e}",
                        f"{row['test_rel_error']:.10e}", f"{row['wall_seconds']:.3f}"])


def read_metrics(path) -> list[dict]:
    with open(path, newline="") as f:
        return [{"epoch": int(r["epoch"]), "global_train_loss": float(r["global_train_loss"]),
                 "test_rel_error": float(r["test_rel_error"]),
                 "wall_seconds": float(r["wall_seconds"])} for r in csv.DictReader(f)]
