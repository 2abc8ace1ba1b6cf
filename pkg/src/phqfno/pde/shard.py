"""Dataset shards on disk (see :mod:`phqfno.binfmt` for the container)."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..binfmt import FormatError, read_container, write_container


@dataclass
class DatasetShard:
    inputs: np.ndarray
    targets: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.targets = np.asarray(self.targets, dtype=float)
        if self.inputs.shape != self.targets.shape:
            raise ValueError(f"inputs {self.inputs.shape} and targets "
                             f"{self.targets.shape} are not aligned")
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.targets))):
            raise ValueError("shard contains non-finite values")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def grid(self) -> tuple[int, ...]:
        return self.inputs.shape[1:]

    def subset(self, idx) -> "DatasetShard":
        return DatasetShard(self.inputs[idx], self.targets[idx], dict(self.meta))


def write_shard(path, shard: DatasetShard) -> None:
    write_container(Path(path), "SHARD", {"meta": shard.meta},
                    {"inputs": shard.inputs, "targets": shard.targets})


def read_shard(path) -> DatasetShard:
    header, arrays = read_container(Path(path), "SHARD")
    if set(arrays) != {"inputs", "targets"}:
        raise FormatError(f"{path}: expected inputs and targets, found {sorted(arrays)}")
    return DatasetShard(arrays["inputs"], arrays["targets"], header.get("meta", {}))
