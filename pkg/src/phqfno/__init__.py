"""Hybrid quantum/classical Fourier neural operators on a state-vector simulator."""
from .hybrid import HybridConfig, forward, init_params, load_checkpoint, save_checkpoint, table_config
from .training import TrainConfig, train

__version__ = "0.1.0"

__all__ = ["HybridConfig", "forward", "init_params", "load_checkpoint", "save_checkpoint",
           "table_config", "TrainConfig", "train"]
