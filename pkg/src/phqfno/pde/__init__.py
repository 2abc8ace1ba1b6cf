from .burgers import solve_burgers
from .datasets import burgers_dataset, navier_stokes_dataset, shock_datasets, shock_trajectory
from .grf import GrfSpec, sample_grf
from .navier_stokes import default_forcing, solve_ns_vorticity
from .shard import DatasetShard, read_shard, write_shard
from .spectral import SolverError

__all__ = ["solve_burgers", "burgers_dataset", "navier_stokes_dataset", "shock_datasets",
           "shock_trajectory", "GrfSpec", "sample_grf", "default_forcing",
           "solve_ns_vorticity", "DatasetShard", "read_shard", "write_shard", "SolverError"]
