"""Dataset builders for the three problems."""
from __future__ import annotations

import numpy as np

from .burgers import DEFAULT_NU as BURGERS_NU, solve_burgers
from .grf import GrfSpec, sample_grf
from .navier_stokes import DEFAULT_NU as NS_NU, solve_ns_vorticity
from .shard import DatasetShard

SHOCK_NU = 0.01 / np.pi


def burgers_dataset(count: int, seed: int = 0, nu: float = BURGERS_NU, grid: int = 8,
                    fine: int = 256, t_end: float = 1.0, dt: float = 1e-3) -> DatasetShard:
    """GRF initial conditions on the fine grid mapped to ``u(., t_end)``."""
    u0 = sample_grf(GrfSpec(fine, 1, seed=seed), count)
    u1 = solve_burgers(u0, nu, t_end, fine=fine, dt=dt, out=grid)
    meta = {"problem": "burgers", "viscosity": nu, "t0": 0.0, "t1": t_end, "grid": [grid],
            "fine_grid": fine, "seed": seed, "domain": [0.0, 1.0],
            "assumed": ["viscosity"]}
    return DatasetShard(u0[:, :: fine // grid], u1, meta)


def navier_stokes_dataset(count: int, seed: int = 0, nu: float = NS_NU, grid: int = 8,
                          fine: int = 64, t0: float = 30.0, t1: float = 31.0,
                          dt: float = 1e-2) -> DatasetShard:
    """Vorticity ``w(t0)`` mapped to ``w(t1)`` from zero-mean GRF initial data."""
    w0 = sample_grf(GrfSpec(fine, 2, seed=seed), count, zero_mean=True)
    a, b = solve_ns_vorticity(w0, nu, "default", t0, t1, fine=fine, dt=dt, out=grid)
    meta = {"problem": "navier-stokes", "viscosity": nu, "t0": t0, "t1": t1,
            "grid": [grid, grid], "fine_grid": fine, "seed": seed,
            "forcing": "0.1*(sin(2pi(x+y)) + cos(2pi(x+y)))", "domain": [0.0, 1.0],
            "assumed": ["forcing"]}
    return DatasetShard(a, b, meta)


def shock_trajectory(nu: float = SHOCK_NU, grid: int = 8, fine: int = 2048,
                     t_max: float = 10.0, snap_dt: float = 0.05, dt: float = 1e-3
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Snapshots of the ``-sin(pi x)`` solution on [-1, 1) at ``0, snap_dt, ..., t_max``."""
    x = -1.0 + 2.0 * np.arange(fine) / fine
    times = np.round(np.arange(0.0, t_max + 0.5 * snap_dt, snap_dt), 12)
    snaps = solve_burgers(-np.sin(np.pi * x), nu, t_max, fine=fine, length=2.0, dt=dt,
                          out=grid, times=times)
    return times, snaps


def shock_datasets(t_split: float = 4.0, **kwargs) -> tuple[DatasetShard, DatasetShard]:
    """One-step pairs ``u(t) -> u(t + snap_dt)``; targets up to ``t_split`` train, later ones test."""
    times, snaps = shock_trajectory(**kwargs)
    nu = kwargs.get("nu", SHOCK_NU)
    later = times[1:]
    train = later <= t_split + 1e-12
    meta = {"problem": "burgers-shock", "viscosity": nu, "grid": [snaps.shape[-1]],
            "domain": [-1.0, 1.0], "snap_dt": float(times[1] - times[0]), "t_split": t_split}
    pairs_in, pairs_out = snaps[:-1], snaps[1:]
    return (DatasetShard(pairs_in[train], pairs_out[train], dict(meta, split="train")),
            DatasetShard(pairs_in[~train], pairs_out[~train], dict(meta, split="test")))
