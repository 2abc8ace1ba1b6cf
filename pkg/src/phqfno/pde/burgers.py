"""Viscous Burgers ``u_t + (u^2/2)_x = nu u_xx`` on a periodic interval.

Pseudo-spectral in space with two-thirds dealiasing. Diffusion is treated by
Crank-Nicolson and advection by Heun's method (explicit trapezoid), which is
second order overall.
"""
from __future__ import annotations

import numpy as np

from .spectral import SolverError, dealias_mask, refine, restrict

DEFAULT_NU = 0.1
CFL = 0.5


def _advection(uh: np.ndarray, ik: np.ndarray, mask: np.ndarray) -> np.ndarray:
    u = np.fft.ifft(uh * mask, axis=-1).real
    return -0.5 * ik * mask * np.fft.fft(u * u, axis=-1)


def _stable_dt(u: np.ndarray, dx: float, dt: float, min_dt: float) -> float:
    umax = float(np.max(np.abs(u))) if u.size else 0.0
    while umax * dt > CFL * dx:
        dt *= 0.5
        if dt < min_dt:
            raise SolverError(f"CFL restriction needs dt below the minimum {min_dt:g}")
    return dt


def solve_burgers(u0, nu: float = DEFAULT_NU, t_end: float = 1.0, fine: int = 256,
                  length: float = 1.0, dt: float = 1e-3, out: int | None = None,
                  times=None, min_dt: float = 1e-7) -> np.ndarray:
    """Integrate from ``u0`` (shape ``(..., n)``) to ``t_end``.

    ``u0`` is interpolated onto ``fine`` points when coarser. The solution is
    subsampled to ``out`` points (default: the input resolution). If ``times``
    is given, snapshots at each of those times are returned stacked on a new
    leading axis instead.
    """
    if nu < 0:
        raise ValueError("viscosity must be non-negative")
    u0 = np.asarray(u0, dtype=float)
    n_in = u0.shape[-1]
    out = n_in if out is None else out
    n = max(fine, n_in)
    u = refine(u0, n, 1)
    k = 2.0 * np.pi / length * np.fft.fftfreq(n, d=1.0 / n)
    ik = 1j * k
    mask = dealias_mask(n, 1)
    dx = length / n
    targets = [t_end] if times is None else sorted(float(t) for t in times)
    uh = np.fft.fft(u, axis=-1)
    t = 0.0
    snaps = []
    for target in targets:
        while t < target - 1e-12:
            step = _stable_dt(np.fft.ifft(uh, axis=-1).real, dx, min(dt, target - t), min_dt)
            a = 0.5 * nu * k ** 2 * step
            lhs = 1.0 + a
            rhs = 1.0 - a
            n0 = _advection(uh, ik, mask)
            pred = (rhs * uh + step * n0) / lhs
            uh = (rhs * uh + 0.5 * step * (n0 + _advection(pred, ik, mask))) / lhs
            t += step
        u = np.fft.ifft(uh, axis=-1).real
        if not np.all(np.isfinite(u)):
            raise SolverError(f"solution blew up before t={target}")
        snaps.append(restrict(u, out, 1))
    return snaps[0] if times is None else np.stack(snaps)
