"""2D incompressible Navier-Stokes in vorticity-streamfunction form on [0,1)^2.

    w_t + u . grad w = nu Lap w + f,   -Lap psi = w,   u = (psi_y, -psi_x)

Pseudo-spectral with two-thirds dealiasing, Crank-Nicolson diffusion and Heun
advection, as in the Burgers solver.
"""
from __future__ import annotations

import warnings

import numpy as np

from .spectral import SolverError, dealias_mask, refine, restrict

DEFAULT_NU = 1e-3
CFL = 0.5


def default_forcing(n: int) -> np.ndarray:
    x = np.arange(n) / n
    gx, gy = np.meshgrid(x, x, indexing="ij")
    s = 2.0 * np.pi * (gx + gy)
    return 0.1 * (np.sin(s) + np.cos(s))


class _Grid:
    def __init__(self, n: int):
        k = 2.0 * np.pi * np.fft.fftfreq(n, d=1.0 / n)
        self.kx, self.ky = np.meshgrid(k, k, indexing="ij")
        self.k2 = self.kx ** 2 + self.ky ** 2
        self.inv_k2 = np.where(self.k2 > 0, 1.0 / np.where(self.k2 > 0, self.k2, 1.0), 0.0)
        self.mask = dealias_mask(n, 2)
        self.n = n

    def velocity(self, wh: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        psi = wh * self.inv_k2
        u = np.fft.ifft2(1j * self.ky * psi).real
        v = np.fft.ifft2(-1j * self.kx * psi).real
        return u, v

    def advection(self, wh: np.ndarray) -> np.ndarray:
        wh = wh * self.mask
        u, v = self.velocity(wh)
        wx = np.fft.ifft2(1j * self.kx * wh).real
        wy = np.fft.ifft2(1j * self.ky * wh).real
        return -np.fft.fft2(u * wx + v * wy) * self.mask


def _integrate(wh, grid: _Grid, fh, nu, t, target, dt, min_dt):
    dx = 1.0 / grid.n
    while t < target - 1e-12:
        step = min(dt, target - t)
        u, v = grid.velocity(wh)
        speed = float(np.max(np.abs(u)) + np.max(np.abs(v))) if u.size else 0.0
        while speed * step > CFL * dx:
            step *= 0.5
            if step < min_dt:
                raise SolverError(f"CFL restriction needs dt below the minimum {min_dt:g}")
        a = 0.5 * nu * grid.k2 * step
        lhs, rhs = 1.0 + a, 1.0 - a
        n0 = grid.advection(wh) + fh
        pred = (rhs * wh + step * n0) / lhs
        wh = (rhs * wh + 0.5 * step * (n0 + grid.advection(pred) + fh)) / lhs
        t += step
    if not np.all(np.isfinite(wh)):
        raise SolverError(f"vorticity blew up before t={target}")
    return wh, t


def solve_ns_vorticity(w0, nu: float = DEFAULT_NU, forcing="default", t0: float = 30.0,
                       t1: float = 31.0, fine: int = 64, dt: float = 1e-2,
                       out: int | None = None, min_dt: float = 1e-6
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(w(t0), w(t1))`` restricted to ``out`` points per axis.

    ``w0`` has shape ``(..., n, n)``; ``forcing`` is ``"default"``, ``None`` or
    an array on the fine grid.
    """
    w0 = np.asarray(w0, dtype=float)
    n_in = w0.shape[-1]
    out = n_in if out is None else out
    n = max(fine, n_in)
    w = refine(w0, n, 2)
    mean = w.mean(axis=(-2, -1), keepdims=True)
    if np.any(np.abs(mean) > 1e-12):
        warnings.warn("initial vorticity has non-zero mean; subtracting it", stacklevel=2)
        w = w - mean
    if isinstance(forcing, str):
        if forcing != "default":
            raise ValueError(f"unknown forcing {forcing!r}")
        f = default_forcing(n)
    elif forcing is None:
        f = np.zeros((n, n))
    else:
        f = refine(np.asarray(forcing, dtype=float), n, 2)
    grid = _Grid(n)
    fh = np.fft.fft2(f)
    wh = np.fft.fft2(w)
    wh, t = _integrate(wh, grid, fh, nu, 0.0, t0, dt, min_dt)
    first = restrict(np.fft.ifft2(wh).real, out, 2)
    wh, t = _integrate(wh, grid, fh, nu, t, t1, dt, min_dt)
    second = restrict(np.fft.ifft2(wh).real, out, 2)
    return first, second
