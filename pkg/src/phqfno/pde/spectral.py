"""Shared pieces of the pseudo-spectral solvers."""
from __future__ import annotations

import numpy as np
from scipy.signal import resample


class SolverError(RuntimeError):
    pass


def dealias_mask(n: int, dims: int) -> np.ndarray:
    """Two-thirds rule: keep integer frequencies with ``|k| < n/3`` on every axis."""
    k = np.abs(np.fft.fftfreq(n, d=1.0 / n))
    keep = k < n / 3.0
    if dims == 1:
        return keep
    return keep[:, None] & keep[None, :]


def refine(u: np.ndarray, n: int, dims: int) -> np.ndarray:
    """Trigonometric interpolation of periodic data onto ``n`` points per axis."""
    out = np.asarray(u, dtype=float)
    if out.shape[-1] > n:
        raise ValueError(f"cannot refine {out.shape[-1]} points to {n}")
    for ax in range(out.ndim - dims, out.ndim):
        if out.shape[ax] != n:
            out = resample(out, n, axis=ax)
    return out


def restrict(u: np.ndarray, n: int, dims: int) -> np.ndarray:
    """Pointwise subsampling onto ``n`` points per axis."""
    m = u.shape[-1]
    if m % n:
        raise ValueError(f"cannot restrict {m} points to {n}")
    s = m // n
    return np.array(u[(Ellipsis,) + (slice(None, None, s),) * dims])
