"""Periodic Gaussian random fields with covariance ``amp * (-Lap + shift)^-exponent``.

On the unit torus the eigenvalue of ``-Lap`` for wavevector ``k`` is
``4 pi^2 |k|^2``, so mode ``k`` has variance

    lambda_k = amp * (4 pi^2 |k|^2 + shift) ** -exponent

and a sample is ``sum_k sqrt(lambda_k) xi_k exp(2 pi i k.x)`` with complex
standard normal ``xi_k`` subject to ``xi_{-k} = conj(xi_k)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GrfSpec:
    grid: int
    dim: int = 1
    amplitude: float = 7.0 ** 1.5
    shift: float = 49.0
    exponent: float = 2.5
    seed: int = 0

    def __post_init__(self):
        if self.grid < 2 or self.grid & (self.grid - 1):
            raise ValueError(f"grid {self.grid} is not a power of two")
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")


def wavenumbers(n: int) -> np.ndarray:
    """Integer frequencies in numpy FFT order."""
    return np.fft.fftfreq(n, d=1.0 / n)


def eigenvalues(spec: GrfSpec) -> np.ndarray:
    k = wavenumbers(spec.grid)
    if spec.dim == 1:
        k2 = k ** 2
    else:
        kx, ky = np.meshgrid(k, k, indexing="ij")
        k2 = kx ** 2 + ky ** 2
    return spec.amplitude * (4.0 * np.pi ** 2 * k2 + spec.shift) ** (-spec.exponent)


def _hermitian_noise(rng: np.random.Generator, shape: tuple[int, ...], dims: int) -> np.ndarray:
    """Complex standard normals with ``xi[-k] = conj(xi[k])`` over the last ``dims`` axes.

    Self-conjugate modes (zero and Nyquist) come out real with unit variance.
    """
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    axes = tuple(range(len(shape) - dims, len(shape)))
    flipped = np.conj(z)
    for ax in axes:
        flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
    xi = (z + flipped) / np.sqrt(2.0)
    # on self-conjugate modes z + conj(z) = 2 Re z has variance 1 after the scaling
    return xi


def sample_grf(spec: GrfSpec, count: int, zero_mean: bool = False,
               rng: np.random.Generator | None = None) -> np.ndarray:
    """``count`` real fields of shape ``(count, grid[, grid])``."""
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    shape = (count,) + (spec.grid,) * spec.dim
    coeff = np.sqrt(eigenvalues(spec)) * _hermitian_noise(rng, shape, spec.dim)
    if zero_mean:
        coeff[(slice(None),) + (0,) * spec.dim] = 0.0
    axes = tuple(range(1, spec.dim + 1))
    field = np.fft.ifftn(coeff, axes=axes) * spec.grid ** spec.dim
    return field.real
