"""Classical Fourier layer: radix-2 FFT, truncated spectral mixing, bypass conv.

The transform uses the same sign as the unary QFT, ``exp(+2*pi*i*jk/n)``, with
unitary ``1/sqrt(n)`` scaling. Modes outside the retained block pass through
unchanged so the classical branch is comparable mode-for-mode with the quantum
learning blocks.
"""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor
from .qft import bit_reversal


def _check_pow2(n: int) -> None:
    if n < 1 or n & (n - 1):
        raise ValueError(f"FFT length {n} is not a power of two")


def _fft_axis(z: np.ndarray, axis: int, inverse: bool) -> np.ndarray:
    """Iterative decimation-in-time FFT along ``axis``."""
    n = z.shape[axis]
    _check_pow2(n)
    a = np.moveaxis(z, axis, -1)[..., bit_reversal(n)].astype(complex)
    sign = -1.0 if inverse else 1.0
    size = 2
    while size <= n:
        half = size // 2
        tw = np.exp(sign * 2j * np.pi * np.arange(half) / size)
        a = a.reshape(a.shape[:-1] + (n // size, size))
        top = a[..., :half].copy()
        bot = a[..., half:] * tw
        a[..., :half] = top + bot
        a[..., half:] = top - bot
        a = a.reshape(a.shape[:-2] + (n,))
        size *= 2
    return np.moveaxis(a / np.sqrt(n), -1, axis)


def classical_fft(field, axes=(-1,), inverse: bool = False) -> np.ndarray:
    """Unitary DFT of ``field`` along ``axes``."""
    out = np.asarray(field, dtype=complex)
    for ax in np.atleast_1d(axes):
        out = _fft_axis(out, int(ax), inverse)
    return out


def fft(re, im, axes, inverse: bool = False) -> tuple[Tensor, Tensor]:
    """Differentiable transform on a (real, imaginary) pair.

    The unitary DFT matrix is symmetric, so the pullback of a cotangent is the
    transform in the opposite direction.
    """
    axes = tuple(int(a) for a in np.atleast_1d(axes))

    def fwd(xr, xi):
        z = classical_fft(xr + 1j * xi, axes, inverse)
        return z.real.copy(), z.imag.copy()

    def bwd(g, o, xr, xi):
        z = classical_fft(g[0] + 1j * g[1], axes, not inverse)
        return z.real, z.imag
    return ad.record("fft-inverse" if inverse else "fft", [re, im], fwd, bwd)


def _mix(sr, si, wr, wi) -> tuple[Tensor, Tensor]:
    """Channel mix ``out[..., d] = sum_c s[..., c] w[..., c, d]``."""
    nd = sr.ndim
    sr = ad.reshape(sr, sr.shape + (1,))
    si = ad.reshape(si, si.shape + (1,))
    pr, pi = ad.cmul(sr, si, wr, wi)
    return ad.sum(pr, axis=nd - 1), ad.sum(pi, axis=nd - 1)


def spectral_multiply(sr, si, wr, wi, modes) -> tuple[Tensor, Tensor]:
    """Mix the lowest modes of a spectrum; other modes pass through.

    1D: spectrum ``(B, n, C)``, weights ``(K, C, C)``, ``modes = K``.
    2D: spectrum ``(B, nx, ny, C)``, weights ``(Kx, Ky, C, C)``, ``modes = (Kx, Ky)``.
    """
    sr, si, wr, wi = (ad._lift(t) for t in (sr, si, wr, wi))
    modes = tuple(int(k) for k in np.atleast_1d(modes))
    dims = len(modes)
    grid = sr.shape[1:1 + dims]
    c = sr.shape[-1]
    if (sr.ndim != dims + 2 or si.shape != sr.shape or wr.shape != wi.shape
            or wr.shape != modes + (c, c)):
        raise ShapeError("spectral-multiply", [sr.shape, si.shape, wr.shape, wi.shape])
    if any(k < 0 or k > g for k, g in zip(modes, grid)):
        raise ShapeError("spectral-multiply", [sr.shape], f"modes {modes} exceed grid {grid}")
    if any(k == 0 for k in modes):
        return sr, si
    if dims == 1:
        (K,) = modes
        lo = _mix(sr[:, :K], si[:, :K], wr, wi)
        if K == grid[0]:
            return lo
        return tuple(ad.concat([part, whole[:, K:]], axis=1) for part, whole in zip(lo, (sr, si)))
    Kx, Ky = modes
    lo = _mix(sr[:, :Kx, :Ky], si[:, :Kx, :Ky], wr, wi)
    out = []
    for part, whole in zip(lo, (sr, si)):
        if Ky < grid[1]:
            part = ad.concat([part, whole[:, :Kx, Ky:]], axis=2)
        if Kx < grid[0]:
            part = ad.concat([part, whole[:, Kx:]], axis=1)
        out.append(part)
    return tuple(out)


def conv_bypass(x, kernel, bias=None) -> Tensor:
    """Circular channel-mixing convolution over the grid axes.

    ``x`` is ``(B, *grid, C)``; ``kernel`` is ``(*ksize, C, C')`` with odd
    extents centred on the output point.
    """
    x, kernel = ad._lift(x), ad._lift(kernel)
    dims = kernel.ndim - 2
    if x.ndim != dims + 2 or kernel.shape[-2] != x.shape[-1]:
        raise ShapeError("conv", [x.shape, kernel.shape])
    ksize = kernel.shape[:dims]
    if any(k % 2 == 0 for k in ksize):
        raise ShapeError("conv", [kernel.shape], "kernel extents must be odd")
    out = None
    for offset in np.ndindex(*ksize):
        shifted = x
        for d, (o, k) in enumerate(zip(offset, ksize)):
            s = o - k // 2
            if s:
                shifted = ad.roll(shifted, -s, axis=1 + d)
        term = ad.matmul(shifted, kernel[offset])
        out = term if out is None else out + term
    if bias is not None:
        out = out + bias
    return out


def fourier_layer_classical(x, params: dict[str, Tensor], modes, activation: str = "gelu"
                            ) -> Tensor:
    """``act(real(ifft(mix(fft(x)))) + conv(x))`` for ``x`` of shape ``(B, *grid, C)``.

    ``params`` holds ``w_re``, ``w_im``, ``conv`` and ``conv_b``.
    """
    x = ad._lift(x)
    axes = tuple(range(1, x.ndim - 1))
    zero = Tensor(np.zeros(x.shape))
    sr, si = fft(x, zero, axes)
    sr, si = spectral_multiply(sr, si, params["w_re"], params["w_im"], modes)
    yr, _ = fft(sr, si, axes, inverse=True)
    y = yr + conv_bypass(x, params["conv"], params.get("conv_b"))
    return ad.ACTIVATIONS[activation](y)


def spectral_path(x: np.ndarray, w: np.ndarray, modes) -> np.ndarray:
    """Complex ``ifft(mix(fft(x)))`` without the real part, for plain arrays."""
    axes = tuple(range(1, x.ndim - 1))
    s = classical_fft(x, axes)
    sr, si = spectral_multiply(s.real, s.imag, w.real, w.imag, modes)
    return classical_fft(sr.data + 1j * si.data, axes, inverse=True)
