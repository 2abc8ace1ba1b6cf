"""Quantum Fourier layers as differentiable ops.

1D: a field ``(B, n, c)`` is loaded as the matrix ``X[c, j]`` on a channel
register (first) and a grid register (second, bit-reversal permuted), then
QFT on the grid register, learning blocks for modes ``0..K-1``, inverse QFT,
and measurement. 2D: a block ``(B, m, n, c)`` is loaded as a 3-tensor with the
channel register first and both spatial axes permuted.

The output is ``||X|| * sqrt(p)`` on the unary indices, which equals ``|U X|``
for the circuit's unitary ``U``. The encoder is simulated in the forward pass;
the backward pass uses the exact identity ``psi0 = X / ||X||`` for its
Jacobian and the adjoint sweep for the angles.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from . import autodiff as ad
from .encoding import decode_unary, encode_2d, encode_3d
from .qft import bit_reversal, qft_gates
from .statevec import (CircuitProgram, LeakageError, StateVector, adjoint_vjp,
                       embed_unary, measure_unary_probabilities, run, unary_amplitudes)
from .variational import ccz_learning_block_3d, cz_learning_block_2d

LEAK_TOL = 1e-9


@lru_cache(maxsize=16)
def spectral_program_1d(d_q: int, n: int, K: int) -> CircuitProgram:
    """QFT on the grid register, learning blocks, inverse QFT."""
    blocks = cz_learning_block_2d(d_q, n, K)
    grid = range(d_q, d_q + n)
    prog = CircuitProgram(d_q + n, registers=dict(blocks.registers),
                          num_params=blocks.num_params)
    prog.extend(qft_gates(grid))
    prog.extend(blocks.gates)
    prog.extend(qft_gates(grid, inverse=True))
    return prog


@lru_cache(maxsize=16)
def spectral_program_2d(k: int, m: int, n: int, Kx: int, Ky: int) -> CircuitProgram:
    blocks = ccz_learning_block_3d(k, m, n, Kx, Ky)
    rows, cols = range(k, k + m), range(k + m, k + m + n)
    prog = CircuitProgram(k + m + n, registers=dict(blocks.registers),
                          num_params=blocks.num_params)
    prog.extend(qft_gates(rows) + qft_gates(cols))
    prog.extend(blocks.gates)
    prog.extend(qft_gates(rows, inverse=True) + qft_gates(cols, inverse=True))
    return prog


class _Layout:
    """Maps a field ``(B, *grid, c)`` to register order and back."""

    def __init__(self, grid: tuple[int, ...], c: int):
        self.grid = grid
        self.c = c
        self.perms = [bit_reversal(g) for g in grid]
        d = len(grid)
        # register tensor axes: 1D (B, c, n); 2D (B, c, m, n)
        self.to_reg = (0, d + 1) + tuple(range(1, d + 1))
        self.from_reg = tuple(np.argsort(self.to_reg))
        if d == 1:
            self.registers = [(0, c), (c, grid[0])]
        else:
            self.registers = [(0, c), (c, grid[0]), (c + grid[0], grid[1])]
        self.num_qubits = c + sum(grid)

    def permute(self, a: np.ndarray) -> np.ndarray:
        for ax, p in enumerate(self.perms):
            a = np.take(a, p, axis=2 + ax)
        return a

    def to_registers(self, field: np.ndarray) -> np.ndarray:
        return self.permute(np.transpose(field, self.to_reg))

    def from_registers(self, reg: np.ndarray) -> np.ndarray:
        # bit reversal is an involution
        return np.transpose(self.permute(reg), self.from_reg)


def _encode(reg: np.ndarray) -> StateVector:
    """Simulate the unary loader for a batch of register tensors."""
    if reg.ndim == 3:
        plan = encode_2d(reg)
    else:
        # encode_3d takes (m, n, k) with the channel register first on the wires
        plan = encode_3d(np.moveaxis(reg, 1, -1))
    return run(plan.program, batch=reg.shape[0])


def _quantum_op(kind: str, field, theta, program: CircuitProgram, layout: _Layout):
    cache: dict = {}

    def fwd(xf, th):
        B = xf.shape[0]
        reg = layout.to_registers(xf)
        axes = tuple(range(1, reg.ndim))
        norm = np.sqrt(np.sum(reg ** 2, axis=axes))
        live = norm > 0
        safe = reg.copy()
        safe[~live] = 0.0
        safe[(~live,) + (0,) * (reg.ndim - 1)] = 1.0
        psi0 = _encode(safe)
        final = run(program, psi0, th.ravel())
        p, leaked = measure_unary_probabilities(final, layout.registers, tol=LEAK_TOL)
        out = decode_unary(p, np.where(live, norm, 0.0))
        cache.update(final=final, norm=norm, live=live, batch=B)
        return layout.from_registers(out)

    def bwd(g, o, xf, th):
        final, norm, live = cache["final"], cache["norm"], cache["live"]
        amps = unary_amplitudes(final, layout.registers)
        mag = np.abs(amps)
        phase = np.where(mag > 0, amps / np.where(mag > 0, mag, 1.0), 0.0)
        gr = layout.to_registers(g)
        scale = np.where(live, norm, 0.0).reshape((-1,) + (1,) * (gr.ndim - 1))
        lam = embed_unary(gr * scale * phase, layout.registers, layout.num_qubits)
        dtheta, lam0 = adjoint_vjp(program, th.ravel(), final, lam.amplitudes)
        dreg = np.real(unary_amplitudes(StateVector(layout.num_qubits, lam0), layout.registers))
        dreg = dreg / np.where(scale > 0, scale, 1.0)
        return layout.from_registers(dreg), dtheta.reshape(th.shape)

    return ad.record(kind, [field, theta], fwd, bwd)


def quantum_fourier_1d(x, theta, K: int) -> ad.Tensor:
    """``x``: ``(B, n, c)``; ``theta``: ``(K, D)`` angles for a width-``c`` layer."""
    x = ad._lift(x)
    B, n, c = x.shape
    prog = spectral_program_1d(c, n, K)
    return _quantum_op("quantum-fourier-1d", x, theta, prog, _Layout((n,), c))


def quantum_fourier_2d(y, theta, modes: tuple[int, int]) -> ad.Tensor:
    """``y``: ``(B, m, n, c)``; ``theta``: ``(Kx, Ky, D)``."""
    y = ad._lift(y)
    B, m, n, c = y.shape
    prog = spectral_program_2d(c, m, n, *modes)
    return _quantum_op("quantum-fourier-2d", y, theta, prog, _Layout((m, n), c))


__all__ = ["quantum_fourier_1d", "quantum_fourier_2d", "spectral_program_1d",
           "spectral_program_2d", "LeakageError"]
