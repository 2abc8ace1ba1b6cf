"""Unary-basis QFT built from the radix-2 Cooley-Tukey butterfly.

The sign convention throughout the package is ``omega_n = exp(+2*pi*i/n)``:

    xhat_k = n**-0.5 * sum_j x_j * exp(+2*pi*i*j*k/n)

Each cross is ``Phase(pi + 2*pi*k/N)`` (that is ``-omega_N**k``) on the lower
wire followed by ``RBS(pi/4)`` on (upper, lower), which maps amplitudes
``(a, b)`` to ``((a + w b)/sqrt2, (a - w b)/sqrt2)`` with ``w = omega_N**k``.
Inputs must be loaded in bit-reversed order; outputs come out in natural order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .statevec import CircuitError, CircuitProgram, Gate, phase, rbs


def _log2(n: int) -> int:
    if n < 1 or n & (n - 1):
        raise ValueError(f"{n} is not a power of two")
    return n.bit_length() - 1


def bit_reversal(n: int) -> np.ndarray:
    """Index map reversing the log2(n)-bit binary representation."""
    bits = _log2(n)
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@dataclass(frozen=True)
class Cross:
    upper: int
    lower: int
    k: int
    size: int

    @property
    def omega(self) -> complex:
        return np.exp(2j * np.pi * self.k / self.size)


def butterfly_schedule(n: int) -> list[list[Cross]]:
    """Crosses per stage on local wire positions 0..n-1."""
    stages = []
    for s in range(1, _log2(n) + 1):
        size = 2 ** s
        half = size // 2
        stage = [Cross(b + k, b + k + half, k, size)
                 for b in range(0, n, size) for k in range(half)]
        stages.append(stage)
    return stages


def qft_gates(wires, inverse: bool = False) -> list[Gate]:
    wires = list(wires)
    n = len(wires)
    gates: list[Gate] = []
    for stage in butterfly_schedule(n):
        for c in stage:
            gates.append(phase(wires[c.lower], np.pi + 2.0 * np.pi * c.k / c.size))
            gates.append(rbs(wires[c.upper], wires[c.lower], np.pi / 4))
    if inverse:
        gates = [g.inverse() for g in reversed(gates)]
    return gates


def qft_circuit(register: tuple[int, int], n: int, inverse: bool = False,
                num_qubits: int | None = None) -> CircuitProgram:
    """QFT (or its adjoint) on ``register = (start, width)``."""
    start, width = register
    if width != n:
        raise CircuitError(f"register width {width} does not match transform size {n}")
    _log2(n)
    total = num_qubits if num_qubits is not None else start + width
    prog = CircuitProgram(total, registers={"qft": (start, width)})
    prog.extend(qft_gates(range(start, start + width), inverse))
    return prog


def permute_axes(values: np.ndarray, axes) -> np.ndarray:
    """Apply the bit-reversal permutation along each axis in ``axes``."""
    out = np.asarray(values)
    for ax in np.atleast_1d(axes):
        out = np.take(out, bit_reversal(out.shape[ax]), axis=int(ax))
    return out


def qft_rowwise_2d(rows: tuple[int, int], cols: tuple[int, int], num_qubits: int,
                   inverse: bool = False) -> CircuitProgram:
    """Per-row transform: QFT on the column register only."""
    prog = CircuitProgram(num_qubits, registers={"rows": rows, "cols": cols})
    prog.extend(qft_gates(range(cols[0], cols[0] + cols[1]), inverse))
    return prog


def qft_2d_on_3d(channels: tuple[int, int], rows: tuple[int, int], cols: tuple[int, int],
                 num_qubits: int, inverse: bool = False) -> CircuitProgram:
    """2D transform of every channel slice: QFT on rows and on cols."""
    prog = CircuitProgram(num_qubits, registers={"channels": channels, "rows": rows,
                                                 "cols": cols})
    prog.extend(qft_gates(range(rows[0], rows[0] + rows[1]), inverse))
    prog.extend(qft_gates(range(cols[0], cols[0] + cols[1]), inverse))
    return prog
