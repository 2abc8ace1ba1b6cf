"""Trainable orthogonal layers and the controlled learning blocks.

The orthogonal layer ``P(theta)`` is a butterfly of RBS gates: stage ``s``
couples positions ``p`` and ``p + 2**s`` for every ``p`` with bit ``s`` clear.
On the unary subspace it acts as an orthogonal matrix and it uses
``(n/2) * log2(n)`` angles.

A learning block for one Fourier mode is

    P(theta)  ->  Z-pattern  ->  P^dagger(-theta)  ->  Z-pattern

where the Z-pattern puts ``Z`` on every first-register position with odd
popcount, controlled so that it fires on every mode except the selected one.
``Z`` on exactly one wire of an RBS pair flips the sign of its angle, so on the
controlled branches the block collapses to ``P(theta)^dagger P(theta) = I``
while the selected mode gets ``W = P^dagger(-theta) P(theta)``.
"""
from __future__ import annotations

import numpy as np

from .statevec import (CircuitError, CircuitProgram, Gate, StateVector, ccz, cz, rbs, run,
                       unary_amplitudes, x)


def _log2(n: int) -> int:
    if n < 1 or n & (n - 1):
        raise CircuitError(f"register width {n} is not a power of two")
    return n.bit_length() - 1


def orthogonal_param_count(n: int) -> int:
    return (n // 2) * _log2(n)


def butterfly_pairs(n: int) -> list[tuple[int, int]]:
    pairs = []
    for s in range(_log2(n)):
        step = 1 << s
        pairs.extend((p, p + step) for p in range(n) if not p & step)
    return pairs


def odd_positions(n: int) -> list[int]:
    """Positions whose popcount is odd; ``Z`` there anticommutes with every butterfly RBS."""
    return [p for p in range(n) if bin(p).count("1") % 2]


def layer_gates(wires, slot_offset: int = 0, negate: bool = False) -> list[Gate]:
    """``P(theta)`` on ``wires`` with slots ``slot_offset ...``; ``negate`` builds ``P(-theta)``."""
    wires = list(wires)
    coeff = -1.0 if negate else 1.0
    return [rbs(wires[a], wires[b], 0.0, slot_offset + i, coeff)
            for i, (a, b) in enumerate(butterfly_pairs(len(wires)))]


def dagger_negated_gates(wires, slot_offset: int = 0) -> list[Gate]:
    """``P^dagger(-theta)``: the gates of ``P(-theta)`` inverted, in reverse order."""
    return [g.inverse() for g in reversed(layer_gates(wires, slot_offset, negate=True))]


def _check_theta(theta, shape: tuple[int, ...]) -> np.ndarray:
    t = np.asarray(theta, dtype=float)
    if t.shape != shape:
        raise CircuitError(f"expected parameters of shape {shape} (D={shape[-1]} per layer), "
                           f"got {t.shape}")
    return t


def orthogonal_layer(n: int, theta) -> CircuitProgram:
    d = orthogonal_param_count(n)
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.size != d:
        raise CircuitError(f"orthogonal layer of width {n} needs D={d} parameters, "
                           f"got {theta.size}")
    return CircuitProgram(n, layer_gates(range(n)), {"data": (0, n)}, d, theta)


def _unary_matrix(program: CircuitProgram, register: tuple[int, int]) -> np.ndarray:
    """Matrix ``M`` with ``new = M @ old`` on the unary subspace of one register."""
    start, n = register
    total = program.num_qubits
    probes = np.zeros((n, 2 ** total), dtype=complex)
    for s in range(n):
        probes[s, 1 << (total - 1 - (start + s))] = 1.0
    out = run(program, StateVector(total, probes))
    return unary_amplitudes(out, [register]).T


def layer_matrix(n: int, theta) -> np.ndarray:
    return _unary_matrix(orthogonal_layer(n, theta), (0, n)).real


def effective_weight(n: int, theta) -> np.ndarray:
    """``W = P^dagger(-theta) P(theta)`` on the unary subspace, acting as ``new = W @ old``."""
    d = orthogonal_param_count(n)
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.size != d:
        raise CircuitError(f"orthogonal layer of width {n} needs D={d} parameters, "
                           f"got {theta.size}")
    prog = CircuitProgram(n, layer_gates(range(n)) + dagger_negated_gates(range(n)),
                          {"data": (0, n)}, d, theta)
    return _unary_matrix(prog, (0, n)).real


def _z_pattern(controls: list[int], targets: list[int]) -> list[Gate]:
    """``Z`` on ``targets`` whenever any control wire is 1 (one or two controls)."""
    gates: list[Gate] = []
    for t in targets:
        if len(controls) == 1:
            gates.append(cz(controls[0], t))
        else:
            c1, c2 = controls
            # Z^(c1 + c2 + c1*c2) = Z^(c1 OR c2)
            gates.extend([cz(c1, t), cz(c2, t), ccz(c1, c2, t)])
    return gates


def learning_block_gates(target_wires, selectors: list[int], slot_offset: int) -> list[Gate]:
    """One mode's block; ``selectors`` are the wires (one per register) marking the mode."""
    target_wires = list(target_wires)
    odd = [target_wires[p] for p in odd_positions(len(target_wires))]
    flips = [x(w) for w in selectors]
    pattern = _z_pattern(list(selectors), odd)
    return (flips
            + layer_gates(target_wires, slot_offset)
            + pattern
            + dagger_negated_gates(target_wires, slot_offset)
            + pattern
            + flips)


def cz_learning_block_2d(m: int, n: int, K: int, thetas=None) -> CircuitProgram:
    """Blocks for modes ``0..K-1`` of the second register, acting on the first.

    ``thetas`` has shape ``(K, D)`` with ``D`` the orthogonal-layer count for ``m``.
    """
    if not 0 <= K <= n:
        raise CircuitError(f"K={K} outside [0, {n}]")
    d = orthogonal_param_count(m)
    prog = CircuitProgram(m + n, registers={"first": (0, m), "second": (m, n)},
                          num_params=K * d)
    for j in range(K):
        prog.extend(learning_block_gates(range(m), [m + j], j * d))
    if thetas is not None:
        prog.params = _check_theta(thetas, (K, d)).ravel()
    return prog


def ccz_learning_block_3d(k: int, m: int, n: int, Kx: int, Ky: int, thetas=None
                          ) -> CircuitProgram:
    """Blocks for modes ``(i, j)``, ``i < Kx`` on rows and ``j < Ky`` on cols.

    Wire layout matches :func:`encoding.encode_3d`: channels (k), rows (m), cols (n).
    ``thetas`` has shape ``(Kx, Ky, D)`` with ``D`` the orthogonal-layer count for ``k``.
    """
    if not 0 <= Kx <= m or not 0 <= Ky <= n:
        raise CircuitError(f"modes ({Kx}, {Ky}) outside [0, {m}] x [0, {n}]")
    d = orthogonal_param_count(k)
    prog = CircuitProgram(k + m + n, registers={"channels": (0, k), "rows": (k, m),
                                                "cols": (k + m, n)},
                          num_params=Kx * Ky * d)
    for i in range(Kx):
        for j in range(Ky):
            prog.extend(learning_block_gates(range(k), [k + i, k + m + j], (i * Ky + j) * d))
    if thetas is not None:
        prog.params = _check_theta(thetas, (Kx, Ky, d)).ravel()
    return prog


def quantum_param_count(d_q: int, modes: int, groups: int = 1) -> int:
    """Angles of ``groups`` quantum layers each with ``modes`` learning blocks."""
    if d_q == 0:
        return 0
    return groups * modes * orthogonal_param_count(d_q)


def classical_param_count(d_c: int, modes: int) -> int:
    """Complex spectral weights of the classical layer (``modes`` = K or Kx*Ky)."""
    return modes * d_c * d_c
