"""Unary (one-hot) amplitude loaders for vectors, matrices and 3-tensors.

A length-``n`` vector is loaded on ``n`` wires by an ``X`` on the first wire
followed by a chain of ``n - 1`` RBS gates on neighbouring wires. Matrices and
3-tensors are loaded register by register: the norms of the rows (slices) go
into the first register, then each row (slice) is loaded into the remaining
registers. Per-row loaders are not controlled; only the ``CNOT`` that seeds a
row is. Before seeding row ``i`` the inverse of row ``i``'s own loader is
applied; on branches already loaded it cancels against the loader that follows
the seed, and unseeded branches sit in ``|0...0>`` where RBS acts trivially.

All builders accept a leading batch axis; gate angles then become arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .statevec import RBS, CircuitProgram, Gate, cnot, rbs, x

DEGENERATE_TOL = 1e-14


class EncodingError(ValueError):
    pass


@dataclass
class EncodingPlan:
    program: CircuitProgram
    norm: float | np.ndarray
    shape: tuple[int, ...]

    @property
    def registers(self) -> list[tuple[int, int]]:
        return list(self.program.registers.values())

    @property
    def schedule(self) -> list[tuple[tuple[int, int], object]]:
        """(wire pair, angle) for every RBS, in application order."""
        return [(g.wires, g.angle) for g in self.program.gates if g.kind == RBS]


def encoding_angles(x_unit, check: bool = True) -> np.ndarray:
    """RBS angles loading a unit vector; accepts a leading batch axis.

    Angles satisfy ``x_0 = cos t_0``, ``x_k = cos t_k * prod_{j<k} sin t_j`` and
    ``x_{n-1} = prod_j sin t_j`` with signs preserved: all but the last angle lie
    in ``[0, pi]`` and the last one carries the sign of the tail.
    """
    v = np.asarray(x_unit, dtype=float)
    n = v.shape[-1]
    if n < 2:
        raise EncodingError("need at least two entries")
    if check:
        norms = np.linalg.norm(v, axis=-1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise EncodingError(f"input is not a unit vector (norm {norms})")
    # tail[k] = ||v[k:]||
    tail = np.sqrt(np.cumsum(v[..., ::-1] ** 2, axis=-1)[..., ::-1])
    theta = np.zeros(v.shape[:-1] + (n - 1,))
    theta[..., : n - 2] = np.arctan2(tail[..., 1 : n - 1], v[..., : n - 2])
    theta[..., n - 2] = np.arctan2(v[..., n - 1], v[..., n - 2])
    live = np.ones(v.shape[:-1] + (n - 1,), dtype=bool)
    # residual prod_{j<k} sin t_j equals tail[k]; once it vanishes the rest is 0
    live &= np.minimum.accumulate(tail[..., : n - 1] >= DEGENERATE_TOL, axis=-1)
    return np.where(live, theta, 0.0)


def loader(wires, angles) -> list[Gate]:
    """RBS chain on consecutive ``wires``; ``angles`` has a trailing axis n-1."""
    angles = np.asarray(angles, dtype=float)
    return [rbs(wires[k], wires[k + 1], _angle(angles[..., k])) for k in range(len(wires) - 1)]


def _angle(a):
    a = np.asarray(a, dtype=float)
    return float(a) if a.ndim == 0 else a


def _inverse(gates: list[Gate]) -> list[Gate]:
    return [g.inverse() for g in reversed(gates)]


def _normalise(values: np.ndarray, axes: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
    norm = np.sqrt(np.sum(values ** 2, axis=axes))
    if np.any(norm == 0):
        raise EncodingError("cannot encode an all-zero input")
    return values / np.expand_dims(norm, axes), norm


def _safe_unit(v: np.ndarray) -> np.ndarray:
    """Normalise along the last axis; zero vectors map to e_0."""
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    out = np.where(n > 0, v / np.where(n > 0, n, 1.0), 0.0)
    out[..., 0] = np.where(n[..., 0] > 0, out[..., 0], 1.0)
    return out


def _check_width(n: int) -> None:
    if n < 2:
        raise EncodingError("register width must be at least 2")


def encode_1d(vec) -> EncodingPlan:
    """Load ``vec / ||vec||`` on ``len(vec)`` wires."""
    v = np.asarray(vec, dtype=float)
    n = v.shape[-1]
    _check_width(n)
    unit, norm = _normalise(v, (v.ndim - 1,))
    prog = CircuitProgram(n, registers={"data": (0, n)})
    prog.append(x(0))
    prog.extend(loader(range(n), encoding_angles(unit, check=False)))
    return EncodingPlan(prog, _angle(norm), (n,))


def _matrix_gates(mat_unit: np.ndarray, row_wires, col_wires, seed_x: bool) -> list[Gate]:
    """Gates loading a unit-Frobenius matrix (leading batch allowed)."""
    m = mat_unit.shape[-2]
    row_norms = np.sqrt(np.sum(mat_unit ** 2, axis=-1))
    gates: list[Gate] = []
    if seed_x:
        gates.append(x(row_wires[0]))
    gates.extend(loader(row_wires, encoding_angles(row_norms, check=False)))
    first = True
    for i in range(m):
        if not np.any(row_norms[..., i] > 0):
            continue
        row = loader(col_wires, encoding_angles(_safe_unit(mat_unit[..., i, :]), check=False))
        if not first:
            gates.extend(_inverse(row))
        gates.append(cnot(row_wires[i], col_wires[0]))
        gates.extend(row)
        first = False
    return gates


def encode_2d(mat) -> EncodingPlan:
    """Load ``X / ||X||_F`` on registers ``rows`` (m wires) and ``cols`` (n wires).

    Row ``i`` and column ``j`` map to the basis state with row wire ``i`` and
    column wire ``j`` excited.
    """
    a = np.asarray(mat, dtype=float)
    m, n = a.shape[-2:]
    _check_width(m)
    _check_width(n)
    unit, norm = _normalise(a, (a.ndim - 2, a.ndim - 1))
    prog = CircuitProgram(m + n, registers={"rows": (0, m), "cols": (m, n)})
    prog.extend(_matrix_gates(unit, list(range(m)), list(range(m, m + n)), seed_x=True))
    return EncodingPlan(prog, _angle(norm), (m, n))


def encode_3d(tensor) -> EncodingPlan:
    """Load ``Y / ||Y||`` for ``Y`` of shape (m, n, k), entries ``Y[i, j, l]``.

    Wire layout is ``channels`` (k wires, index l) then ``rows`` (m, index i)
    then ``cols`` (n, index j). Slice norms ``||Y[:, :, l]||`` are loaded first.
    """
    t = np.asarray(tensor, dtype=float)
    m, n, k = t.shape[-3:]
    for w in (m, n, k):
        _check_width(w)
    nd = t.ndim
    unit, norm = _normalise(t, (nd - 3, nd - 2, nd - 1))
    ch = list(range(k))
    rows = list(range(k, k + m))
    cols = list(range(k + m, k + m + n))
    prog = CircuitProgram(k + m + n, registers={"channels": (0, k), "rows": (k, m),
                                                "cols": (k + m, n)})
    slice_norms = np.sqrt(np.sum(unit ** 2, axis=(nd - 3, nd - 2)))
    prog.append(x(ch[0]))
    prog.extend(loader(ch, encoding_angles(slice_norms, check=False)))
    first = True
    for l in range(k):
        s = slice_norms[..., l]
        if not np.any(s > 0):
            continue
        sl = unit[..., l]
        safe = np.where(s > 0, s, 1.0)[..., None, None]
        sl_unit = np.where(s[..., None, None] > 0, sl / safe, 0.0)
        # zero slices in part of a batch get an arbitrary (valid) loader
        if np.ndim(s) > 0:
            sl_unit[s == 0, 0, 0] = 1.0
        sub = _matrix_gates(sl_unit, rows, cols, seed_x=False)
        if not first:
            prog.extend(_inverse(sub))
        prog.append(cnot(ch[l], rows[0]))
        prog.extend(sub)
        first = False
    return EncodingPlan(prog, _angle(norm), (m, n, k))


def decode_unary(probabilities, norm) -> np.ndarray:
    """Magnitudes ``norm * sqrt(p)``; ``norm`` broadcasts over leading axes."""
    p = np.asarray(probabilities, dtype=float)
    if np.any(p < -1e-12):
        raise EncodingError(f"negative probability {p.min():.3e}")
    p = np.clip(p, 0.0, None)
    norm = np.asarray(norm, dtype=float)
    return norm.reshape(norm.shape + (1,) * (p.ndim - norm.ndim)) * np.sqrt(p)
