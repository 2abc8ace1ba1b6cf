"""Dense state-vector simulation for unary-basis circuits.

Wire 0 is the leftmost bit of a basis label, so on four qubits ``X`` on wire 0
maps ``|0000>`` to ``|1000>`` (basis index 8). Amplitude arrays may carry a
leading batch axis; every gate then acts on each batch entry, and gate angles
may themselves be per-sample arrays of shape ``(batch,)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

MAX_QUBITS = 12

X, PHASE, RBS, CZ, CCZ, CNOT = "X", "Phase", "RBS", "CZ", "CCZ", "CNOT"
_ARITY = {X: 1, PHASE: 1, RBS: 2, CZ: 2, CCZ: 3, CNOT: 2}
_PARAMETRIC = {PHASE, RBS}


class CircuitError(ValueError):
    pass


class LeakageError(RuntimeError):
    """Probability mass escaped the unary subspace."""

    def __init__(self, leaked: float):
        self.leaked = leaked
        super().__init__(f"{leaked:.3e} probability mass outside the unary subspace")


@dataclass(eq=False)
class Gate:
    """A gate on explicit wires.

    The effective angle is ``angle + coeff * theta[slot]`` when ``slot`` is set,
    otherwise ``angle``. For ``Phase`` the angle is the phase ``phi`` in
    ``diag(1, exp(i*phi))``; for ``RBS`` it is the rotation angle.
    """

    kind: str
    wires: tuple[int, ...]
    angle: float | np.ndarray = 0.0
    slot: int | None = None
    coeff: float = 1.0

    def __post_init__(self):
        if self.kind not in _ARITY:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        self.wires = tuple(int(w) for w in self.wires)
        if len(self.wires) != _ARITY[self.kind]:
            raise CircuitError(f"{self.kind} takes {_ARITY[self.kind]} wires, got {self.wires}")
        if len(set(self.wires)) != len(self.wires):
            raise CircuitError(f"duplicate wires {self.wires} for {self.kind}")
        if self.slot is not None and self.kind not in _PARAMETRIC:
            raise CircuitError(f"{self.kind} cannot carry a trainable angle")

    def resolve(self, theta=None):
        if self.slot is None:
            return self.angle
        if theta is None:
            raise CircuitError(f"gate uses parameter slot {self.slot} but no parameters given")
        return self.angle + self.coeff * theta[self.slot]

    def inverse(self) -> "Gate":
        if self.kind in _PARAMETRIC:
            return Gate(self.kind, self.wires, -np.asarray(self.angle) if isinstance(
                self.angle, np.ndarray) else -self.angle, self.slot, -self.coeff)
        return self

    def shifted(self, offset: int = 0, slot_offset: int = 0) -> "Gate":
        slot = None if self.slot is None else self.slot + slot_offset
        return Gate(self.kind, tuple(w + offset for w in self.wires), self.angle, slot, self.coeff)

    def matrix(self, theta=None) -> np.ndarray:
        """Dense unitary on this gate's own wires, in the gate's wire order."""
        k = len(self.wires)
        local = Gate(self.kind, tuple(range(k)), self.angle, self.slot, self.coeff)
        basis = np.eye(2 ** k, dtype=complex)
        out = _apply(basis.reshape((2 ** k,) + (2,) * k), local, local.resolve(theta), k)
        return out.reshape(2 ** k, 2 ** k).T


def x(w: int) -> Gate:
    return Gate(X, (w,))


def phase(w: int, phi) -> Gate:
    return Gate(PHASE, (w,), phi)


def rbs(w1: int, w2: int, theta=0.0, slot: int | None = None, coeff: float = 1.0) -> Gate:
    return Gate(RBS, (w1, w2), theta, slot, coeff)


def cz(a: int, b: int) -> Gate:
    return Gate(CZ, (a, b))


def ccz(a: int, b: int, c: int) -> Gate:
    return Gate(CCZ, (a, b, c))


def cnot(control: int, target: int) -> Gate:
    return Gate(CNOT, (control, target))


@dataclass
class CircuitProgram:
    """Ordered gate list over named registers of contiguous wires."""

    num_qubits: int
    gates: list[Gate] = field(default_factory=list)
    registers: dict[str, tuple[int, int]] = field(default_factory=dict)
    num_params: int = 0
    params: np.ndarray | None = None

    def __post_init__(self):
        if not 1 <= self.num_qubits <= MAX_QUBITS:
            raise CircuitError(f"num_qubits must be in [1, {MAX_QUBITS}], got {self.num_qubits}")
        self.gates = list(self.gates)
        if self.params is not None:
            self.params = np.asarray(self.params, dtype=float)
            if self.params.shape != (self.num_params,):
                raise CircuitError(f"expected {self.num_params} parameters, "
                                   f"got shape {self.params.shape}")

    def append(self, gate: Gate) -> None:
        self.gates.append(gate)

    def extend(self, gates: Iterable[Gate]) -> None:
        self.gates.extend(gates)

    def inverse(self) -> "CircuitProgram":
        return CircuitProgram(self.num_qubits, [g.inverse() for g in reversed(self.gates)],
                              dict(self.registers), self.num_params, self.params)

    def validate(self) -> None:
        slots = set()
        for g in self.gates:
            if any(w < 0 or w >= self.num_qubits for w in g.wires):
                raise CircuitError(f"{g.kind} wires {g.wires} outside [0, {self.num_qubits})")
            if g.slot is not None:
                slots.add(g.slot)
        if slots and slots != set(range(self.num_params)):
            raise CircuitError(f"parameter slots {sorted(slots)} do not cover "
                               f"range({self.num_params})")
        for name, (start, width) in self.registers.items():
            if start < 0 or start + width > self.num_qubits:
                raise CircuitError(f"register {name!r} exceeds the wire count")

    def count(self, kind: str) -> int:
        return sum(1 for g in self.gates if g.kind == kind)


@dataclass
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if not 1 <= self.num_qubits <= MAX_QUBITS:
            raise CircuitError(f"num_qubits must be in [1, {MAX_QUBITS}]")
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape[-1] != 2 ** self.num_qubits:
            raise CircuitError("amplitude length does not match the qubit count")

    @classmethod
    def zero(cls, num_qubits: int, batch: int | None = None) -> "StateVector":
        shape = (2 ** num_qubits,) if batch is None else (batch, 2 ** num_qubits)
        amps = np.zeros(shape, dtype=complex)
        amps[..., 0] = 1.0
        return cls(num_qubits, amps)

    @classmethod
    def basis(cls, bits: str) -> "StateVector":
        n = len(bits)
        amps = np.zeros(2 ** n, dtype=complex)
        amps[int(bits, 2)] = 1.0
        return cls(n, amps)

    @property
    def batched(self) -> bool:
        return self.amplitudes.ndim == 2

    def norm(self) -> np.ndarray:
        return np.sqrt(np.sum(np.abs(self.amplitudes) ** 2, axis=-1))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


# --- kernels -------------------------------------------------------------------

def _index(n: int, assign: dict[int, int]) -> tuple:
    idx = [slice(None)] * (n + 1)
    for w, v in assign.items():
        idx[1 + w] = v
    return tuple(idx)


def _bcast(a, n_free: int):
    a = np.asarray(a)
    if a.ndim == 0:
        return a
    return a.reshape(a.shape + (1,) * n_free)


def _apply(psi: np.ndarray, gate: Gate, angle, n: int) -> np.ndarray:
    """Apply ``gate`` in place to ``psi`` of shape (batch, 2, ..., 2)."""
    kind, w = gate.kind, gate.wires
    if kind == X:
        i0, i1 = _index(n, {w[0]: 0}), _index(n, {w[0]: 1})
        tmp = psi[i0].copy()
        psi[i0] = psi[i1]
        psi[i1] = tmp
    elif kind == PHASE:
        i1 = _index(n, {w[0]: 1})
        psi[i1] *= _bcast(np.exp(1j * np.asarray(angle)), n - 1)
    elif kind == RBS:
        i10 = _index(n, {w[0]: 1, w[1]: 0})
        i01 = _index(n, {w[0]: 0, w[1]: 1})
        c = _bcast(np.cos(angle), n - 2)
        s = _bcast(np.sin(angle), n - 2)
        a = psi[i10].copy()
        b = psi[i01]
        psi[i10] = c * a - s * b
        psi[i01] = s * a + c * b
    elif kind == CZ:
        psi[_index(n, {w[0]: 1, w[1]: 1})] *= -1.0
    elif kind == CCZ:
        psi[_index(n, {w[0]: 1, w[1]: 1, w[2]: 1})] *= -1.0
    elif kind == CNOT:
        i0 = _index(n, {w[0]: 1, w[1]: 0})
        i1 = _index(n, {w[0]: 1, w[1]: 1})
        tmp = psi[i0].copy()
        psi[i0] = psi[i1]
        psi[i1] = tmp
    return psi


def _inner_derivative(lam: np.ndarray, psi: np.ndarray, gate: Gate, angle, n: int) -> float:
    """Re <lam| dG/d(angle) |psi>, summed over the batch."""
    w = gate.wires
    if gate.kind == RBS:
        i10 = _index(n, {w[0]: 1, w[1]: 0})
        i01 = _index(n, {w[0]: 0, w[1]: 1})
        c = _bcast(np.cos(angle), n - 2)
        s = _bcast(np.sin(angle), n - 2)
        a, b = psi[i10], psi[i01]
        d10 = -s * a - c * b
        d01 = c * a - s * b
        return float(np.real(np.sum(np.conj(lam[i10]) * d10) + np.sum(np.conj(lam[i01]) * d01)))
    if gate.kind == PHASE:
        i1 = _index(n, {w[0]: 1})
        e = _bcast(1j * np.exp(1j * np.asarray(angle)), n - 1)
        return float(np.real(np.sum(np.conj(lam[i1]) * e * psi[i1])))
    raise CircuitError(f"{gate.kind} is not differentiable")


def _check_wires(gate: Gate, n: int) -> None:
    if any(w < 0 or w >= n for w in gate.wires):
        raise CircuitError(f"{gate.kind} wires {gate.wires} outside [0, {n})")


def _tensor_view(state: StateVector) -> np.ndarray:
    amps = state.amplitudes
    batch = amps.shape[0] if amps.ndim == 2 else 1
    return amps.reshape((batch,) + (2,) * state.num_qubits)


def _to_state(psi: np.ndarray, like: StateVector) -> StateVector:
    return StateVector(like.num_qubits, psi.reshape(like.amplitudes.shape))


# --- public operations -----------------------------------------------------------

def apply_gate(state: StateVector, gate: Gate, theta=None) -> StateVector:
    _check_wires(gate, state.num_qubits)
    psi = _tensor_view(state).copy()
    _apply(psi, gate, gate.resolve(theta), state.num_qubits)
    return _to_state(psi, state)


def run(program: CircuitProgram, initial: StateVector | None = None, theta=None,
        batch: int | None = None) -> StateVector:
    """Apply every gate of ``program`` in order."""
    n = program.num_qubits
    if initial is None:
        initial = StateVector.zero(n, batch)
    if initial.num_qubits != n:
        raise CircuitError(f"program has {n} wires, state has {initial.num_qubits}")
    if theta is None:
        theta = program.params
    if theta is not None:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (program.num_params,):
            raise CircuitError(f"expected {program.num_params} parameters, got {theta.shape}")
    psi = _tensor_view(initial).copy()
    for g in program.gates:
        _check_wires(g, n)
        _apply(psi, g, g.resolve(theta), n)
    return _to_state(psi, initial)


@lru_cache(maxsize=64)
def unary_indices(num_qubits: int, registers: tuple[tuple[int, int], ...]) -> np.ndarray:
    """Basis indices of states with exactly one excited wire per register.

    Result has shape ``(w_1, ..., w_r)``; entry ``(i_1, ..., i_r)`` is the index
    with wire ``start_k + i_k`` set for each register ``k``.
    """
    idx = np.zeros([w for _, w in registers], dtype=np.int64)
    for k, (start, width) in enumerate(registers):
        shape = [1] * len(registers)
        shape[k] = width
        bits = 2 ** (num_qubits - 1 - (start + np.arange(width)))
        idx = idx + bits.reshape(shape)
    idx.setflags(write=False)
    return idx


def _reg_tuple(registers) -> tuple[tuple[int, int], ...]:
    return tuple((int(s), int(w)) for s, w in registers)


def unary_amplitudes(state: StateVector, registers: Sequence[tuple[int, int]]) -> np.ndarray:
    idx = unary_indices(state.num_qubits, _reg_tuple(registers))
    return state.amplitudes[..., idx]


def embed_unary(values: np.ndarray, registers: Sequence[tuple[int, int]],
                num_qubits: int) -> StateVector:
    """State whose unary amplitudes are ``values`` (trailing axes = registers)."""
    regs = _reg_tuple(registers)
    idx = unary_indices(num_qubits, regs)
    values = np.asarray(values)
    lead = values.shape[: values.ndim - idx.ndim]
    amps = np.zeros(lead + (2 ** num_qubits,), dtype=complex)
    amps[..., idx] = values
    if amps.ndim > 2:
        raise CircuitError("at most one batch axis is supported")
    return StateVector(num_qubits, amps)


def measure_unary_probabilities(state: StateVector, registers: Sequence[tuple[int, int]],
                                tol: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Probabilities of every unary basis combination, plus leaked mass.

    Raises :class:`LeakageError` if more than ``tol`` probability lies outside
    the unary subspace of the given registers.
    """
    p = np.abs(unary_amplitudes(state, registers)) ** 2
    axes = tuple(range(p.ndim - len(registers), p.ndim))
    leaked = np.abs(1.0 - p.sum(axis=axes) / state.norm() ** 2)
    worst = float(np.max(leaked))
    if worst > tol:
        raise LeakageError(worst)
    return p, leaked


def adjoint_vjp(program: CircuitProgram, theta, final: StateVector,
                amp_cotangent: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reverse sweep from the final state.

    ``amp_cotangent`` holds dL/dRe(a) + i dL/dIm(a) for the final amplitudes.
    Returns ``(dL/dtheta, cotangent of the initial amplitudes)``.
    """
    n = program.num_qubits
    theta = None if theta is None else np.asarray(theta, dtype=float)
    psi = _tensor_view(final).copy()
    lam = np.asarray(amp_cotangent, dtype=complex).reshape(psi.shape).copy()
    grad = np.zeros(program.num_params)
    for g in reversed(program.gates):
        angle = g.resolve(theta)
        inv = g.inverse()
        inv_angle = inv.resolve(theta)
        _apply(psi, inv, inv_angle, n)
        if g.slot is not None:
            grad[g.slot] += g.coeff * _inner_derivative(lam, psi, g, angle, n)
        _apply(lam, inv, inv_angle, n)
    return grad, lam.reshape(final.amplitudes.shape)


def adjoint_gradient(program: CircuitProgram, initial: StateVector, prob_cotangent,
                     theta=None) -> np.ndarray:
    """dC/dtheta for a cost C defined on measured basis probabilities.

    ``prob_cotangent`` is dC/dp over the full computational basis.
    """
    if program.num_params == 0:
        return np.zeros(0)
    if theta is None:
        theta = program.params
    for g in program.gates:
        if g.slot is not None and g.kind not in _PARAMETRIC:
            raise CircuitError(f"{g.kind} cannot carry a trainable angle")
    final = run(program, initial, theta)
    lam = 2.0 * np.asarray(prob_cotangent) * final.amplitudes
    grad, _ = adjoint_vjp(program, theta, final, lam)
    return grad
