"""Dense statevector simulation.

Amplitudes are stored as a flat array indexed by the computational-basis
integer, with qubit 0 as the most significant bit. Gate application goes
through the stride kernels in :mod:`questa.kernels`; :func:`full_unitary`
builds the dense circuit matrix from Kronecker products and exists only as an
independent oracle.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import kernels

NORM_TOL = 1e-10
IMAG_TOL = 1e-10
MAX_ORACLE_QUBITS = 10


class GateKind(enum.Enum):
    I = "I"
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    CNOT = "CNOT"

    @property
    def is_rotation(self) -> bool:
        return self in (GateKind.RX, GateKind.RY, GateKind.RZ)

    @property
    def n_wires(self) -> int:
        return 2 if self is GateKind.CNOT else 1

    @property
    def opcode(self) -> int:
        return _OPCODES[self]


_OPCODES = {GateKind.RX: kernels.RX, GateKind.RY: kernels.RY, GateKind.RZ: kernels.RZ,
            GateKind.CNOT: kernels.CNOT}
OPCODE_KIND = {v: k for k, v in _OPCODES.items()}


def gate_matrix(kind: GateKind, angle: float = 0.0) -> np.ndarray:
    """Matrix of a vocabulary gate; 2x2 for single-qubit kinds, 4x4 for CNOT."""
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    if kind is GateKind.I:
        return np.eye(2, dtype=complex)
    if kind is GateKind.RX:
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if kind is GateKind.RY:
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind is GateKind.RZ:
        return np.array([[np.exp(-0.5j * angle), 0], [0, np.exp(0.5j * angle)]], dtype=complex)
    if kind is GateKind.CNOT:
        return np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
    raise ValueError(f"unknown gate kind {kind!r}")


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    angle: float = 0.0


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized amplitude vector of an ``n``-qubit register (read-only)."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128).ravel()
        n = amps.size.bit_length() - 1
        if amps.size < 1 or 1 << n != amps.size:
            raise ValueError(f"state length {amps.size} is not a power of two")
        norm = np.vdot(amps, amps).real
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n(self) -> int:
        return self.amplitudes.size.bit_length() - 1

    @classmethod
    def zero(cls, n: int) -> "StateVector":
        amps = np.zeros(1 << n, dtype=complex)
        amps[0] = 1.0
        return cls(amps)

    @classmethod
    def basis(cls, bits: str) -> "StateVector":
        """Basis state from a bitstring, leftmost character is qubit 0."""
        amps = np.zeros(1 << len(bits), dtype=complex)
        amps[int(bits, 2)] = 1.0
        return cls(amps)

    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


def apply_gate(state: StateVector, gate: Gate | GateKind, wires: Sequence[int]) -> StateVector:
    """Return ``state`` with one gate applied on ``wires``.

    CNOT takes ``(control, target)``; rotations take a single wire.
    """
    if isinstance(gate, GateKind):
        gate = Gate(gate)
    wires = tuple(int(w) for w in wires)
    n = state.n
    if len(wires) != gate.kind.n_wires:
        raise ValueError(f"{gate.kind.value} takes {gate.kind.n_wires} wire(s), got {len(wires)}")
    if any(w < 0 or w >= n for w in wires):
        raise ValueError(f"wire index out of range for {n} qubits: {wires}")
    if len(set(wires)) != len(wires):
        raise ValueError(f"duplicate wires {wires}")
    if gate.kind is GateKind.I:
        return state
    target = wires[1] if gate.kind is GateKind.CNOT else -1
    ops = np.array([[gate.kind.opcode, wires[0], target]])
    out = kernels.run(ops, np.array([gate.angle]), state.amplitudes, n)
    return StateVector(out[0])


@dataclass(frozen=True)
class PauliString:
    """Weighted tensor product of single-qubit Paulis; letter 0 acts on qubit 0."""

    letters: str
    coeff: float = 1.0

    def __post_init__(self):
        letters = self.letters.upper()
        if not letters or any(ch not in "IXYZ" for ch in letters):
            raise ValueError(f"invalid Pauli string {self.letters!r}")
        if not np.isfinite(self.coeff):
            raise ValueError("Pauli coefficient must be finite")
        object.__setattr__(self, "letters", letters)
        object.__setattr__(self, "coeff", float(self.coeff))

    @property
    def n(self) -> int:
        return len(self.letters)

    def action(self) -> tuple[int, np.ndarray]:
        """(flip mask, phases) such that P|b> = phases[b] * |b ^ mask>."""
        n = self.n
        idx = np.arange(1 << n)
        mask = 0
        phase = np.ones(1 << n, dtype=complex)
        for q, ch in enumerate(self.letters):
            bit = 1 << (n - 1 - q)
            sign = np.where(idx & bit, -1.0, 1.0)
            if ch == "X":
                mask |= bit
            elif ch == "Y":
                mask |= bit
                phase = phase * (1j * sign)
            elif ch == "Z":
                phase = phase * sign
        return mask, phase


class PauliSum:
    """A real-weighted sum of Pauli strings, grouped by bit-flip pattern."""

    def __init__(self, terms: Sequence[PauliString]):
        terms = tuple(terms)
        if not terms:
            raise ValueError("empty Pauli sum")
        n = terms[0].n
        if any(t.n != n for t in terms):
            raise ValueError("all Pauli strings must have the same length")
        self.terms = terms
        self.n = n
        groups: dict[int, np.ndarray] = {}
        for t in terms:
            mask, phase = t.action()
            groups[mask] = groups.get(mask, 0) + t.coeff * phase
        self._masks = sorted(groups)
        self._phases = [groups[m] for m in self._masks]
        idx = np.arange(1 << n)
        self._perms = [idx ^ m for m in self._masks]
        self.coeff_l1 = float(sum(abs(t.coeff) for t in terms))

    def expect(self, states: np.ndarray) -> np.ndarray:
        """<psi|H|psi> for each row of ``states`` (batch, 2**n)."""
        states = np.atleast_2d(states)
        if states.shape[-1] != 1 << self.n:
            raise ValueError(f"observable acts on {self.n} qubits, state has {states.shape[-1]} amplitudes")
        total = np.zeros(states.shape[:-1], dtype=complex)
        for mask, perm, phase in zip(self._masks, self._perms, self._phases):
            if mask == 0:
                probs = states.real**2 + states.imag**2
                total += np.sum(probs * phase.real, axis=-1)
                if np.any(phase.imag):
                    total += 1j * np.sum(probs * phase.imag, axis=-1)
            else:
                total += np.sum(np.conj(states[..., perm]) * phase * states, axis=-1)
        bound = IMAG_TOL * max(1.0, self.coeff_l1)
        if np.any(np.abs(total.imag) > bound):
            raise RuntimeError("expectation has a non-negligible imaginary part")
        return total.real

    def matrix(self) -> np.ndarray:
        dim = 1 << self.n
        m = np.zeros((dim, dim), dtype=complex)
        cols = np.arange(dim)
        for perm, phase in zip(self._perms, self._phases):
            m[perm, cols] += phase
        return m


def expectation(state: StateVector, observable: Sequence[PauliString] | PauliSum) -> float:
    """Sum_k c_k <psi|P_k|psi>; the imaginary residue is checked then dropped."""
    if not isinstance(observable, PauliSum):
        observable = PauliSum(observable)
    if observable.n != state.n:
        raise ValueError(f"observable acts on {observable.n} qubits, state has {state.n}")
    return float(observable.expect(state.amplitudes[None, :])[0])


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2 clamped to [0, 1]."""
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: {a.n} vs {b.n} qubits")
    return float(min(1.0, max(0.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)))


def batch_fidelity(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    f = np.abs(np.sum(np.conj(a) * b, axis=-1)) ** 2
    return np.clip(f, 0.0, 1.0)


def _embed(u: np.ndarray, wire: int, n: int) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for q in range(n):
        out = np.kron(out, u if q == wire else np.eye(2))
    return out


def _embed_cnot(control: int, target: int, n: int) -> np.ndarray:
    p0 = np.diag([1.0, 0.0]).astype(complex)
    p1 = np.diag([0.0, 1.0]).astype(complex)
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    a = np.eye(1, dtype=complex)
    b = np.eye(1, dtype=complex)
    for q in range(n):
        a = np.kron(a, p0 if q == control else np.eye(2))
        b = np.kron(b, p1 if q == control else (x if q == target else np.eye(2)))
    return a + b


def full_unitary(circuit, params=(), x=None) -> np.ndarray:
    """Dense 2**n x 2**n matrix of a compiled circuit (oracle use, n <= 10)."""
    n = circuit.n_qubits
    if n > MAX_ORACLE_QUBITS:
        raise ValueError(f"{n} qubits is too large for a dense unitary (max {MAX_ORACLE_QUBITS})")
    u = np.eye(1 << n, dtype=complex)
    for kind, wires, angle in circuit.resolved_gates(params, x):
        if kind is GateKind.CNOT:
            g = _embed_cnot(wires[0], wires[1], n)
        else:
            g = _embed(gate_matrix(kind, angle), wires[0], n)
        u = g @ u
    return u


def simulate(circuit, params=(), x=None, backend=None) -> np.ndarray:
    """Final amplitudes from |0...0>, one row per input sample.

    ``x`` is a (batch, n_features) array; circuits without feature slots run
    a single row when ``x`` is None.
    """
    angles = circuit.angles(params, x)
    states = np.zeros((angles.shape[0], 1 << circuit.n_qubits), dtype=complex)
    states[:, 0] = 1.0
    return kernels.run(circuit.ops, angles, states, circuit.n_qubits, backend=backend)


def final_state(circuit, params=(), x=None) -> StateVector:
    return StateVector(simulate(circuit, params, x)[0])
