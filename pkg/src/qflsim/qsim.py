"""Minimal dense statevector simulator.

Convention used everywhere in this package: qubit 0 is the least
significant bit of the basis-state index, so basis state ``i`` assigns
qubit ``k`` the bit ``(i >> k) & 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MAX_QUBITS = 16

_INV_SQRT2 = 1.0 / math.sqrt(2.0)

_H = np.array([[_INV_SQRT2, _INV_SQRT2], [_INV_SQRT2, -_INV_SQRT2]], dtype=complex)
_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


def _ry_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle / 2.0), math.sin(angle / 2.0)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _rz_matrix(angle: float) -> np.ndarray:
    return np.array(
        [[np.exp(-0.5j * angle), 0.0], [0.0, np.exp(0.5j * angle)]], dtype=complex
    )


def _p_matrix(angle: float) -> np.ndarray:
    return np.array([[1.0, 0.0], [0.0, np.exp(1j * angle)]], dtype=complex)


@dataclass(frozen=True)
class Gate:
    """Single gate instance: kind, target qubit(s) and optional angle."""

    kind: str  # one of H, X, Z, RY, RZ, P, CX
    qubits: tuple[int, ...]
    angle: float = 0.0

    _MATRIX_BUILDERS = {
        "H": lambda a: _H,
        "X": lambda a: _X,
        "Z": lambda a: _Z,
        "RY": _ry_matrix,
        "RZ": _rz_matrix,
        "P": _p_matrix,
    }

    def __post_init__(self):
        if self.kind == "CX":
            if len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]:
                raise ValueError("CX needs two distinct qubits")
        elif self.kind in self._MATRIX_BUILDERS:
            if len(self.qubits) != 1:
                raise ValueError(f"{self.kind} acts on exactly one qubit")
        else:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if any(q < 0 for q in self.qubits):
            raise ValueError("negative qubit index")

    def matrix(self) -> np.ndarray:
        """2x2 matrix for single-qubit gates; 4x4 for CX."""
        if self.kind == "CX":
            m = np.eye(4, dtype=complex)
            m[[2, 3]] = m[[3, 2]]
            return m
        return self._MATRIX_BUILDERS[self.kind](self.angle)

    def inverse(self) -> "Gate":
        if self.kind in ("RY", "RZ", "P"):
            return Gate(self.kind, self.qubits, -self.angle)
        return self  # H, X, Z, CX are involutions


def h(q: int) -> Gate:
    return Gate("H", (q,))


def x(q: int) -> Gate:
    return Gate("X", (q,))


def z(q: int) -> Gate:
    return Gate("Z", (q,))


def ry(angle: float, q: int) -> Gate:
    return Gate("RY", (q,), angle)


def rz(angle: float, q: int) -> Gate:
    return Gate("RZ", (q,), angle)


def p(angle: float, q: int) -> Gate:
    return Gate("P", (q,), angle)


def cx(control: int, target: int) -> Gate:
    return Gate("CX", (control, target))


@dataclass(frozen=True)
class Circuit:
    qubit_count: int
    gates: tuple[Gate, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not 1 <= self.qubit_count <= MAX_QUBITS:
            raise ValueError(f"qubit_count must be in [1, {MAX_QUBITS}]")
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if any(q >= self.qubit_count for q in g.qubits):
                raise ValueError(
                    f"gate {g.kind} on qubits {g.qubits} out of range for "
                    f"{self.qubit_count} qubits"
                )

    def inverse(self) -> "Circuit":
        """Reverse gate order and invert each gate."""
        return Circuit(self.qubit_count, tuple(g.inverse() for g in reversed(self.gates)))


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    qubit_count: int

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2**self.qubit_count,):
            raise ValueError("amplitude length must be 2**qubit_count")
        amps = amps.copy()
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)


def zero_state(qubit_count: int) -> StateVector:
    amps = np.zeros(2**qubit_count, dtype=complex)
    amps[0] = 1.0
    return StateVector(amps, qubit_count)


def apply_gate_batch(amps: np.ndarray, gate: Gate) -> np.ndarray:
    """Apply one gate to a (batch, 2**q) amplitude array. Returns a new array."""
    dim = amps.shape[-1]
    idx = np.arange(dim)
    out = amps.copy()
    if gate.kind == "CX":
        c, t = gate.qubits
        sel = ((idx >> c) & 1 == 1) & ((idx >> t) & 1 == 0)
        i0 = idx[sel]
        i1 = i0 | (1 << t)
        out[..., i0] = amps[..., i1]
        out[..., i1] = amps[..., i0]
        return out
    (q,) = gate.qubits
    m = gate.matrix()
    i0 = idx[(idx >> q) & 1 == 0]
    i1 = i0 | (1 << q)
    a0 = amps[..., i0]
    a1 = amps[..., i1]
    out[..., i0] = m[0, 0] * a0 + m[0, 1] * a1
    out[..., i1] = m[1, 0] * a0 + m[1, 1] * a1
    return out


def apply_circuit(state: StateVector, circuit: Circuit) -> StateVector:
    if state.qubit_count != circuit.qubit_count:
        raise ValueError("state/circuit qubit count mismatch")
    amps = np.array(state.amplitudes)
    for gate in circuit.gates:
        amps = apply_gate_batch(amps, gate)
    return StateVector(amps, state.qubit_count)


def probabilities(state: StateVector) -> np.ndarray:
    return np.abs(state.amplitudes) ** 2


def expectation_z(state: StateVector, qubit: int) -> float:
    if not 0 <= qubit < state.qubit_count:
        raise ValueError("qubit index out of range")
    idx = np.arange(2**state.qubit_count)
    signs = 1.0 - 2.0 * ((idx >> qubit) & 1)
    return float(np.dot(signs, probabilities(state)))


def sample_counts(state: StateVector, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Optional shot-sampling mode: multinomial counts over basis states."""
    probs = probabilities(state)
    probs = probs / probs.sum()
    return rng.multinomial(shots, probs)
