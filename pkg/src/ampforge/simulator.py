"""Dense statevector simulator used as the fidelity oracle and QVC engine."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import CNOT_MATRIX, Circuit, Gate, rotation_matrix
from .errors import IndexOutOfRange, TooLarge
from .mps import num_qubits_for, normalize_statevector

SIM_CAP_QUBITS = 20


@dataclass
class SimState:
    amplitudes: np.ndarray
    n_qubits: int

    @classmethod
    def zero(cls, n_qubits: int) -> "SimState":
        if n_qubits > SIM_CAP_QUBITS:
            raise TooLarge(f"{n_qubits} qubits exceeds the simulator cap")
        amps = np.zeros(2**n_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(amps, n_qubits)

    @classmethod
    def from_vector(cls, v) -> "SimState":
        v = normalize_statevector(v)
        n = num_qubits_for(v.size)
        if n > SIM_CAP_QUBITS:
            raise TooLarge(f"{n} qubits exceeds the simulator cap")
        return cls(v.copy(), n)

    def copy(self) -> "SimState":
        return SimState(self.amplitudes.copy(), self.n_qubits)


def _gate_matrix(gate: Gate) -> np.ndarray:
    if gate.kind == "cnot":
        return CNOT_MATRIX
    if gate.kind == "u2q":
        return np.asarray(gate.matrix, dtype=np.complex128)
    return rotation_matrix(gate.kind, gate.angle)


def _apply_matrix(amps: np.ndarray, n: int, gate: Gate) -> np.ndarray:
    """Gate action on amplitudes shaped (2**n, ...batch); returns same shape."""
    for q in gate.qubits:
        if not 0 <= q < n:
            raise IndexOutOfRange(f"qubit {q} outside register of {n}")
    m = _gate_matrix(gate)
    batch_shape = amps.shape[1:]
    psi = amps.reshape([2] * n + list(batch_shape))
    axes = gate.qubits
    psi = np.moveaxis(psi, axes, range(len(axes)))
    lead = psi.shape[: len(axes)]
    shaped = psi.reshape(int(np.prod(lead)), -1)
    out = (m @ shaped).reshape(psi.shape)
    out = np.moveaxis(out, range(len(axes)), axes)
    return np.ascontiguousarray(out).reshape(amps.shape)


def apply_gate(state: SimState, gate: Gate) -> SimState:
    """Apply one gate; qubit 0 is the most significant bit of the index."""
    return SimState(_apply_matrix(state.amplitudes, state.n_qubits, gate),
                    state.n_qubits)


def run_batch(c: Circuit, amps: np.ndarray) -> np.ndarray:
    """Run a circuit over states stacked as columns of a (2**n, batch) array."""
    if c.n_qubits > SIM_CAP_QUBITS:
        raise TooLarge(f"{c.n_qubits} qubits exceeds the simulator cap")
    out = np.asarray(amps, dtype=np.complex128)
    for gate in c.gates:
        out = _apply_matrix(out, c.n_qubits, gate)
    return out


def run(c: Circuit, initial: SimState | None = None) -> SimState:
    """Run a circuit from |0...0> or from the supplied state."""
    if c.n_qubits > SIM_CAP_QUBITS:
        raise TooLarge(f"{c.n_qubits} qubits exceeds the simulator cap")
    state = SimState.zero(c.n_qubits) if initial is None else initial.copy()
    for gate in c.gates:
        state = apply_gate(state, gate)
    return state


def state_fidelity(a, b) -> float:
    """|<a|b>|**2 for dense vectors or SimStates."""
    va = a.amplitudes if isinstance(a, SimState) else np.asarray(a)
    vb = b.amplitudes if isinstance(b, SimState) else np.asarray(b)
    return float(abs(np.vdot(va, vb)) ** 2)


@dataclass(frozen=True)
class Observable:
    """Diagonal readout: a Pauli-Z string or a computational-basis projector."""

    kind: str  # zstring | projector
    qubits: tuple[int, ...]
    bits: tuple[int, ...] = ()
    scale: float = 1.0

    def diagonal(self, n_qubits: int) -> np.ndarray:
        idx = np.arange(2**n_qubits, dtype=np.uint64)
        if self.kind == "zstring":
            mask = np.uint64(0)
            for q in self.qubits:
                mask |= np.uint64(1 << (n_qubits - 1 - q))
            parity = np.bitwise_count(idx & mask) & np.uint64(1)
            return self.scale * np.where(parity == 0, 1.0, -1.0)
        if self.kind == "projector":
            sel = np.ones(idx.size, dtype=bool)
            for q, bit in zip(self.qubits, self.bits):
                shift = np.uint64(n_qubits - 1 - q)
                sel &= ((idx >> shift) & np.uint64(1)) == np.uint64(bit)
            return self.scale * sel.astype(np.float64)
        raise ValueError(f"unknown observable kind {self.kind}")


def expectation(state: SimState, obs: Observable) -> float:
    diag = obs.diagonal(state.n_qubits)
    probs = np.abs(state.amplitudes) ** 2
    return float(np.dot(diag, probs))
