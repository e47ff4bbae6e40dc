"""Shared helpers: random states/unitaries and brute-force oracles."""

import numpy as np
import pytest

from ampforge.circuit import CNOT_MATRIX, rotation_matrix


def haar_state(n_qubits: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(2**n_qubits) + 1j * rng.standard_normal(2**n_qubits)
    return v / np.linalg.norm(v)


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density_matrix(dim: int, rng: np.random.Generator, rank=None) -> np.ndarray:
    rank = rank or dim
    a = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def embed_gate_dense(gate, n_qubits: int) -> np.ndarray:
    """Full 2**n matrix for a gate, built by explicit kron placement.

    Independent of the simulator's stride tricks; used as its oracle.
    """
    if gate.kind == "cnot":
        local = CNOT_MATRIX
    elif gate.kind == "u2q":
        local = np.asarray(gate.matrix)
    else:
        local = rotation_matrix(gate.kind, gate.angle)

    if len(gate.qubits) == 1:
        ops = [np.eye(2)] * n_qubits
        ops[gate.qubits[0]] = local
        full = ops[0]
        for op in ops[1:]:
            full = np.kron(full, op)
        return full

    a, b = gate.qubits
    dim = 2**n_qubits
    full = np.zeros((dim, dim), dtype=complex)
    local4 = local.reshape(2, 2, 2, 2)
    for col in range(dim):
        bits = [(col >> (n_qubits - 1 - q)) & 1 for q in range(n_qubits)]
        for ra in range(2):
            for rb in range(2):
                amp = local4[ra, rb, bits[a], bits[b]]
                if amp == 0:
                    continue
                new_bits = list(bits)
                new_bits[a], new_bits[b] = ra, rb
                row = 0
                for bit in new_bits:
                    row = (row << 1) | bit
                full[row, col] += amp
    return full


def circuit_unitary_dense(circuit) -> np.ndarray:
    """Product of embedded gate matrices, last gate leftmost."""
    full = np.eye(2**circuit.n_qubits, dtype=complex)
    for gate in circuit.gates:
        full = embed_gate_dense(gate, circuit.n_qubits) @ full
    return full


def ghz_state(n_qubits: int) -> np.ndarray:
    v = np.zeros(2**n_qubits, dtype=complex)
    v[0] = v[-1] = 1 / np.sqrt(2)
    return v


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
