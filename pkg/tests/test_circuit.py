import re

import numpy as np
import pytest

from ampforge.circuit import (
    CNOT_MATRIX,
    SWAP_MATRIX,
    Circuit,
    Gate,
    cnot_count,
    decompose_circuit,
    decompose_two_qubit,
    exact_prep_baseline,
    exact_prep_cnot_formula,
    export_qasm,
    gates_to_matrix,
    phase_distance,
)
from ampforge.errors import NotUnitary, TooLarge, UndecomposedBlock
from ampforge.simulator import run, state_fidelity
from conftest import ghz_state, haar_state, haar_unitary


def n_cnots(gates) -> int:
    return sum(1 for g in gates if g.kind == "cnot")


class TestDecomposeTwoQubit:
    def test_identity_is_free(self):
        gates = decompose_two_qubit(np.eye(4))
        assert n_cnots(gates) == 0

    def test_cnot_needs_one(self):
        gates = decompose_two_qubit(CNOT_MATRIX)
        assert n_cnots(gates) == 1
        assert phase_distance(gates_to_matrix(gates, (0, 1)), CNOT_MATRIX) < 1e-9

    def test_tensor_product_needs_zero(self, rng):
        u = np.kron(haar_unitary(2, rng), haar_unitary(2, rng))
        gates = decompose_two_qubit(u)
        assert n_cnots(gates) == 0
        assert phase_distance(gates_to_matrix(gates, (0, 1)), u) < 1e-8

    def test_swap_needs_three(self):
        gates = decompose_two_qubit(SWAP_MATRIX)
        assert n_cnots(gates) == 3
        assert phase_distance(gates_to_matrix(gates, (0, 1)), SWAP_MATRIX) < 1e-8

    def test_controlled_phase_needs_two(self):
        cp = np.diag([1, 1, 1, np.exp(0.7j)])
        gates = decompose_two_qubit(cp)
        assert n_cnots(gates) == 2
        assert phase_distance(gates_to_matrix(gates, (0, 1)), cp) < 1e-8

    def test_random_unitaries_sound(self, rng):
        for _ in range(200):
            u = haar_unitary(4, rng)
            gates = decompose_two_qubit(u)
            assert n_cnots(gates) <= 3
            assert phase_distance(gates_to_matrix(gates, (0, 1)), u) <= 1e-8

    def test_eigenbasis_unitaries_sound(self, rng):
        # The disentangler produces these: eigh bases with fixed phases.
        for _ in range(100):
            h = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
            _, vec = np.linalg.eigh(h + h.conj().T)
            u = vec.conj().T
            gates = decompose_two_qubit(u)
            assert phase_distance(gates_to_matrix(gates, (0, 1)), u) <= 1e-8

    def test_respects_wire_labels(self, rng):
        u = haar_unitary(4, rng)
        gates = decompose_two_qubit(u, qubits=(3, 1))
        assert all(set(g.qubits) <= {1, 3} for g in gates)
        assert phase_distance(gates_to_matrix(gates, (3, 1)), u) <= 1e-8

    def test_rejects_non_unitary(self):
        with pytest.raises(NotUnitary):
            decompose_two_qubit(np.ones((4, 4)))

    @pytest.mark.parametrize("eps", [0.0, 1e-12, 1e-9, 1e-7, 1e-4])
    def test_near_special_classes_stay_sound(self, rng, eps):
        # Inputs a hair away from the shorter-circuit classes must still
        # reconstruct; borderline ones may escalate to the generic form.
        def canonical(a, b, c):
            xx = np.kron([[0, 1], [1, 0]], [[0, 1], [1, 0]]).astype(complex)
            yy = np.kron([[0, -1j], [1j, 0]], [[0, -1j], [1j, 0]])
            zz = np.kron(np.diag([1, -1]), np.diag([1, -1])).astype(complex)
            w, v = np.linalg.eigh(a * xx + b * yy + c * zz)
            return (v * np.exp(1j * w)) @ v.conj().T

        for coords in ((eps, eps / 2, eps / 3),        # near tensor product
                       (np.pi / 4 + eps, eps, 0.0),    # near the CNOT class
                       (0.3, eps, eps)):               # near controlled class
            for _ in range(5):
                locals_ = [haar_unitary(2, rng) for _ in range(4)]
                u = (np.kron(locals_[0], locals_[1]) @ canonical(*coords)
                     @ np.kron(locals_[2], locals_[3]))
                gates = decompose_two_qubit(u)
                assert n_cnots(gates) <= 3
                assert phase_distance(gates_to_matrix(gates, (0, 1)), u) <= 1e-8


class TestCnotCount:
    def test_empty(self):
        assert cnot_count(Circuit(3)) == 0

    def test_generic_block_counts_three(self, rng):
        c = Circuit(2)
        c.add(Gate("u2q", (0, 1), matrix=haar_unitary(4, rng)))
        assert cnot_count(c) == 3

    def test_staircase_arithmetic_bound(self, rng):
        n, sweeps = 6, 3
        c = Circuit(n)
        for _ in range(sweeps):
            for q in range(n - 1):
                c.add(Gate("u2q", (q, q + 1), matrix=haar_unitary(4, rng)))
        assert cnot_count(c) <= 3 * sweeps * (n - 1)


class TestExactPrepBaseline:
    def test_zero_state_is_free(self):
        v = np.zeros(8)
        v[0] = 1.0
        c = exact_prep_baseline(v)
        assert cnot_count(c) == 0

    def test_single_qubit_two_rotations(self, rng):
        v = haar_state(1, rng)
        c = exact_prep_baseline(v)
        assert cnot_count(c) == 0
        assert sum(1 for g in c.gates if g.kind != "cnot") <= 3
        assert state_fidelity(run(c), v) > 1 - 1e-8

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_random_states_prepared_exactly(self, rng, n):
        v = haar_state(n, rng)
        c = exact_prep_baseline(v)
        assert state_fidelity(run(c), v) > 1 - 1e-8

    def test_real_states_skip_phase_pass(self, rng):
        v = np.abs(rng.standard_normal(16))
        v /= np.linalg.norm(v)
        c = exact_prep_baseline(v)
        assert state_fidelity(run(c), v) > 1 - 1e-8
        assert cnot_count(c) == exact_prep_cnot_formula(4, complex_amplitudes=False)

    def test_count_grows_geometrically(self, rng):
        counts = [cnot_count(exact_prep_baseline(haar_state(n, rng)))
                  for n in (3, 4, 5, 6)]
        for small, big in zip(counts, counts[1:]):
            assert big >= 2 * small

    def test_cap(self, rng):
        with pytest.raises(TooLarge):
            exact_prep_baseline(haar_state(9, rng))


# ----------------------------------------------------------------------
# QASM round trip


def parse_qasm(text: str) -> Circuit:
    """Minimal OpenQASM 2.0 reader for the gates this package emits."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    assert lines[0] == "OPENQASM 2.0;"
    assert lines[1] == 'include "qelib1.inc";'
    m = re.fullmatch(r"qreg q\[(\d+)\];", lines[2])
    n = int(m.group(1))
    c = Circuit(n)
    for ln in lines[3:]:
        m = re.fullmatch(r"cx q\[(\d+)\],q\[(\d+)\];", ln)
        if m:
            c.add(Gate("cnot", (int(m.group(1)), int(m.group(2)))))
            continue
        m = re.fullmatch(r"(rx|ry|rz)\(([-+0-9.e]+)\) q\[(\d+)\];", ln)
        assert m, f"unparsed line: {ln}"
        c.add(Gate(m.group(1), (int(m.group(3)),), angle=float(m.group(2))))
    return c


class TestExportQasm:
    def test_empty_circuit_header_only(self):
        text = export_qasm(Circuit(4))
        assert text == 'OPENQASM 2.0;\ninclude "qelib1.inc";\nqreg q[4];\n'

    def test_single_cnot_line(self):
        c = Circuit(2)
        c.add(Gate("cnot", (0, 1)))
        assert export_qasm(c).splitlines()[-1] == "cx q[0],q[1];"

    def test_seventeen_digit_angles(self):
        c = Circuit(1)
        c.add(Gate("rz", (0,), angle=np.pi))
        assert "rz(3.1415926535897931) q[0];" in export_qasm(c)

    def test_rejects_raw_blocks(self, rng):
        c = Circuit(2)
        c.add(Gate("u2q", (0, 1), matrix=haar_unitary(4, rng)))
        with pytest.raises(UndecomposedBlock):
            export_qasm(c)

    def test_deterministic(self, rng):
        c = Circuit(3)
        for q in range(3):
            c.add(Gate("ry", (q,), angle=rng.uniform(-3, 3)))
        assert export_qasm(c) == export_qasm(c)

    def test_ghz_round_trip_through_own_parser(self):
        from ampforge.disentangle import DisentangleConfig, disentangle, preparation_program

        report = disentangle(ghz_state(5), DisentangleConfig(target_fidelity=1 - 1e-9))
        program = decompose_circuit(preparation_program(report))
        text = export_qasm(program)
        reparsed = parse_qasm(text)
        out = run(reparsed)
        assert state_fidelity(out, ghz_state(5)) > 1 - 1e-8


def test_phase_distance_quotients_global_phase(rng):
    u = haar_unitary(4, rng)
    assert phase_distance(u, np.exp(0.7j) * u) < 1e-12
    assert abs(np.trace(u.conj().T @ (np.exp(0.7j) * u))) / 4 - 1 < 1e-9
