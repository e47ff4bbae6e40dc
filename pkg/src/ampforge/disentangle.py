"""Iterative disentangling of an MPS into layers of window unitaries.

Each step eigendecomposes the reduced density matrix of a k-site window and
rotates the eigenbasis onto the computational basis, ordered so the leading
eigenvalues land on states whose designated qubit is |0>. Sweeping windows
across the chain drives the state toward |0...0>; running the conjugate
transposes in reverse then prepares the original state from |0...0>, exactly
when the window is wide enough for the local rank and approximately otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensorops
from .circuit import Circuit, Gate
from .errors import (
    DidNotConverge,
    NotDensityMatrix,
    NotHermitian,
    UndecomposedBlock,
    WindowOutOfRange,
)
from .mps import LOSSLESS_TOL, Mps

# Adjacent eigenvalues closer than this are reported as degenerate: the
# rotation is then gauge-dependent and the improvement argument can stall.
DEGENERACY_TOL = 1e-12


@dataclass
class DisentangleConfig:
    k: int = 2
    target_fidelity: float = 1.0
    max_sweeps: int = 200
    layout: str = "staircase"  # staircase | disjoint
    tol: float = LOSSLESS_TOL
    max_bond: int | None = None

    def validate(self, n_qubits: int) -> None:
        if not 2 <= self.k <= n_qubits:
            raise WindowOutOfRange(f"window size {self.k} invalid for {n_qubits} qubits")
        if not 0.0 < self.target_fidelity <= 1.0:
            raise ValueError(f"target fidelity {self.target_fidelity} outside (0, 1]")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be positive")
        if self.layout not in ("staircase", "disjoint"):
            raise ValueError(f"unknown layout {self.layout!r}")
        if self.layout == "disjoint" and self.k != 2:
            raise ValueError("the disjoint brick layout is defined for k=2 windows")


@dataclass
class WindowUnitary:
    matrix: np.ndarray
    window: int  # starting site
    sweep: int
    disentangled_site: int


@dataclass
class DisentangleReport:
    n_qubits: int
    k: int
    layout: str
    target_fidelity: float
    layers: list[list[WindowUnitary]] = field(default_factory=list)
    fidelity_trace: list[float] = field(default_factory=list)
    degenerate_spectrum_flags: list[bool] = field(default_factory=list)
    converged: bool = False

    @property
    def achieved_fidelity(self) -> float:
        return self.fidelity_trace[-1]

    @property
    def n_sweeps(self) -> int:
        return len(self.layers)

    def flags_for_sweep(self, sweep_index: int) -> list[bool]:
        per_sweep = [len(layer) for layer in self.layers]
        start = sum(per_sweep[:sweep_index])
        return self.degenerate_spectrum_flags[start:start + per_sweep[sweep_index]]

    def to_json_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "k": self.k,
            "layout": self.layout,
            "target_fidelity": self.target_fidelity,
            "achieved_fidelity": self.achieved_fidelity,
            "converged": self.converged,
            "sweeps": self.n_sweeps,
            "fidelity_trace": [float(f) for f in self.fidelity_trace],
            "unitaries_per_sweep": [len(layer) for layer in self.layers],
            "degenerate_spectrum_flags": list(self.degenerate_spectrum_flags),
        }


def disentangling_unitary(rho: np.ndarray, disentangle_last: bool = False):
    """Eigenbasis rotation concentrating probability on the |0> branch.

    Returns ``(u, degenerate)``. Eigenvectors are sorted by decreasing
    eigenvalue and mapped onto basis states whose designated qubit bit is 0
    first, so a window whose density matrix has rank at most half the window
    dimension gets that qubit exactly disentangled. ``degenerate`` reports a
    tie anywhere in the spectrum.
    """
    rho = tensorops.as_complex(rho)
    dim = rho.shape[0]
    try:
        eig = tensorops.eig_hermitian(rho)
    except NotHermitian as exc:
        raise NotDensityMatrix(str(exc)) from exc
    if abs(np.trace(rho).real - 1.0) > 1e-8 or abs(np.trace(rho).imag) > 1e-8:
        raise NotDensityMatrix(f"trace {np.trace(rho):.6g} is not 1")
    if eig.values[-1] < -1e-8:
        raise NotDensityMatrix(f"negative eigenvalue {eig.values[-1]:.3e}")

    vectors = eig.vectors.copy()
    for i in range(dim):
        lead = np.argmax(np.abs(vectors[:, i]))
        phase = vectors[lead, i]
        if abs(phase) > 0:
            vectors[:, i] *= np.conj(phase) / abs(phase)

    if disentangle_last:
        order = [i for i in range(dim) if i % 2 == 0] + [i for i in range(dim) if i % 2 == 1]
    else:
        order = list(range(dim))
    u = np.zeros((dim, dim), dtype=np.complex128)
    for rank, basis_index in enumerate(order):
        u[basis_index, :] = vectors[:, rank].conj()

    gaps = np.abs(np.diff(eig.values))
    degenerate = bool(np.any(gaps <= DEGENERACY_TOL))
    return u, degenerate


def _window_plan(n: int, k: int, layout: str) -> list[tuple[int, bool]]:
    """Window start sites and whether the far (last) site is the target."""
    if layout == "staircase":
        return [(s, False) for s in range(n - k + 1)]
    evens = list(range(0, n - 1, 2))
    odds = list(range(1, n - 1, 2))
    plan = []
    for s in evens + odds:
        # Bricks in the lower half of the chain push entanglement upward, so
        # their outward-facing (last) qubit is the one being cleared.
        last = (2 * s + k - 1) >= (n - 1)
        plan.append((s, last))
    return plan


def sweep(m: Mps, cfg: DisentangleConfig, sweep_index: int):
    """One pass of window rotations; returns ``(mps, layer, flags)``."""
    layer = []
    flags = []
    for start, last in _window_plan(m.n_qubits, cfg.k, cfg.layout):
        rho = m.reduced_density_matrix(start, cfg.k)
        u, degenerate = disentangling_unitary(rho, disentangle_last=last)
        m, _ = m.apply_window_unitary(u, start, cfg.k, max_bond=cfg.max_bond, tol=cfg.tol)
        site = start + cfg.k - 1 if last else start
        layer.append(WindowUnitary(matrix=u, window=start, sweep=sweep_index,
                                   disentangled_site=site))
        flags.append(degenerate)
    return m, layer, flags


def disentangle(state, cfg: DisentangleConfig | None = None) -> DisentangleReport:
    """Sweep until the |0...0> overlap reaches the target fidelity.

    Accepts a statevector or an ``Mps``. Raises ``DidNotConverge`` (with the
    partial report attached) when the sweep budget runs out first.
    """
    cfg = cfg or DisentangleConfig()
    m = state if isinstance(state, Mps) else Mps.from_statevector(
        state, max_bond=cfg.max_bond, tol=cfg.tol)
    cfg.validate(m.n_qubits)

    report = DisentangleReport(
        n_qubits=m.n_qubits, k=cfg.k, layout=cfg.layout,
        target_fidelity=cfg.target_fidelity,
    )
    report.fidelity_trace.append(min(m.zero_overlap_probability(), 1.0))
    if report.fidelity_trace[-1] >= cfg.target_fidelity:
        report.converged = True
        return report

    for sweep_index in range(cfg.max_sweeps):
        m, layer, flags = sweep(m, cfg, sweep_index)
        report.layers.append(layer)
        report.degenerate_spectrum_flags.extend(flags)
        report.fidelity_trace.append(min(m.zero_overlap_probability(), 1.0))
        if report.fidelity_trace[-1] >= cfg.target_fidelity:
            report.converged = True
            return report

    raise DidNotConverge(
        f"fidelity {report.achieved_fidelity:.6f} below target "
        f"{cfg.target_fidelity} after {cfg.max_sweeps} sweeps",
        report=report,
    )


def preparation_program(report: DisentangleReport) -> Circuit:
    """Circuit preparing the encoded state from |0...0>.

    Emits the conjugate transpose of every recorded unitary in reverse
    application order, as raw two-qubit blocks.
    """
    if report.k != 2:
        raise UndecomposedBlock(
            f"windows of {report.k} qubits cannot be emitted as two-qubit blocks")
    circuit = Circuit(report.n_qubits, metadata={
        "achieved_fidelity": report.fidelity_trace[-1] if report.fidelity_trace else None,
        "sweeps": report.n_sweeps,
        "layout": report.layout,
    })
    ordered = [wu for layer in report.layers for wu in layer]
    for wu in reversed(ordered):
        circuit.add(Gate("u2q", (wu.window, wu.window + 1), matrix=wu.matrix.conj().T))
    return circuit
