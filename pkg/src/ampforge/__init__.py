"""Approximate amplitude encoding through matrix product states.

Pipeline: classical vector -> MPS -> iteratively disentangled two-qubit
circuit with a controllable fidelity target, plus a small variational quantum
classifier and a classical adversarial-attack harness for robustness studies.
"""

from .circuit import Circuit, Gate, decompose_two_qubit, exact_prep_baseline, export_qasm
from .data import encode_compressed, encode_plain, generate_shapes, random_perturb
from .disentangle import DisentangleConfig, DisentangleReport, disentangle, preparation_program
from .mps import Mps
from .qvc import Ansatz, QvcModel, TrainConfig
from .simulator import Observable, SimState

__version__ = "0.1.0"

__all__ = [
    "Ansatz",
    "Circuit",
    "DisentangleConfig",
    "DisentangleReport",
    "Gate",
    "Mps",
    "Observable",
    "QvcModel",
    "SimState",
    "TrainConfig",
    "decompose_two_qubit",
    "disentangle",
    "encode_compressed",
    "encode_plain",
    "exact_prep_baseline",
    "export_qasm",
    "generate_shapes",
    "preparation_program",
    "random_perturb",
]
