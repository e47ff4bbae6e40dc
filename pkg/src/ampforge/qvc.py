"""Variational quantum classifier: layered ansatz, softmax readout, ADAM.

Gradients use the parameter-shift rule (all trainable gates are RY/RZ
rotations), chained through the softmax cross-entropy analytically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, Gate
from .errors import DimensionMismatch, EmptyBatch, IoError
from .simulator import Observable, SimState, expectation, run, run_batch


@dataclass(frozen=True)
class Ansatz:
    """Per layer: RY,RZ on every qubit, then a line of CNOTs."""

    n_qubits: int
    n_layers: int

    @property
    def n_params(self) -> int:
        return 2 * self.n_qubits * self.n_layers

    def circuit(self, theta: np.ndarray) -> Circuit:
        if theta.size != self.n_params:
            raise DimensionMismatch(
                f"expected {self.n_params} parameters, got {theta.size}")
        c = Circuit(self.n_qubits, metadata={"layers": self.n_layers})
        idx = 0
        for _ in range(self.n_layers):
            for q in range(self.n_qubits):
                c.add(Gate("ry", (q,), angle=float(theta[idx])))
                c.add(Gate("rz", (q,), angle=float(theta[idx + 1])))
                idx += 2
            for q in range(self.n_qubits - 1):
                c.add(Gate("cnot", (q, q + 1)))
        return c


def default_observables(n_classes: int, n_qubits: int) -> list[Observable]:
    """Two classes read +/-<Z> of qubit 0; more classes read Z of qubit j."""
    if n_classes == 2:
        return [Observable("zstring", (0,), scale=1.0),
                Observable("zstring", (0,), scale=-1.0)]
    if n_classes > n_qubits:
        raise DimensionMismatch(
            f"{n_classes} classes need at least {n_classes} qubits, have {n_qubits}")
    return [Observable("zstring", (j,)) for j in range(n_classes)]


@dataclass
class QvcModel:
    ansatz: Ansatz
    theta: np.ndarray
    observables: list[Observable]
    adam_m: np.ndarray = None
    adam_v: np.ndarray = None
    adam_step: int = 0

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if not np.all(np.isfinite(self.theta)):
            raise DimensionMismatch("non-finite parameters")
        if self.adam_m is None:
            self.adam_m = np.zeros_like(self.theta)
        if self.adam_v is None:
            self.adam_v = np.zeros_like(self.theta)

    @property
    def n_classes(self) -> int:
        return len(self.observables)


def new_model(ansatz: Ansatz, n_classes: int, seed: int) -> QvcModel:
    """Small-angle uniform init keeps the circuit near identity at the start."""
    rng = np.random.default_rng(seed)
    theta = rng.uniform(-0.1, 0.1, size=ansatz.n_params)
    return QvcModel(ansatz=ansatz, theta=theta,
                    observables=default_observables(n_classes, ansatz.n_qubits))


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 16
    epochs: int = 30
    seed: int = 0


def softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - np.max(scores, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def _as_state(x) -> SimState:
    return x if isinstance(x, SimState) else SimState.from_vector(x)


def _states_matrix(batch) -> np.ndarray:
    """Stack batch inputs as columns of a (2**n, B) array."""
    cols = [(_as_state(x).amplitudes if not isinstance(x, np.ndarray) else
             np.asarray(x, dtype=np.complex128)) for x in batch]
    return np.stack(cols, axis=1)


def model_expectations(model: QvcModel, state: SimState,
                       theta: np.ndarray | None = None) -> np.ndarray:
    theta = model.theta if theta is None else theta
    evolved = run(model.ansatz.circuit(theta), initial=state)
    return np.array([expectation(evolved, o) for o in model.observables])


def batch_expectations(model: QvcModel, states: np.ndarray,
                       theta: np.ndarray | None = None) -> np.ndarray:
    """(B, m) observable expectations for states stacked as columns."""
    theta = model.theta if theta is None else theta
    evolved = run_batch(model.ansatz.circuit(theta), states)
    probs = np.abs(evolved) ** 2
    diags = np.stack([o.diagonal(model.ansatz.n_qubits) for o in model.observables])
    return (diags @ probs).T


def predict(model: QvcModel, state) -> tuple[int, np.ndarray, np.ndarray]:
    """Returns ``(label, expectations, probabilities)``; ties go to the lowest class."""
    state = _as_state(state)
    if state.n_qubits != model.ansatz.n_qubits:
        raise DimensionMismatch(
            f"input has {state.n_qubits} qubits, model expects {model.ansatz.n_qubits}")
    exps = model_expectations(model, state)
    probs = softmax(exps)
    return int(np.argmax(exps)), exps, probs


def loss(model: QvcModel, batch) -> float:
    """Mean cross-entropy of the softmax class probabilities."""
    if len(batch) == 0:
        raise EmptyBatch("loss needs at least one sample")
    states = _states_matrix([x for x, _ in batch])
    labels = np.array([y for _, y in batch])
    probs = softmax(batch_expectations(model, states))
    return float(-np.mean(np.log(probs[np.arange(len(labels)), labels])))


def gradient(model: QvcModel, batch) -> np.ndarray:
    """Exact cross-entropy gradient via parameter-shift expectations.

    Each parameter costs two extra circuit evaluations (batched over the
    samples); the softmax chain rule is applied analytically.
    """
    if len(batch) == 0:
        raise EmptyBatch("gradient needs at least one sample")
    states = _states_matrix([x for x, _ in batch])
    labels = np.array([y for _, y in batch])
    n = len(labels)
    probs = softmax(batch_expectations(model, states))
    weights = probs.copy()
    weights[np.arange(n), labels] -= 1.0  # d(-log p_y)/d e_j, per sample
    grad = np.zeros_like(model.theta)
    for t in range(model.theta.size):
        shifted = model.theta.copy()
        shifted[t] += np.pi / 2
        e_plus = batch_expectations(model, states, shifted)
        shifted[t] -= np.pi
        e_minus = batch_expectations(model, states, shifted)
        de = (e_plus - e_minus) / 2.0
        grad[t] = float(np.sum(weights * de)) / n
    return grad


def accuracy(model: QvcModel, dataset) -> float:
    if len(dataset) == 0:
        raise EmptyBatch("accuracy needs at least one sample")
    states = _states_matrix([x for x, _ in dataset])
    labels = np.array([y for _, y in dataset])
    predicted = np.argmax(batch_expectations(model, states), axis=1)
    return float(np.mean(predicted == labels))


def train(model: QvcModel, dataset, cfg: TrainConfig):
    """ADAM with bias-corrected moments; deterministic under the config seed.

    Returns ``(model, history)`` with one ``(epoch, loss, accuracy)`` row per
    epoch, both evaluated on the full dataset after the epoch's updates.
    """
    if len(dataset) == 0:
        raise EmptyBatch("training needs at least one sample")
    for _, y in dataset:
        if not 0 <= y < model.n_classes:
            raise DimensionMismatch(f"label {y} outside [0, {model.n_classes})")
    rng = np.random.default_rng(cfg.seed)
    theta = model.theta.copy()
    m = model.adam_m.copy()
    v = model.adam_v.copy()
    step = model.adam_step
    work = QvcModel(model.ansatz, theta, model.observables, m, v, step)
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(dataset))
        for lo in range(0, len(dataset), cfg.batch_size):
            batch = [dataset[i] for i in order[lo:lo + cfg.batch_size]]
            g = gradient(work, batch)
            step += 1
            m = cfg.beta1 * m + (1 - cfg.beta1) * g
            v = cfg.beta2 * v + (1 - cfg.beta2) * g * g
            m_hat = m / (1 - cfg.beta1**step)
            v_hat = v / (1 - cfg.beta2**step)
            theta = theta - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
            work = QvcModel(model.ansatz, theta, model.observables, m, v, step)
        history.append((epoch, loss(work, dataset), accuracy(work, dataset)))
    return work, history


# ----------------------------------------------------------------------
# checkpoints


def save_checkpoint(model: QvcModel, path, extra: dict | None = None) -> None:
    payload = {
        "ansatz": {"n_qubits": model.ansatz.n_qubits, "n_layers": model.ansatz.n_layers},
        "theta": list(model.theta),
        "observables": [
            {"kind": o.kind, "qubits": list(o.qubits), "bits": list(o.bits),
             "scale": o.scale}
            for o in model.observables
        ],
        "adam": {"m": list(model.adam_m), "v": list(model.adam_v),
                 "step": model.adam_step},
    }
    if extra:
        payload.update(extra)
    try:
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_checkpoint(path) -> QvcModel:
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    ansatz = Ansatz(**payload["ansatz"])
    observables = [
        Observable(o["kind"], tuple(o["qubits"]), tuple(o["bits"]), o["scale"])
        for o in payload["observables"]
    ]
    return QvcModel(
        ansatz=ansatz,
        theta=np.array(payload["theta"]),
        observables=observables,
        adam_m=np.array(payload["adam"]["m"]),
        adam_v=np.array(payload["adam"]["v"]),
        adam_step=payload["adam"]["step"],
    )
