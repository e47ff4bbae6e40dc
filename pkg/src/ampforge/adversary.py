"""Classical surrogate network, PGD attack, and transfer evaluation.

The attack is white-box on the surrogate only; quantum classifiers downstream
see the perturbed pixels re-encoded through their own pipelines.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import ImageSample
from .errors import DimensionMismatch, EmptyBatch, IoError


@dataclass
class Mlp:
    """ReLU hidden layers, softmax output."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]


@dataclass
class AttackConfig:
    epsilon: float = 0.2
    step_size: float = 0.05
    n_steps: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.epsilon < 0 or self.step_size < 0 or self.n_steps < 1:
            raise ValueError("attack budget, step size and step count must be non-negative")


def new_mlp(layer_sizes, seed: int) -> Mlp:
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        weights.append(rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    return Mlp(weights, biases)


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def forward(mlp: Mlp, x: np.ndarray):
    """Returns class probabilities and the activations needed for backprop."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != mlp.weights[0].shape[0]:
        raise DimensionMismatch(
            f"input width {x.shape[1]} vs first layer {mlp.weights[0].shape[0]}")
    activations = [x]
    h = x
    for w, b in zip(mlp.weights[:-1], mlp.biases[:-1]):
        h = np.maximum(h @ w + b, 0.0)
        activations.append(h)
    logits = h @ mlp.weights[-1] + mlp.biases[-1]
    return _softmax_rows(logits), activations


def mlp_loss(mlp: Mlp, x: np.ndarray, y: np.ndarray) -> float:
    probs, _ = forward(mlp, x)
    return float(-np.mean(np.log(probs[np.arange(len(y)), y] + 1e-300)))


def _backprop(mlp: Mlp, x: np.ndarray, y: np.ndarray):
    """Gradients of the mean cross-entropy w.r.t. weights, biases and input."""
    probs, acts = forward(mlp, x)
    batch = len(y)
    delta = probs.copy()
    delta[np.arange(batch), y] -= 1.0
    delta /= batch
    grads_w, grads_b = [], []
    for layer in range(len(mlp.weights) - 1, -1, -1):
        grads_w.append(acts[layer].T @ delta)
        grads_b.append(delta.sum(axis=0))
        if layer > 0:
            delta = (delta @ mlp.weights[layer].T) * (acts[layer] > 0)
        else:
            delta = delta @ mlp.weights[layer].T
    return list(reversed(grads_w)), list(reversed(grads_b)), delta


def input_gradient(mlp: Mlp, x: np.ndarray, y: int) -> np.ndarray:
    """d(cross-entropy)/d(pixels) for one image."""
    _, _, dx = _backprop(mlp, x.reshape(1, -1), np.array([y]))
    return dx.ravel()


def dataset_matrix(samples: list[ImageSample]):
    x = np.stack([s.pixels for s in samples])
    y = np.array([s.label for s in samples])
    return x, y


def train_mlp(samples: list[ImageSample], epochs: int, lr: float, seed: int,
              hidden: int = 32, n_classes: int | None = None):
    """Full-batch gradient descent on the cross-entropy; seeded and deterministic.

    Returns ``(mlp, per-epoch losses)``.
    """
    if not samples:
        raise EmptyBatch("training needs at least one sample")
    x, y = dataset_matrix(samples)
    n_classes = n_classes or int(y.max()) + 1
    mlp = new_mlp([x.shape[1], hidden, n_classes], seed)
    losses = []
    for _ in range(epochs):
        grads_w, grads_b, _ = _backprop(mlp, x, y)
        for i in range(len(mlp.weights)):
            mlp.weights[i] = mlp.weights[i] - lr * grads_w[i]
            mlp.biases[i] = mlp.biases[i] - lr * grads_b[i]
        losses.append(mlp_loss(mlp, x, y))
    return mlp, losses


def mlp_predict(mlp: Mlp, samples: list[ImageSample]) -> np.ndarray:
    probs, _ = forward(mlp, np.stack([s.pixels for s in samples]))
    return probs.argmax(axis=1)


def mlp_accuracy(mlp: Mlp, samples: list[ImageSample]) -> float:
    labels = np.array([s.label for s in samples])
    return float(np.mean(mlp_predict(mlp, samples) == labels))


def pgd_attack(mlp: Mlp, img: ImageSample, cfg: AttackConfig) -> ImageSample:
    """Iterated signed-gradient ascent projected onto the L-inf ball and [0,1].

    The perturbation budget is a hard guarantee: every output pixel is within
    ``epsilon`` of the original and inside the valid intensity range.
    """
    x0 = img.pixels.astype(np.float64)
    x = x0.copy()
    for _ in range(cfg.n_steps):
        g = input_gradient(mlp, x, img.label)
        x = x + cfg.step_size * np.sign(g)
        x = np.clip(x, x0 - cfg.epsilon, x0 + cfg.epsilon)
        x = np.clip(x, 0.0, 1.0)
    return ImageSample(pixels=x, width=img.width, height=img.height, label=img.label)


def attack_dataset(mlp: Mlp, samples: list[ImageSample], cfg: AttackConfig):
    return [pgd_attack(mlp, s, cfg) for s in samples]


def transfer_evaluate(classifiers, attacked_sets) -> list[dict]:
    """Accuracy grid over (classifier, attack strength).

    ``classifiers`` maps a name to a function from a sample list to predicted
    labels; ``attacked_sets`` maps an attack strength to the perturbed samples.
    """
    rows = []
    for strength in sorted(attacked_sets):
        samples = attacked_sets[strength]
        labels = np.array([s.label for s in samples])
        for name, predict_fn in classifiers.items():
            predicted = np.asarray(predict_fn(samples))
            rows.append({
                "model": name,
                "strength": float(strength),
                "accuracy": float(np.mean(predicted == labels)),
            })
    return rows


# ----------------------------------------------------------------------
# checkpoints


def save_mlp(mlp: Mlp, path) -> None:
    payload = {
        "weights": [w.tolist() for w in mlp.weights],
        "biases": [b.tolist() for b in mlp.biases],
    }
    try:
        with open(path, "w") as fh:
            json.dump(payload, fh)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_mlp(path) -> Mlp:
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return Mlp([np.array(w) for w in payload["weights"]],
               [np.array(b) for b in payload["biases"]])
