"""Datasets, image ingestion, and amplitude encodings.

The compressed encoding packs horizontally adjacent pixel pairs into the real
and imaginary parts of one amplitude, halving the basis size and saving a
qubit relative to plain amplitude encoding.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import AllZeroInput, DimensionMismatch, IoError, ParseError
from .mps import num_qubits_for


@dataclass
class ImageSample:
    pixels: np.ndarray  # flat, row-major
    width: int
    height: int
    label: int

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64).ravel()
        if self.pixels.size != self.width * self.height:
            raise DimensionMismatch(
                f"{self.pixels.size} pixels for a {self.width}x{self.height} image")


@dataclass
class EncodedSample:
    state: np.ndarray
    label: int
    encoding: str  # plain | compressed
    source_fidelity: float = 1.0


def _pad_to_power_of_two(v: np.ndarray) -> np.ndarray:
    n = len(v)
    size = 1
    while size < n:
        size *= 2
    size = max(size, 2)
    if size == n:
        return v
    out = np.zeros(size, dtype=v.dtype)
    out[:n] = v
    return out


def encode_plain(img: ImageSample) -> EncodedSample:
    """Zero-pad to a power of two and L2-normalize into real amplitudes."""
    v = _pad_to_power_of_two(img.pixels.astype(np.float64))
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        raise AllZeroInput("image has no intensity to encode")
    return EncodedSample(state=(v / nrm).astype(np.complex128), label=img.label,
                         encoding="plain")


def encode_compressed(img: ImageSample) -> EncodedSample:
    """Pack adjacent pixel pairs into complex amplitudes, saving one qubit.

    Normalization uses the original pixel-vector norm, so the packed state is
    exactly unit norm.
    """
    v = _pad_to_power_of_two(img.pixels.astype(np.float64))
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        raise AllZeroInput("image has no intensity to encode")
    packed = (v[0::2] + 1j * v[1::2]) / nrm
    return EncodedSample(state=packed, label=img.label, encoding="compressed")


def decode_compressed(state: np.ndarray, width: int, height: int) -> ImageSample:
    """Unpack a compressed state back into pixels (up to global scale).

    Used to render the artefacts an approximate encoding leaves behind;
    negative values from approximate states are clipped at zero.
    """
    state = np.asarray(state, dtype=np.complex128).ravel()
    n_pixels = width * height
    if 2 * state.size < n_pixels:
        raise DimensionMismatch(
            f"{state.size} amplitudes cannot fill a {width}x{height} image")
    pixels = np.empty(2 * state.size, dtype=np.float64)
    pixels[0::2] = state.real
    pixels[1::2] = state.imag
    return ImageSample(pixels=np.clip(pixels[:n_pixels], 0.0, None),
                       width=width, height=height, label=-1)


def generate_shapes(n_per_class: int, seed: int) -> list[ImageSample]:
    """Toy two-class 8x8 dataset: two horizontal bars vs two vertical bars.

    Bar positions sit at bases 1 and 5 with a one-pixel jitter drawn from the
    seed. Both classes light exactly 16 pixels, so total intensity carries no
    class signal; only orientation does.
    """
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(n_per_class):
        for label in (0, 1):
            img = np.zeros((8, 8))
            for base in (1, 5):
                pos = base + rng.integers(-1, 2)
                if label == 0:
                    img[pos, :] = 1.0
                else:
                    img[:, pos] = 1.0
            samples.append(ImageSample(pixels=img.ravel(), width=8, height=8,
                                       label=label))
    return samples


def random_perturb(state: np.ndarray, target_fidelity: float, seed: int) -> np.ndarray:
    """Mix a seeded complex Gaussian into the state to hit a target fidelity.

    The Gaussian is orthogonalized against the state so every target in
    (0, 1] is reachable; the mixing weight is found by bisection until the
    realized fidelity is within +/-0.005 of the target (far inside, in
    practice).
    """
    if not 0.0 < target_fidelity <= 1.0:
        raise ValueError(f"target fidelity {target_fidelity} outside (0, 1]")
    state = np.asarray(state, dtype=np.complex128).ravel()
    if target_fidelity == 1.0:
        return state.copy()
    rng = np.random.default_rng(seed)
    noise = np.zeros_like(state)
    while np.linalg.norm(noise) < 1e-6:
        draw = rng.standard_normal(state.size) + 1j * rng.standard_normal(state.size)
        noise = draw - np.vdot(state, draw) * state
    noise /= np.linalg.norm(noise)

    def realized(t: float) -> tuple[float, np.ndarray]:
        mixed = (1.0 - t) * state + t * noise
        mixed /= np.linalg.norm(mixed)
        return float(abs(np.vdot(state, mixed)) ** 2), mixed

    lo, hi = 0.0, 1.0
    for _ in range(100):
        mid = (lo + hi) / 2.0
        fid, mixed = realized(mid)
        if abs(fid - target_fidelity) < 1e-6:
            return mixed
        if fid > target_fidelity:
            lo = mid
        else:
            hi = mid
    fid, mixed = realized((lo + hi) / 2.0)
    if abs(fid - target_fidelity) > 0.005:
        raise ValueError(f"bisection stalled at fidelity {fid:.4f}")
    return mixed


# ----------------------------------------------------------------------
# file formats


def save_csv(path, samples: list[ImageSample]) -> None:
    """Rows of ``label, pixel...`` with full-precision floats."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for s in samples:
                writer.writerow([s.label] + [f"{p:.17g}" for p in s.pixels])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_csv(path, width: int, height: int) -> list[ImageSample]:
    """Parse a label-first CSV of images with the given geometry."""
    n_pixels = width * height
    samples = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    with fh:
        for row_no, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != n_pixels + 1:
                raise ParseError(
                    f"expected 1 label + {n_pixels} pixels, got {len(row)} fields",
                    row=row_no)
            try:
                label = int(row[0])
            except ValueError:
                raise ParseError(f"bad label {row[0]!r}", row=row_no, column=1) from None
            pixels = np.empty(n_pixels)
            for col, tok in enumerate(row[1:], start=2):
                try:
                    pixels[col - 2] = float(tok)
                except ValueError:
                    raise ParseError(f"bad pixel value {tok!r}", row=row_no,
                                     column=col) from None
            samples.append(ImageSample(pixels=pixels, width=width, height=height,
                                       label=label))
    return samples


def export_pgm(img: ImageSample, path) -> None:
    """Plain-text PGM render, intensity scaled onto 0..255."""
    pixels = np.clip(img.pixels, 0.0, None)
    peak = pixels.max()
    gray = np.zeros(pixels.size, dtype=int) if peak == 0 else np.round(
        255 * pixels / peak).astype(int)
    try:
        with open(path, "w") as fh:
            fh.write(f"P2\n{img.width} {img.height}\n255\n")
            for r in range(img.height):
                row = gray[r * img.width:(r + 1) * img.width]
                fh.write(" ".join(str(v) for v in row) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def compressed_qubits(img: ImageSample) -> int:
    """Qubit count of the compressed encoding of this image."""
    padded = _pad_to_power_of_two(img.pixels)
    return num_qubits_for(padded.size // 2) if padded.size > 2 else 1
