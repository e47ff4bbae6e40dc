"""Regenerate the bundled digit-image subsample under data/.

Uses the scikit-learn 8x8 digits corpus (offline), upscaled to 28x28 and
centre-padded to 32x32 so each image compresses into a nine-qubit state.
Run from the repository root:

    python scripts/make_digits_subsample.py

Requires scikit-learn and scipy (development-time only; the generated CSV
files are committed so the package itself stays numpy-only).
"""

import json
import pathlib

import numpy as np
from scipy import ndimage
from sklearn.datasets import load_digits

N_TRAIN = 500
N_TEST = 250
SEED = 20240817


def upscale(img8: np.ndarray) -> np.ndarray:
    img28 = ndimage.zoom(img8.astype(float), 28 / 8, order=1)
    img28 = np.clip(img28, 0.0, None)
    out = np.zeros((32, 32))
    out[2:30, 2:30] = img28
    peak = out.max()
    if peak > 0:
        out = np.round(255 * out / peak)
    return out


def main() -> None:
    root = pathlib.Path(__file__).resolve().parent.parent
    outdir = root / "data"
    outdir.mkdir(exist_ok=True)

    digits = load_digits()
    rng = np.random.default_rng(SEED)
    order = rng.permutation(len(digits.images))

    rows = []
    for idx in order[: N_TRAIN + N_TEST]:
        img = upscale(digits.images[idx])
        rows.append((int(digits.target[idx]), img.ravel().astype(int)))

    for name, chunk in (("digits_train.csv", rows[:N_TRAIN]),
                        ("digits_test.csv", rows[N_TRAIN:])):
        with open(outdir / name, "w") as fh:
            for label, pixels in chunk:
                fh.write(str(label) + "," + ",".join(str(p) for p in pixels) + "\n")

    manifest = {
        "width": 32,
        "height": 32,
        "classes": 10,
        "train": "digits_train.csv",
        "test": "digits_test.csv",
        "n_train": N_TRAIN,
        "n_test": N_TEST,
        "source": "scikit-learn digits corpus, bilinear upscale 8x8 -> 28x28, zero pad to 32x32",
        "seed": SEED,
    }
    with open(outdir / "digits.json", "w") as fh:
        json.dump(manifest, fh, indent=1)
    print(f"wrote {N_TRAIN}+{N_TEST} samples to {outdir}")


if __name__ == "__main__":
    main()
