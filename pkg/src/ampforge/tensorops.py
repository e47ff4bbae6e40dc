"""Dense complex tensor primitives: reshape, SVD, Hermitian eig, contraction.

All arrays are numpy ``complex128`` in row-major order; that ordering is a
project-wide contract (reshapes reinterpret, never reorder).
"""

from dataclasses import dataclass

import numpy as np

from .errors import NotHermitian, NumericalFailure, ShapeMismatch

HERMITICITY_RTOL = 1e-8


def as_complex(a) -> np.ndarray:
    """View input as a contiguous complex128 array."""
    return np.ascontiguousarray(a, dtype=np.complex128)


def reshape(t: np.ndarray, new_shape) -> np.ndarray:
    """Reinterpret ``t`` with ``new_shape`` without touching the data order."""
    new_shape = tuple(int(d) for d in new_shape)
    if int(np.prod(new_shape)) != t.size:
        raise ShapeMismatch(
            f"cannot reshape {t.size} elements into shape {new_shape}"
        )
    return np.reshape(np.ascontiguousarray(t), new_shape, order="C")


@dataclass
class SvdResult:
    """Truncated SVD ``A = U diag(s) Vdag`` plus the weight that was dropped."""

    u: np.ndarray
    s: np.ndarray
    vdag: np.ndarray
    discarded_weight: float


def svd(a: np.ndarray, max_rank: int | None = None, tol: float = 0.0) -> SvdResult:
    """Singular value decomposition with relative-tolerance truncation.

    Keeps the ``r`` largest singular values with
    ``r = min(max_rank, #{i : s_i > tol * s_max})`` and reports the sum of the
    squared dropped values as ``discarded_weight``.
    """
    a = as_complex(a)
    if a.ndim != 2:
        raise ShapeMismatch(f"svd expects a matrix, got ndim={a.ndim}")
    try:
        u, s, vdag = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD did not converge: {exc}") from exc

    keep = s.size
    if s.size and s[0] > 0.0:
        keep = int(np.count_nonzero(s > tol * s[0]))
    if max_rank is not None:
        keep = min(keep, int(max_rank))
    keep = max(keep, 1)

    discarded = float(np.sum(s[keep:] ** 2))
    return SvdResult(u=u[:, :keep], s=s[:keep].copy(), vdag=vdag[:keep, :], discarded_weight=discarded)


@dataclass
class EigResult:
    """Hermitian eigendecomposition, eigenvalues sorted descending."""

    values: np.ndarray
    vectors: np.ndarray


def eig_hermitian(a: np.ndarray) -> EigResult:
    """Eigendecompose a Hermitian matrix, largest eigenvalue first.

    Symmetrizes by ``(A + A†)/2`` after checking ``‖A − A†‖_F`` against the
    relative tolerance; columns of ``vectors`` are the eigenvectors in the
    same (stable) descending order as ``values``.
    """
    a = as_complex(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeMismatch(f"expected a square matrix, got shape {a.shape}")
    norm = np.linalg.norm(a)
    if norm > 0 and np.linalg.norm(a - a.conj().T) > HERMITICITY_RTOL * norm:
        raise NotHermitian("matrix is not Hermitian within tolerance")
    sym = (a + a.conj().T) / 2.0
    try:
        values, vectors = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigh did not converge: {exc}") from exc
    order = np.argsort(-values, kind="stable")
    return EigResult(values=values[order], vectors=vectors[:, order])


def contract(a: np.ndarray, b: np.ndarray, axes) -> np.ndarray:
    """Contract ``a`` and ``b`` over the given ``(axes_a, axes_b)`` pairs."""
    axes_a, axes_b = axes
    axes_a = [axes_a] if np.isscalar(axes_a) else list(axes_a)
    axes_b = [axes_b] if np.isscalar(axes_b) else list(axes_b)
    if len(axes_a) != len(axes_b):
        raise ShapeMismatch("axis lists must pair up one-to-one")
    for ia, ib in zip(axes_a, axes_b):
        if a.shape[ia] != b.shape[ib]:
            raise ShapeMismatch(
                f"contracted dimensions differ: a.shape[{ia}]={a.shape[ia]} "
                f"vs b.shape[{ib}]={b.shape[ib]}"
            )
    return np.tensordot(a, b, axes=(axes_a, axes_b))


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with an explicit inner-dimension check."""
    if a.shape[-1] != b.shape[0]:
        raise ShapeMismatch(f"inner dimensions differ: {a.shape} @ {b.shape}")
    return a @ b
