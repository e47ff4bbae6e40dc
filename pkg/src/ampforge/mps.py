"""Matrix product states over qubit chains.

Site tensors have shape ``(left_bond, 2, right_bond)`` with boundary bonds of
size one. Qubit 0 is the most significant bit of the basis-state index, which
matches the row-major reshape used when slicing a statevector into sites.
Operations treat ``Mps`` as a value: they return new instances.
"""

from __future__ import annotations

import numpy as np

from . import tensorops
from .errors import (
    NotUnitary,
    ShapeMismatch,
    SizeMismatch,
    TooLarge,
    WindowOutOfRange,
)

DENSE_CAP_QUBITS = 20

# Relative singular-value cutoff treated as "lossless": keeps bond ranks from
# accumulating numerical zeros without measurably touching the state.
LOSSLESS_TOL = 1e-14

# Default relative cutoff for "exact" MPS builds; scale-invariant in the input.
EXACT_BUILD_TOL = 1e-12


def num_qubits_for(length: int) -> int:
    """Number of qubits for a statevector length, which must be 2**N."""
    n = int(length).bit_length() - 1
    if length <= 0 or (1 << n) != length:
        raise ShapeMismatch(f"statevector length {length} is not a power of two")
    return n


def normalize_statevector(v) -> np.ndarray:
    """Return ``v`` as a unit-norm complex vector."""
    v = tensorops.as_complex(v).ravel()
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        raise ShapeMismatch("cannot normalize a zero statevector")
    return v / nrm


class Mps:
    """Ordered chain of rank-3 site tensors with an orthogonality centre."""

    def __init__(self, sites, ortho_centre=None, discarded_weight=0.0):
        self.sites = [tensorops.as_complex(s) for s in sites]
        self.ortho_centre = ortho_centre
        self.discarded_weight = float(discarded_weight)

    @property
    def n_qubits(self) -> int:
        return len(self.sites)

    @property
    def bond_dims(self) -> tuple[int, ...]:
        """Interior bond dimensions, left to right."""
        return tuple(s.shape[2] for s in self.sites[:-1])

    @property
    def max_bond_dim(self) -> int:
        return max(self.bond_dims, default=1)

    def copy(self) -> "Mps":
        return Mps([s.copy() for s in self.sites], self.ortho_centre, self.discarded_weight)

    # ------------------------------------------------------------------
    # construction / reconstruction

    @classmethod
    def from_statevector(cls, v, max_bond=None, tol: float = EXACT_BUILD_TOL) -> "Mps":
        """Slice a statevector into a left-canonical MPS.

        Repeatedly reshapes the remainder to ``(2*s, 2**rest)`` and splits it
        with a truncated SVD, keeping U as the next site and absorbing the
        singular values into the right factor. The result is left-canonical
        with the orthogonality centre on the last site; the total squared
        weight dropped by truncation is recorded on the instance.
        """
        v = normalize_statevector(v)
        n = num_qubits_for(v.size)
        if n == 1:
            return cls([v.reshape(1, 2, 1)], ortho_centre=0)

        sites = []
        discarded = 0.0
        m = v.reshape(2, -1)
        left = 1
        for _ in range(n - 1):
            res = tensorops.svd(m, max_rank=max_bond, tol=tol)
            keep = res.s.size
            sites.append(res.u.reshape(left, 2, keep))
            discarded += res.discarded_weight
            m = (res.s[:, None] * res.vdag)
            left = keep
            if m.shape[1] > 2:
                m = m.reshape(left * 2, -1)
        sites.append(m.reshape(left, 2, 1))
        out = cls(sites, ortho_centre=n - 1, discarded_weight=discarded)
        if discarded > 0.0:
            out._renormalize_centre()
        return out

    def to_statevector(self, cap: int = DENSE_CAP_QUBITS) -> np.ndarray:
        """Contract the full chain into a dense amplitude vector."""
        if self.n_qubits > cap:
            raise TooLarge(f"{self.n_qubits} qubits exceeds the dense cap of {cap}")
        acc = self.sites[0].reshape(2, -1)
        for site in self.sites[1:]:
            acc = np.tensordot(acc, site, axes=([1], [0]))
            acc = acc.reshape(acc.shape[0] * 2, -1)
        return acc.ravel()

    # ------------------------------------------------------------------
    # gauge handling

    def canonicalize(self, centre: int) -> "Mps":
        """Move the orthogonality centre to ``centre``.

        Sites left of the centre become left-orthogonal, sites right of it
        right-orthogonal; the physical state is unchanged.
        """
        if not 0 <= centre < self.n_qubits:
            raise WindowOutOfRange(f"centre {centre} outside chain of {self.n_qubits}")
        out = self.copy()
        if out.ortho_centre is None:
            out._sweep_left_orthogonal(0, centre)
            out._sweep_right_orthogonal(out.n_qubits - 1, centre)
        elif out.ortho_centre < centre:
            out._sweep_left_orthogonal(out.ortho_centre, centre)
        elif out.ortho_centre > centre:
            out._sweep_right_orthogonal(out.ortho_centre, centre)
        out.ortho_centre = centre
        return out

    def _sweep_left_orthogonal(self, start: int, stop: int) -> None:
        """QR-push the centre rightward from ``start`` up to ``stop``."""
        for i in range(start, stop):
            site = self.sites[i]
            l, _, r = site.shape
            q, rmat = np.linalg.qr(site.reshape(l * 2, r))
            k = q.shape[1]
            self.sites[i] = q.reshape(l, 2, k)
            self.sites[i + 1] = np.tensordot(rmat, self.sites[i + 1], axes=([1], [0]))

    def _sweep_right_orthogonal(self, start: int, stop: int) -> None:
        """QR-push the centre leftward from ``start`` down to ``stop``."""
        for i in range(start, stop, -1):
            site = self.sites[i]
            l, _, r = site.shape
            q, rmat = np.linalg.qr(site.reshape(l, 2 * r).conj().T)
            k = q.shape[1]
            self.sites[i] = q.conj().T.reshape(k, 2, r)
            self.sites[i - 1] = np.tensordot(self.sites[i - 1], rmat.conj().T, axes=([2], [0]))

    def _renormalize_centre(self) -> None:
        c = self.ortho_centre if self.ortho_centre is not None else self.n_qubits - 1
        nrm = np.linalg.norm(self.sites[c])
        if nrm > 0:
            self.sites[c] = self.sites[c] / nrm

    # ------------------------------------------------------------------
    # measurements

    def _window_block(self, start: int, k: int) -> np.ndarray:
        """Contract window sites into a ``(left, 2**k, right)`` block."""
        theta = self.sites[start]
        for s in range(start + 1, start + k):
            theta = np.tensordot(theta, self.sites[s], axes=([-1], [0]))
        l = theta.shape[0]
        r = theta.shape[-1]
        return theta.reshape(l, 2**k, r)

    def reduced_density_matrix(self, start: int, k: int) -> np.ndarray:
        """Reduced density matrix of the contiguous window ``[start, start+k)``.

        Internally re-gauges so the orthogonality centre sits inside the
        window, after which only the window tensors need contracting.
        """
        if not (0 <= start and start + k <= self.n_qubits and k >= 1):
            raise WindowOutOfRange(f"window [{start}, {start + k}) outside chain")
        m = self
        if m.ortho_centre is None or not (start <= m.ortho_centre < start + k):
            m = m.canonicalize(start)
        theta = m._window_block(start, k)
        return np.einsum("apb,aqb->pq", theta, theta.conj())

    def apply_window_unitary(self, u, start: int, k: int | None = None,
                             max_bond=None, tol: float = LOSSLESS_TOL):
        """Apply a ``2**k x 2**k`` unitary to a contiguous window.

        Returns ``(mps, step_discarded_weight)``. The window block is rebuilt
        by successive SVDs with the singular values absorbed rightward, so the
        centre lands on the window's last site. The state is renormalized
        after any truncation.
        """
        u = tensorops.as_complex(u)
        if k is None:
            k = num_qubits_for(u.shape[0])
        if u.shape != (2**k, 2**k):
            raise ShapeMismatch(f"unitary shape {u.shape} does not match window size {k}")
        if not (0 <= start and start + k <= self.n_qubits):
            raise WindowOutOfRange(f"window [{start}, {start + k}) outside chain")
        dev = np.max(np.abs(u.conj().T @ u - np.eye(2**k)))
        if dev > 1e-10:
            raise NotUnitary(f"matrix deviates from unitarity by {dev:.3e}")

        m = self
        if m.ortho_centre is None or not (start <= m.ortho_centre < start + k):
            m = m.canonicalize(start)
        theta = m._window_block(start, k)
        theta = np.einsum("qp,apb->aqb", u, theta)

        sites = [s.copy() for s in m.sites]
        discarded = 0.0
        left = theta.shape[0]
        right = theta.shape[-1]
        block = theta.reshape(left, 2**k, right)
        for j in range(k - 1):
            rest = 2 ** (k - 1 - j)
            mat = block.reshape(left * 2, rest * right)
            res = tensorops.svd(mat, max_rank=max_bond, tol=tol)
            keep = res.s.size
            sites[start + j] = res.u.reshape(left, 2, keep)
            discarded += res.discarded_weight
            block = (res.s[:, None] * res.vdag).reshape(keep, rest, right)
            left = keep
        sites[start + k - 1] = block.reshape(left, 2, right)

        out = Mps(sites, ortho_centre=start + k - 1,
                  discarded_weight=m.discarded_weight + discarded)
        out._renormalize_centre()
        return out, discarded

    def zero_overlap_probability(self) -> float:
        """``|<0...0|psi>|**2``, the preparation-fidelity tracker."""
        acc = np.ones((1, 1), dtype=np.complex128)
        for site in self.sites:
            acc = acc @ site[:, 0, :]
        return float(abs(acc[0, 0]) ** 2)

    def norm(self) -> float:
        return float(np.sqrt(abs(overlap(self, self))))

    def debug_dump(self) -> dict:
        """JSON-friendly summary used by the CLI's --dump-mps flag."""
        return {
            "n_qubits": self.n_qubits,
            "bond_dims": list(self.bond_dims),
            "site_norms": [float(np.linalg.norm(s)) for s in self.sites],
            "ortho_centre": self.ortho_centre,
            "discarded_weight": self.discarded_weight,
        }


def overlap(a: Mps, b: Mps) -> complex:
    """Inner product ``<a|b>`` by zipper contraction; ``|overlap|**2`` is fidelity."""
    if a.n_qubits != b.n_qubits:
        raise SizeMismatch(f"{a.n_qubits} vs {b.n_qubits} qubits")
    env = np.ones((1, 1), dtype=np.complex128)
    for sa, sb in zip(a.sites, b.sites):
        env = np.einsum("ab,aps,bpt->st", env, sa.conj(), sb)
    return complex(env[0, 0])


def random_mps(n_qubits: int, max_bond: int, rng: np.random.Generator) -> Mps:
    """Random normalized MPS whose bond dimensions are capped at ``max_bond``."""
    sites = []
    left = 1
    for i in range(n_qubits):
        right = min(max_bond, 2 ** (i + 1), 2 ** (n_qubits - i - 1))
        t = rng.standard_normal((left, 2, right)) + 1j * rng.standard_normal((left, 2, right))
        sites.append(t)
        left = right
    m = Mps(sites).canonicalize(n_qubits - 1)
    m._renormalize_centre()
    return m
