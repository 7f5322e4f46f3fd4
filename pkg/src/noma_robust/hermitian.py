"""Complex vectors and Hermitian matrices.

Vectors are 1-D complex ndarrays and Hermitian matrices are 2-D complex
ndarrays; the helpers here validate, symmetrize and freeze them, and provide
the spectral operations used by the formulation, solver and certifier.
"""

from dataclasses import dataclass

import numpy as np

HERMITIAN_ATOL = 1e-12


class NotHermitianError(ValueError):
    """Raised when an operation requiring a Hermitian matrix gets another."""


def _frozen(a):
    a = np.array(a, dtype=np.complex128)
    a.setflags(write=False)
    return a


def complex_vector(entries):
    """Immutable 1-D complex vector."""
    v = _frozen(entries)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"expected a nonempty 1-D vector, got shape {v.shape}")
    return v


def hermitian(a):
    """Immutable Hermitian matrix built as ``(A + A^H) / 2``."""
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return _frozen(0.5 * (a + a.conj().T))


def check_hermitian(a, atol=HERMITIAN_ATOL):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotHermitianError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
    if not np.allclose(a, a.conj().T, rtol=0.0, atol=atol * scale):
        raise NotHermitianError("matrix is not conjugate-symmetric")
    return a


@dataclass(frozen=True)
class BlockDiagMatrix:
    """Block-diagonal Hermitian matrix kept as its list of blocks."""

    blocks: tuple

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(hermitian(b) for b in self.blocks))

    @property
    def dims(self):
        return tuple(b.shape[0] for b in self.blocks)

    def min_eigenvalue(self):
        return min(min_eigenvalue(b) for b in self.blocks)

    def is_psd(self, tol=0.0):
        return all(is_psd(b, tol) for b in self.blocks)

    def dense(self):
        n = sum(self.dims)
        out = np.zeros((n, n), dtype=np.complex128)
        i = 0
        for b in self.blocks:
            d = b.shape[0]
            out[i:i + d, i:i + d] = b
            i += d
        return out


def outer(v):
    """Rank-one Hermitian matrix ``v v^H``."""
    v = np.asarray(v, dtype=np.complex128)
    return _frozen(np.outer(v, v.conj()))


def eigvalsh(h):
    check_hermitian(h)
    return np.linalg.eigvalsh(h)


def min_eigenvalue(h):
    """Smallest eigenvalue of a Hermitian matrix."""
    return float(eigvalsh(h)[0])


def principal_eigpair(h):
    """Largest eigenvalue and its unit eigenvector.

    The eigenvector's first nonzero entry is made real and nonnegative.  The
    all-zero matrix returns ``(0.0, e_1)``.
    """
    h = check_hermitian(h)
    n = h.shape[0]
    if not np.any(h):
        e1 = np.zeros(n, dtype=np.complex128)
        e1[0] = 1.0
        return 0.0, e1
    vals, vecs = np.linalg.eigh(h)
    return float(vals[-1]), _fix_phase(vecs[:, -1])


def _fix_phase(u, tol=1e-12):
    mags = np.abs(u)
    idx = int(np.argmax(mags > tol * mags.max()))
    z = u[idx]
    return u * (np.conj(z) / abs(z))


def real_embedding(h):
    """Real symmetric ``[[Re H, -Im H], [Im H, Re H]]`` of size ``2M``."""
    h = np.asarray(h, dtype=np.complex128)
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def from_real_embedding(e):
    """Inverse of :func:`real_embedding` for structured matrices."""
    n = e.shape[0] // 2
    return e[:n, :n] + 1j * e[n:, :n]


def is_psd(h, tol=0.0):
    return min_eigenvalue(h) >= -tol
