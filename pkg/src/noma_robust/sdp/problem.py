"""Block-diagonal LMI problems: minimize c^T x subject to F(x) >= 0 blockwise.

Each block is an affine Hermitian map of the real decision vector ``x``.
Two kinds of terms are supported:

* scalar terms ``x_j * D`` with a dense Hermitian coefficient ``D``;
* congruence terms ``coef * T^H X_g T`` where ``X_g`` is a Hermitian matrix
  variable whose ``dim**2`` real coordinates live in a contiguous slice of
  ``x`` (layout from :func:`noma_robust.kernels.hermitian_basis`).

The congruence form keeps the Newton system cheap for the beamforming
problems; :meth:`SdpProblem.lmi_blocks` expands everything to the plain
``F0 + sum_i x_i F_i`` form for auditing.
"""

from dataclasses import dataclass, field

import numpy as np

from ..hermitian import real_embedding
from ..kernels import hermitian_basis


@dataclass
class MatrixVar:
    """Hermitian variable ``scale * X`` with ``X`` stored in ``x[offset:]``."""

    offset: int
    dim: int
    label: str = ""
    scale: float = 1.0

    def __post_init__(self):
        self.rows, self.cols, self.wts = hermitian_basis(self.dim)

    @property
    def size(self):
        return self.dim * self.dim

    @property
    def slice(self):
        return slice(self.offset, self.offset + self.size)

    def to_matrix(self, coords):
        X = np.zeros((self.dim, self.dim), dtype=np.complex128)
        coords = np.asarray(coords, dtype=float)
        np.add.at(X, (self.rows[:, 0], self.cols[:, 0]), self.wts[:, 0] * coords)
        np.add.at(X, (self.rows[:, 1], self.cols[:, 1]), self.wts[:, 1] * coords)
        return X

    def from_matrix(self, X):
        """Coordinates of a Hermitian matrix (inverse of :meth:`to_matrix`)."""
        X = np.asarray(X)
        out = np.empty(self.size)
        out[: self.dim] = np.diagonal(X).real
        iu = np.triu_indices(self.dim, 1)
        out[self.dim::2] = X[iu].real
        out[self.dim + 1::2] = X[iu].imag
        return out

    def adjoint(self, Y):
        """Gradient of ``Re tr(X Y)`` with respect to the coordinates of X."""
        g = self.wts[:, 0] * Y[self.cols[:, 0], self.rows[:, 0]]
        g += self.wts[:, 1] * Y[self.cols[:, 1], self.rows[:, 1]]
        return g.real


@dataclass
class LmiBlock:
    dim: int
    const: np.ndarray
    scalar_terms: list = field(default_factory=list)
    congruence_terms: list = field(default_factory=list)
    label: str = ""


class SdpProblem:
    """minimize ``c @ x`` subject to every block of ``F(x)`` being PSD."""

    def __init__(self, c, blocks, matrix_vars=(), var_index=None):
        self.c = np.asarray(c, dtype=float)
        self.blocks = list(blocks)
        self.matrix_vars = list(matrix_vars)
        self.var_index = dict(var_index or {})
        if self.num_vars == 0:
            raise ValueError("problem has no variables")
        for blk in self.blocks:
            if blk.const.shape != (blk.dim, blk.dim):
                raise ValueError(f"block {blk.label!r}: constant has wrong shape")
            for j, D in blk.scalar_terms:
                if not 0 <= j < self.num_vars or D.shape != (blk.dim, blk.dim):
                    raise ValueError(f"block {blk.label!r}: bad scalar term")
            for g, _, T in blk.congruence_terms:
                if T.shape != (self.matrix_vars[g].dim, blk.dim):
                    raise ValueError(f"block {blk.label!r}: bad congruence map")

    @property
    def num_vars(self):
        return self.c.size

    @property
    def block_dims(self):
        return [b.dim for b in self.blocks]

    def matrix_value(self, x, g):
        mv = self.matrix_vars[g]
        return mv.scale * mv.to_matrix(x[mv.slice])

    def evaluate(self, x, include_const=True):
        """Block values of ``F(x)`` (or of its linear part)."""
        x = np.asarray(x, dtype=float)
        mats = [mv.to_matrix(x[mv.slice]) for mv in self.matrix_vars]
        out = []
        for blk in self.blocks:
            F = blk.const.astype(np.complex128) if include_const else np.zeros(
                (blk.dim, blk.dim), dtype=np.complex128)
            for j, D in blk.scalar_terms:
                F = F + x[j] * D
            for g, coef, T in blk.congruence_terms:
                F = F + coef * (T.conj().T @ mats[g] @ T)
            out.append(0.5 * (F + F.conj().T))
        return out

    def adjoint(self, Z):
        """Vector of ``Re tr(F_i Z)`` over all coordinates ``i``."""
        g = np.zeros(self.num_vars)
        for blk, Zb in zip(self.blocks, Z):
            for j, D in blk.scalar_terms:
                g[j] += np.vdot(Zb, D).real
            for m, coef, T in blk.congruence_terms:
                mv = self.matrix_vars[m]
                g[mv.slice] += coef * mv.adjoint(T @ Zb @ T.conj().T)
        return g

    def constant_inner(self, Z):
        """``Re tr(F0 Z)`` summed over blocks."""
        return float(sum(np.vdot(Zb, blk.const).real for blk, Zb in zip(self.blocks, Z)))

    def lmi_blocks(self):
        """Dense affine maps: for each block ``(F0, {i: F_i})``."""
        out = []
        for blk in self.blocks:
            coeffs = {}
            for j, D in blk.scalar_terms:
                coeffs[j] = coeffs.get(j, 0) + np.asarray(D, dtype=np.complex128)
            for g, coef, T in blk.congruence_terms:
                mv = self.matrix_vars[g]
                Tc = T.conj()
                # T^H B_p T for every basis matrix B_p at once
                F = sum(mv.wts[:, e, None, None] * Tc[mv.rows[:, e]][:, :, None]
                        * T[mv.cols[:, e]][:, None, :] for e in range(2))
                for p in range(mv.size):
                    i = mv.offset + p
                    coeffs[i] = coeffs.get(i, 0) + coef * F[p]
            out.append((np.asarray(blk.const, dtype=np.complex128), coeffs))
        return out

    def real_embedded(self):
        """Equivalent problem with real symmetric blocks of twice the size.

        Every coordinate becomes a scalar term, so the result exercises the
        solver's dense path only.
        """
        blocks = []
        for blk, (F0, coeffs) in zip(self.blocks, self.lmi_blocks()):
            terms = [(i, real_embedding(F).astype(np.complex128))
                     for i, F in sorted(coeffs.items()) if np.any(F)]
            blocks.append(LmiBlock(2 * blk.dim, real_embedding(F0).astype(np.complex128),
                                   scalar_terms=terms, label=blk.label))
        return SdpProblem(self.c.copy(), blocks, var_index=self.var_index)


class ProblemBuilder:
    """Incremental construction of an :class:`SdpProblem`."""

    def __init__(self):
        self._c = []
        self.matrix_vars = []
        self.blocks = []
        self.var_index = {}

    @property
    def num_vars(self):
        return len(self._c)

    def scalar(self, label, cost=0.0):
        j = len(self._c)
        self._c.append(float(cost))
        self.var_index[label] = j
        return j

    def matrix(self, dim, label, trace_cost=0.0, scale=1.0):
        """Add a Hermitian matrix variable; ``trace_cost`` weights ``tr(X)``.

        ``scale`` is a typical magnitude of ``X``; the solver works with
        ``X / scale``, while terms and costs are given for ``X`` itself.
        """
        if not scale > 0:
            raise ValueError("scale must be positive")
        mv = MatrixVar(len(self._c), dim, label, float(scale))
        self._c.extend([float(trace_cost) * mv.scale] * dim + [0.0] * (dim * dim - dim))
        self.matrix_vars.append(mv)
        self.var_index[label] = len(self.matrix_vars) - 1
        return len(self.matrix_vars) - 1

    def block(self, dim, const=None, scalar_terms=(), congruence_terms=(), label=""):
        const = np.zeros((dim, dim), dtype=np.complex128) if const is None else np.asarray(
            const, dtype=np.complex128)
        maps = {}
        cong = []
        for g, c, T in congruence_terms:
            # keep shared maps shared so the solver can reuse their products
            if id(T) not in maps:
                maps[id(T)] = np.asarray(T, dtype=np.complex128)
            cong.append((g, float(c) * self.matrix_vars[g].scale, maps[id(T)]))
        blk = LmiBlock(dim, const,
                       [(j, np.asarray(D, dtype=np.complex128)) for j, D in scalar_terms],
                       cong, label)
        self.blocks.append(blk)
        return blk

    def build(self):
        if not self._c:
            raise ValueError("problem has no variables")
        return SdpProblem(np.array(self._c), self.blocks, self.matrix_vars, self.var_index)


def dense_problem(c, F0_blocks, F_blocks):
    """Problem from explicit coefficients.

    ``F_blocks[b][i]`` is the coefficient of ``x_i`` in block ``b`` (may be
    ``None`` when the coordinate does not appear).
    """
    blocks = []
    for b, F0 in enumerate(F0_blocks):
        F0 = np.atleast_2d(np.asarray(F0, dtype=np.complex128))
        terms = [(i, np.atleast_2d(np.asarray(F, dtype=np.complex128)))
                 for i, F in enumerate(F_blocks[b]) if F is not None]
        blocks.append(LmiBlock(F0.shape[0], F0, scalar_terms=terms, label=f"block{b}"))
    return SdpProblem(np.asarray(c, dtype=float), blocks)
