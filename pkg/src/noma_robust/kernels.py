"""Hot numeric kernels, each with a numba and a pure-numpy implementation.

The public names (``congruence_schur``, ``sinr_batch``) are bound to the
numba version unless ``NOMA_ROBUST_DISABLE_JIT`` is set; both versions are
always importable under their private names so tests and the benchmark can
compare them.

Hermitian matrix variables are parametrized by real coordinates.  Each
coordinate ``p`` owns a basis matrix ``B_p`` with at most two nonzero
entries, described by ``rows[p, :]``, ``cols[p, :]`` and complex weights
``wts[p, :]`` (unused slots carry weight 0).
"""

import numpy as np

from ._backend import JIT_ENABLED, njit


def hermitian_basis(dim):
    """Return ``(rows, cols, wts)`` for the real parametrization of a
    ``dim x dim`` Hermitian matrix.

    Coordinates are ordered: the ``dim`` diagonal entries, then for each
    upper-triangular pair ``a < b`` (row-major) the real part and the
    imaginary part of ``X[a, b]``.
    """
    n = dim * dim
    rows = np.zeros((n, 2), dtype=np.int64)
    cols = np.zeros((n, 2), dtype=np.int64)
    wts = np.zeros((n, 2), dtype=np.complex128)
    for a in range(dim):
        rows[a] = (a, a)
        cols[a] = (a, a)
        wts[a] = (1.0, 0.0)
    p = dim
    for a in range(dim):
        for b in range(a + 1, dim):
            rows[p] = (a, b)
            cols[p] = (b, a)
            wts[p] = (1.0, 1.0)
            rows[p + 1] = (a, b)
            cols[p + 1] = (b, a)
            wts[p + 1] = (1j, -1j)
            p += 2
    return rows, cols, wts


# -- Schur complement contribution of two congruence terms -----------------
#
# For basis matrices B_p (first variable) and B_q (second variable) the
# Newton matrix entry is  Re tr(B_p Q B_q Q^H),  Q = T1 P T2^H.
# Expanding the two-entry bases gives
#   sum_{e in p, f in q} w_e w_f Q[b_e, c_f] conj(Q[a_e, d_f]).


def _congruence_schur_numpy(Q, rows1, cols1, w1, rows2, cols2, w2):
    n1 = rows1.shape[0]
    n2 = rows2.shape[0]
    a = rows1.reshape(-1)
    b = cols1.reshape(-1)
    c = rows2.reshape(-1)
    d = cols2.reshape(-1)
    prod = Q[b[:, None], c[None, :]] * np.conj(Q[a[:, None], d[None, :]])
    prod *= w1.reshape(-1)[:, None] * w2.reshape(-1)[None, :]
    return prod.reshape(n1, 2, n2, 2).sum(axis=(1, 3)).real


@njit(cache=True)
def _congruence_schur_numba(Q, rows1, cols1, w1, rows2, cols2, w2):
    n1 = rows1.shape[0]
    n2 = rows2.shape[0]
    out = np.zeros((n1, n2))
    for p in range(n1):
        for q in range(n2):
            acc = 0.0
            for e in range(2):
                we = w1[p, e]
                if we == 0:
                    continue
                ae = rows1[p, e]
                be = cols1[p, e]
                for f in range(2):
                    wf = w2[q, f]
                    if wf == 0:
                        continue
                    z = we * wf * Q[be, rows2[q, f]] * np.conj(Q[ae, cols2[q, f]])
                    acc += z.real
            out[p, q] = acc
    return out


# -- Per-sample SINR of the k-th decoded signal at one receiver -------------


def _sinr_batch_numpy(w, h, delta, sigma2, k):
    g = np.abs(h.conj() @ w.T) ** 2
    r = np.abs(delta.conj() @ w.T) ** 2
    den = r[:, :k].sum(axis=1) + g[:, k + 1:].sum(axis=1) + sigma2
    return g[:, k] / den


@njit(cache=True)
def _sinr_batch_numba(w, h, delta, sigma2, k):
    n_samples, dim = h.shape
    n_users = w.shape[0]
    out = np.empty(n_samples)
    for s in range(n_samples):
        num = 0.0
        den = sigma2
        for m in range(n_users):
            if m == k or m > k:
                acc = 0j
                for i in range(dim):
                    acc += np.conj(h[s, i]) * w[m, i]
                val = acc.real * acc.real + acc.imag * acc.imag
                if m == k:
                    num = val
                else:
                    den += val
            else:
                acc = 0j
                for i in range(dim):
                    acc += np.conj(delta[s, i]) * w[m, i]
                den += acc.real * acc.real + acc.imag * acc.imag
        out[s] = num / den
    return out


def congruence_schur(Q, rows1, cols1, w1, rows2, cols2, w2):
    """Newton-matrix block coupling two congruence terms (see module doc)."""
    Q = np.ascontiguousarray(Q, dtype=np.complex128)
    if JIT_ENABLED:
        return _congruence_schur_numba(Q, rows1, cols1, w1, rows2, cols2, w2)
    return _congruence_schur_numpy(Q, rows1, cols1, w1, rows2, cols2, w2)


def sinr_batch(w, h, delta, sigma2, k):
    """SINR of signal ``k`` at a receiver, for many channel samples.

    ``w`` is ``(K, M)`` (beamformers as rows, decoded order), ``h`` and
    ``delta`` are ``(S, M)`` true channels and their estimation errors.
    """
    w = np.ascontiguousarray(w, dtype=np.complex128)
    h = np.ascontiguousarray(np.atleast_2d(h), dtype=np.complex128)
    delta = np.ascontiguousarray(np.atleast_2d(delta), dtype=np.complex128)
    if JIT_ENABLED:
        return _sinr_batch_numba(w, h, delta, float(sigma2), int(k))
    return _sinr_batch_numpy(w, h, delta, float(sigma2), int(k))
