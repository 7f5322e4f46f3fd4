import numpy as np
import pytest

from noma_robust import kernels
from noma_robust.kernels import hermitian_basis
from noma_robust.sdp.problem import MatrixVar


def basis_matrix(rows, cols, wts, p, dim):
    B = np.zeros((dim, dim), dtype=complex)
    for e in range(2):
        B[rows[p, e], cols[p, e]] += wts[p, e]
    return B


def test_basis_round_trip():
    rng = np.random.default_rng(0)
    mv = MatrixVar(0, 4)
    A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    X = A + A.conj().T
    np.testing.assert_allclose(mv.to_matrix(mv.from_matrix(X)), X, atol=1e-14)


def test_basis_matrices_are_hermitian_and_independent():
    dim = 3
    rows, cols, wts = hermitian_basis(dim)
    Bs = [basis_matrix(rows, cols, wts, p, dim) for p in range(dim * dim)]
    for B in Bs:
        np.testing.assert_allclose(B, B.conj().T)
    flat = np.array([np.concatenate([B.real.ravel(), B.imag.ravel()]) for B in Bs])
    assert np.linalg.matrix_rank(flat) == dim * dim


def test_congruence_schur_matches_direct_trace():
    """Direct oracle: Re tr(B_p Q B_q Q^H) from dense basis matrices."""
    rng = np.random.default_rng(1)
    d1, d2 = 3, 2
    r1, c1, w1 = hermitian_basis(d1)
    r2, c2, w2 = hermitian_basis(d2)
    Q = rng.standard_normal((d1, d2)) + 1j * rng.standard_normal((d1, d2))
    want = np.array([[np.trace(basis_matrix(r1, c1, w1, p, d1) @ Q
                               @ basis_matrix(r2, c2, w2, q, d2) @ Q.conj().T).real
                      for q in range(d2 * d2)] for p in range(d1 * d1)])
    got_np = kernels._congruence_schur_numpy(Q, r1, c1, w1, r2, c2, w2)
    got_nb = kernels._congruence_schur_numba(Q, r1, c1, w1, r2, c2, w2)
    np.testing.assert_allclose(got_np, want, atol=1e-12)
    np.testing.assert_allclose(got_nb, want, atol=1e-12)


def test_sinr_batch_backends_agree_with_formula():
    rng = np.random.default_rng(2)
    K, M, S = 3, 4, 50
    w = rng.standard_normal((K, M)) + 1j * rng.standard_normal((K, M))
    delta = 0.1 * (rng.standard_normal((S, M)) + 1j * rng.standard_normal((S, M)))
    h = rng.standard_normal((S, M)) + 1j * rng.standard_normal((S, M)) + delta
    for k in range(K):
        want = []
        for s in range(S):
            num = abs(np.vdot(h[s], w[k])) ** 2
            den = 0.01 + sum(abs(np.vdot(delta[s], w[m])) ** 2 for m in range(k))
            den += sum(abs(np.vdot(h[s], w[m])) ** 2 for m in range(k + 1, K))
            want.append(num / den)
        np.testing.assert_allclose(kernels._sinr_batch_numpy(w, h, delta, 0.01, k), want,
                                   rtol=1e-12)
        np.testing.assert_allclose(kernels._sinr_batch_numba(w, h, delta, 0.01, k), want,
                                   rtol=1e-12)
        np.testing.assert_allclose(kernels.sinr_batch(w, h, delta, 0.01, k), want, rtol=1e-12)


def test_backend_flag(monkeypatch):
    import importlib
    from noma_robust import _backend

    monkeypatch.setenv("NOMA_ROBUST_DISABLE_JIT", "1")
    try:
        mod = importlib.reload(_backend)
        assert mod.backend_name() == "numpy"
        assert mod.njit(cache=True)(len) is len
    finally:
        monkeypatch.delenv("NOMA_ROBUST_DISABLE_JIT")
        importlib.reload(_backend)
    assert _backend.backend_name() in ("numba", "numpy")


@pytest.mark.parametrize("dim", [1, 2, 5])
def test_matrixvar_adjoint_is_gradient(dim):
    rng = np.random.default_rng(dim)
    mv = MatrixVar(0, dim)
    A = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    Y = A + A.conj().T
    x = rng.standard_normal(dim * dim)
    lhs = np.trace(mv.to_matrix(x) @ Y).real
    assert lhs == pytest.approx(x @ mv.adjoint(Y))
