"""SINR of fixed beamformers: achieved at a channel, and certified worst case.

Beamformers are rows of ``w`` in decoding order.  At receiver ``l`` the
signal of layer ``k <= l`` sees interference from the layers above it and
the residue of the already cancelled layers below it, which SIC removes
with the estimated channel so only the estimation error ``delta`` leaks.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .kernels import sinr_batch
from .hermitian import min_eigenvalue

BISECTION_ITERS = 60
LAMBDA_XTOL = 1e-10


@dataclass(frozen=True)
class SinrReport:
    """Worst-case certificate of one (layer, receiver) pair."""

    k: int
    l: int
    worst_case: float
    nominal: float
    certified: bool
    lambda_star: float


def achieved_sinr(w, h_true_l, delta_l, sigma2_l, k):
    """SINR of layer ``k`` at a receiver with true channel ``h_true_l``."""
    w = np.atleast_2d(np.asarray(w, dtype=np.complex128))
    h = np.asarray(h_true_l, dtype=np.complex128)
    d = np.asarray(delta_l, dtype=np.complex128)
    g = np.abs(w.conj() @ h) ** 2
    r = np.abs(w.conj() @ d) ** 2
    return float(g[k] / (r[:k].sum() + g[k + 1:].sum() + sigma2_l))


def nominal_sinr(w, h_hat_l, sigma2_l, k):
    return achieved_sinr(w, h_hat_l, np.zeros_like(h_hat_l), sigma2_l, k)


class _Pencil:
    """``C(gamma, lam)`` for one pair, with the gamma-independent parts cached."""

    def __init__(self, w, h, eps, sigma2, k):
        w = np.atleast_2d(np.asarray(w, dtype=np.complex128))
        M = w.shape[1]
        self.signal = np.outer(w[k], w[k].conj())
        self.above = sum((np.outer(v, v.conj()) for v in w[k + 1:]),
                         np.zeros((M, M), dtype=np.complex128))
        self.below = sum((np.outer(v, v.conj()) for v in w[:k]),
                         np.zeros((M, M), dtype=np.complex128))
        self.h = np.asarray(h, dtype=np.complex128)
        self.sigma2 = sigma2
        self.D = np.ones(M + 1)
        self.D[M] = -eps ** 2
        self.M = M

    def base(self, gamma):
        M = self.M
        phi = self.signal / gamma - self.above
        ph = phi @ self.h
        C = np.empty((M + 1, M + 1), dtype=np.complex128)
        C[:M, :M] = phi - self.below
        C[:M, M] = ph
        C[M, :M] = ph.conj()
        C[M, M] = np.vdot(self.h, ph).real - self.sigma2
        return C

    def best_margin(self, gamma):
        """``max_{lam >= 0} min_eig C(gamma, lam)`` and its maximizer."""
        C0 = self.base(gamma)
        D = np.diag(self.D)

        def f(lam):
            return min_eigenvalue(C0 + lam * D)

        # min_eig of an affine pencil is concave in lam: grow a bracket until
        # the value stops improving, then search inside it
        hi, f_hi = 1.0, f(1.0)
        while True:
            f_next = f(2.0 * hi)
            if not f_next > f_hi or hi > 1e300:
                break
            hi, f_hi = 2.0 * hi, f_next
        res = minimize_scalar(lambda t: -f(t), bounds=(0.0, 2.0 * hi), method="bounded",
                              options={"xatol": LAMBDA_XTOL})
        cands = [(f(0.0), 0.0), (-res.fun, float(res.x)), (f_hi, hi)]
        return max(cands)


def worst_case_sinr(w, h_hat_l, epsilon, sigma2_l, k, tol=1e-9, l=None):
    """Largest SINR of layer ``k`` guaranteed for every channel in the ball.

    Bisects on the target: a target is certified when some ``lam >= 0``
    makes the S-procedure matrix PSD.  The returned value is a certified
    lower bound within relative tolerance ``tol`` of the exact worst case.
    """
    nominal = nominal_sinr(w, h_hat_l, sigma2_l, k)
    l = k if l is None else l
    if epsilon == 0 or nominal == 0:
        return SinrReport(k, l, nominal, nominal, True, 0.0)
    pencil = _Pencil(w, h_hat_l, epsilon, sigma2_l, k)
    margin, lam = pencil.best_margin(nominal)
    if margin >= 0:
        return SinrReport(k, l, nominal, nominal, True, lam)
    lo, hi, lam_lo = 0.0, nominal, 0.0
    for _ in range(BISECTION_ITERS):
        if hi - lo <= tol * hi:
            break
        mid = 0.5 * (lo + hi)
        margin, lam = pencil.best_margin(mid)
        if margin >= 0:
            lo, lam_lo = mid, lam
        else:
            hi = mid
    return SinrReport(k, l, lo, nominal, True, lam_lo)


def certify_beamformers(w, h_hat, epsilon, noise_var, tol=1e-9):
    """Reports for every pair ``k <= l``; arrays are in decoding order."""
    K = len(h_hat)
    return [worst_case_sinr(w, h_hat[l], epsilon[l], noise_var[l], k, tol, l=l)
            for k in range(K) for l in range(k, K)]


def _decoded(design, cs, s):
    o = np.asarray(design.order)
    h_hat, h_true, delta = cs.h_hat[o], cs.h_true[o], cs.delta[o]
    return h_hat, h_true, delta, np.asarray(s.epsilon)[o], np.asarray(s.noise_var)[o]


def min_achieved_sinr(design, cs, s):
    """Smallest SINR over every layer and every receiver that decodes it.

    OMA users are alone in a ``1/K`` slot; their SNR is mapped to the SINR
    delivering the same rate over the whole frame, ``(1 + snr)^(1/K) - 1``,
    so it compares directly with the NOMA target.
    """
    _, h_true, delta, _, sig = _decoded(design, cs, s)
    w = design.w
    K = len(w)
    if design.scheme == "oma":
        snr = np.array([np.abs(np.vdot(h_true[k], w[k])) ** 2 / sig[k] for k in range(K)])
        return float(np.min((1.0 + snr) ** (1.0 / K) - 1.0))
    return min(achieved_sinr(w, h_true[l], delta[l], sig[l], k)
               for k in range(K) for l in range(k, K))


def certify_design(design, cs, s, tol=1e-9):
    """Worst-case reports of a NOMA design at its own channel estimates."""
    h_hat, _, _, eps, sig = _decoded(design, cs, s)
    if design.scheme == "oma":
        return [worst_case_sinr(design.w[k:k + 1], h_hat[k], eps[k], sig[k], 0, tol, l=k)
                for k in range(len(design.w))]
    return certify_beamformers(design.w, h_hat, eps, sig, tol)


def sampled_min_sinr(w, h_hat_l, epsilon, sigma2_l, k, n_samples, rng):
    """Brute-force minimum of the achieved SINR over random errors.

    Half the errors lie on the sphere of radius ``epsilon`` and half are
    uniform in the ball; the minimizer can be interior because the residue
    of the cancelled layers grows with the error norm.
    """
    h_hat_l = np.asarray(h_hat_l, dtype=np.complex128)
    M = h_hat_l.size
    z = rng.standard_normal((n_samples, 2 * M))
    v = z[:, :M] + 1j * z[:, M:]
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    radius = np.full(n_samples, float(epsilon))
    half = n_samples // 2
    radius[half:] *= rng.random(n_samples - half) ** (1.0 / (2 * M))
    delta = radius[:, None] * v
    return float(sinr_batch(w, h_hat_l[None, :] + delta, delta, sigma2_l, k).min())
