"""Primal-dual path-following interior-point method for block LMI problems.

Solves ``min c^T x  s.t.  S = F(x) >= 0`` together with its dual
``max -tr(F0 Z)  s.t.  tr(F_i Z) = c_i,  Z >= 0`` using Nesterov-Todd
scaling, a Mehrotra predictor-corrector and a fraction-to-boundary step
rule from an infeasible starting point.

Blocks of equal size are stacked so that every per-block factorization runs
as one batched numpy call.
"""

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from ..kernels import congruence_schur

log = logging.getLogger(__name__)


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    MAX_ITERS = "max_iters"
    NUMERICAL_FAILURE = "numerical_failure"

    def __str__(self):
        return self.value


@dataclass
class SolverOptions:
    tol_gap: float = 1e-7
    tol_feas: float = 1e-8
    max_iters: int = 100
    step_fraction: float = 0.98
    # centering used when the affine predictor step is blocked
    mu_reduction: float = 0.3
    tol_infeas: float = 1e-8
    trace: object = None  # callable receiving one dict per iteration

    def __post_init__(self):
        for name in ("tol_gap", "tol_feas", "max_iters", "step_fraction",
                     "mu_reduction", "tol_infeas"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.step_fraction < 1:
            raise ValueError("step_fraction must be < 1")


@dataclass
class SdpSolution:
    x: np.ndarray
    dual_blocks: list
    objective: float
    dual_objective: float
    gap: float
    status: Status
    iterations: int
    primal_infeas: float = np.nan
    dual_infeas: float = np.nan
    certificate: str = ""
    history: list = field(default_factory=list)


class NewtonFailure(RuntimeError):
    pass


def _herm(a):
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def _ct(a):
    return np.conj(np.swapaxes(a, -1, -2))


def _batched_adjoint(mv, Y):
    g = mv.wts[:, 0] * Y[:, mv.cols[:, 0], mv.rows[:, 0]]
    g += mv.wts[:, 1] * Y[:, mv.cols[:, 1], mv.rows[:, 1]]
    return g.real


def newton_matrix(problem, P):
    """Schur complement ``H_ij = Re tr(F_i P F_j P)`` summed over blocks.

    ``P`` holds one scaling matrix per block.  Congruence terms sharing the
    same map ``T`` reuse one kernel evaluation.
    """
    n = problem.num_vars
    H = np.zeros((n, n))
    mvs = problem.matrix_vars
    for blk, Pb in zip(problem.blocks, P):
        cong = blk.congruence_terms
        TP = {}
        for _, _, T in cong:
            if id(T) not in TP:
                TP[id(T)] = T @ Pb
        cache = {}
        for a, (g1, c1, T1) in enumerate(cong):
            m1 = mvs[g1]
            for b in range(a, len(cong)):
                g2, c2, T2 = cong[b]
                m2 = mvs[g2]
                key = (id(T1), id(T2), m1.dim, m2.dim)
                K = cache.get(key)
                if K is None:
                    K = congruence_schur(TP[id(T1)] @ T2.conj().T, m1.rows, m1.cols, m1.wts,
                                         m2.rows, m2.cols, m2.wts)
                    cache[key] = K
                K = (c1 * c2) * K
                H[m1.slice, m2.slice] += K
                if b != a:
                    H[m2.slice, m1.slice] += K.T
        if blk.scalar_terms:
            idx = np.array([j for j, _ in blk.scalar_terms])
            Ds = np.stack([D for _, D in blk.scalar_terms])
            E = Ds @ Pb
            Hss = np.einsum("iab,jba->ij", E, E).real
            np.add.at(H, (idx[:, None], idx[None, :]), Hss)
            PDP = Pb @ E
            for g, coef, T in cong:
                mv = mvs[g]
                cross = coef * _batched_adjoint(mv, T @ PDP @ T.conj().T)
                cols = np.arange(mv.offset, mv.offset + mv.size)
                np.add.at(H, (idx[:, None], cols[None, :]), cross)
                np.add.at(H, (cols[:, None], idx[None, :]), cross.T)
    return 0.5 * (H + H.T)


class _NewtonSystem:
    """Equilibrated, regularized Cholesky of the Schur complement."""

    def __init__(self, H, reg_start=1e-12, reg_max=1e-6, refine=5):
        self.refine = refine
        d = np.sqrt(np.maximum(np.diag(H), 0.0))
        d[d == 0] = 1.0
        self.scale = 1.0 / d
        self.H = H
        Hs = self.scale[:, None] * H * self.scale[None, :]
        eye = np.eye(H.shape[0])
        reg = reg_start
        while True:
            try:
                self.factor = linalg.cho_factor(Hs + reg * eye, lower=True)
                break
            except (linalg.LinAlgError, ValueError):
                reg *= 10.0
                if reg > reg_max * (1 + 1e-9):
                    raise NewtonFailure("Schur complement not positive definite")
        self.reg = reg

    def solve(self, rhs):
        s = self.scale
        x = s * linalg.cho_solve(self.factor, s * rhs)
        # iterative refinement against the unregularized matrix
        r = rhs - self.H @ x
        rn = np.linalg.norm(r)
        for _ in range(self.refine):
            x_new = x + s * linalg.cho_solve(self.factor, s * r)
            r_new = rhs - self.H @ x_new
            rn_new = np.linalg.norm(r_new)
            if not rn_new < 0.5 * rn:
                if rn_new < rn:
                    x = x_new
                break
            x, r, rn = x_new, r_new, rn_new
        return x


class _Layout:
    """Blocks grouped by size, with dense linear maps for each group."""

    def __init__(self, problem):
        self.problem = problem
        dims = problem.block_dims
        self.groups = {}
        for b, d in enumerate(dims):
            self.groups.setdefault(d, []).append(b)
        self.keys = sorted(self.groups)
        lmi = problem.lmi_blocks()
        n = problem.num_vars
        self.F0 = {}
        self.A = {}
        for d in self.keys:
            idx = self.groups[d]
            self.F0[d] = np.stack([lmi[b][0] for b in idx])
            A = np.zeros((len(idx), d, d, n), dtype=np.complex128)
            for i, b in enumerate(idx):
                for j, F in lmi[b][1].items():
                    A[i, :, :, j] += F
            self.A[d] = A.reshape(len(idx) * d * d, n)
        self.nblocks = len(dims)

    def linear(self, x):
        return {d: (self.A[d] @ x).reshape(self.F0[d].shape) for d in self.keys}

    def evaluate(self, x):
        lin = self.linear(x)
        return {d: _herm(self.F0[d] + lin[d]) for d in self.keys}

    def adjoint(self, Z):
        return sum((self.A[d].T @ np.conj(Z[d].reshape(-1))).real for d in self.keys)

    def const_inner(self, Z):
        return float(sum(np.vdot(Z[d], self.F0[d]).real for d in self.keys))

    def to_blocks(self, stacks):
        out = [None] * self.nblocks
        for d in self.keys:
            for i, b in enumerate(self.groups[d]):
                out[b] = stacks[d][i]
        return out


def _inner(X, Y, keys):
    return float(sum(np.vdot(X[d], Y[d]).real for d in keys))


def _fro2(X, keys):
    return float(sum(np.vdot(X[d], X[d]).real for d in keys))


def _initial_scale(problem):
    """Per-block multiples of identity for the starting slack and dual."""
    c = problem.c
    tau_s, tau_z = [], []
    for blk in problem.blocks:
        norms = []
        costs = []
        for j, D in blk.scalar_terms:
            norms.append(np.linalg.norm(D))
            costs.append(abs(c[j]))
        for g, coef, T in blk.congruence_terms:
            mv = problem.matrix_vars[g]
            norms.append(np.linalg.norm(T, 2) ** 2 * abs(coef))
            costs.append(np.max(np.abs(c[mv.slice])))
        norms = np.array(norms) if norms else np.zeros(1)
        costs = np.array(costs) if costs else np.zeros(1)
        root = np.sqrt(blk.dim)
        tau_s.append(max(10.0, root, np.linalg.norm(blk.const), norms.max()))
        tau_z.append(max(10.0, root, np.max((1.0 + costs) / (1.0 + norms))))
    return tau_s, tau_z


def solve(problem, opts=None):
    """Solve ``problem``; see :class:`SdpSolution` for the result fields."""
    opts = opts or SolverOptions()
    lay = _Layout(problem)
    keys = lay.keys
    c = problem.c
    n = problem.num_vars
    N = float(sum(problem.block_dims))
    tau_s, tau_z = _initial_scale(problem)
    x = np.zeros(n)
    S = {d: np.stack([tau_s[b] * np.eye(d, dtype=np.complex128) for b in lay.groups[d]])
         for d in keys}
    Z = {d: np.stack([tau_z[b] * np.eye(d, dtype=np.complex128) for b in lay.groups[d]])
         for d in keys}
    norm_F0 = np.sqrt(_fro2(lay.F0, keys))
    norm_c = np.linalg.norm(c)
    history = []
    status = Status.MAX_ITERS
    certificate = ""
    stalled = 0
    step = (None, None)

    it = 0
    while True:
        Fx = lay.evaluate(x)
        rp = {d: S[d] - Fx[d] for d in keys}
        AtZ = lay.adjoint(Z)
        rd = c - AtZ
        pobj = float(c @ x)
        dobj = -lay.const_inner(Z)
        gap = _inner(S, Z, keys)
        pinf = np.sqrt(_fro2(rp, keys)) / (1.0 + norm_F0)
        dinf = np.linalg.norm(rd) / (1.0 + norm_c)
        rel_gap = max(gap, abs(pobj - dobj)) / max(abs(pobj), abs(dobj), 1e-12)
        rec = dict(iter=it, pobj=pobj, dobj=dobj, gap=gap, rel_gap=rel_gap,
                   pinf=pinf, dinf=dinf, merit=rel_gap + pinf + dinf,
                   step_p=step[0], step_d=step[1])
        history.append(rec)
        if opts.trace is not None:
            opts.trace(rec)

        if rel_gap <= opts.tol_gap and pinf <= opts.tol_feas and dinf <= opts.tol_feas:
            status = Status.OPTIMAL
            break
        if dobj > 0 and np.linalg.norm(AtZ) <= opts.tol_infeas * dobj:
            status = Status.INFEASIBLE
            certificate = ("dual improving ray: Z / (-tr F0 Z) has "
                           f"|A*(Z)| = {np.linalg.norm(AtZ) / dobj:.3e}")
            break
        if it >= opts.max_iters:
            break
        if it >= max(20, opts.max_iters // 2) and stalled >= 5 and dobj > 0 and pinf > 1e-3:
            status = Status.INFEASIBLE
            certificate = (f"dual objective diverging ({dobj:.3e}) while the primal "
                           f"step is blocked (pinf {pinf:.3e})")
            break

        try:
            dx, dS, dZ, ap, ad = _iterate(lay, S, Z, rp, rd, N, opts)
        except (NewtonFailure, np.linalg.LinAlgError, linalg.LinAlgError) as exc:
            log.debug("newton failure at iteration %d: %s", it, exc)
            status = Status.NUMERICAL_FAILURE
            certificate = str(exc)
            ray = _weak_ray(AtZ, dobj, opts)
            if ray:
                status, certificate = Status.INFEASIBLE, ray
            break
        x = x + ap * dx
        S = {d: _herm(S[d] + ap * dS[d]) for d in keys}
        Z = {d: _herm(Z[d] + ad * dZ[d]) for d in keys}
        step = (ap, ad)
        stalled = stalled + 1 if ap < 1e-2 else 0
        it += 1

    return SdpSolution(x=x, dual_blocks=lay.to_blocks(Z), objective=pobj,
                       dual_objective=dobj, gap=rel_gap, status=status, iterations=it,
                       primal_infeas=pinf, dual_infeas=dinf,
                       certificate=certificate, history=history)


def _weak_ray(AtZ, dobj, opts):
    """Certificate text when a diverging dual iterate is a usable Farkas ray.

    For ``Zn = Z / (-tr F0 Z)`` every feasible ``x`` satisfies
    ``x . A*(Zn) >= 1``, hence ``|x| >= 1 / |A*(Zn)|``.  Accepted only after
    the iteration broke down, with the looser threshold ``sqrt(tol_infeas)``.
    """
    if not dobj > 0:
        return ""
    r = np.linalg.norm(AtZ) / dobj
    if r > np.sqrt(opts.tol_infeas):
        return ""
    return (f"dual improving ray with |A*(Z)| = {r:.3e}: no feasible x with "
            f"|x| < {1.0 / max(r, 1e-300):.3e}")


def _nt_scaling(S, Z):
    """Stacked ``(R, R^{-1}, lam)`` with ``R^{-1} S R^{-H} = R^H Z R = diag(lam)``."""
    Ls = np.linalg.cholesky(S)
    Lz = np.linalg.cholesky(Z)
    _, lam, Vh = np.linalg.svd(_ct(Lz) @ Ls)
    sq = np.sqrt(lam)
    R = (Ls @ _ct(Vh)) / sq[:, None, :]
    R_inv = sq[:, :, None] * (Vh @ np.linalg.inv(Ls))
    return R, R_inv, lam


def _max_step(lam, d_scaled):
    """Largest ``a`` with ``diag(lam) + a * d_scaled >= 0`` for every block."""
    isq = 1.0 / np.sqrt(lam)
    m = np.linalg.eigvalsh(_herm(isq[:, :, None] * d_scaled * isq[:, None, :]))[:, 0].min()
    return np.inf if m >= 0 else -1.0 / m


def _iterate(lay, S, Z, rp, rd, N, opts):
    keys = lay.keys
    R, Ri, lam, P = {}, {}, {}, {}
    for d in keys:
        R[d], Ri[d], lam[d] = _nt_scaling(S[d], Z[d])
        P[d] = _ct(Ri[d]) @ Ri[d]
    system = _NewtonSystem(newton_matrix(lay.problem, lay.to_blocks(P)))
    mu = sum(float(np.sum(lam[d] ** 2)) for d in keys) / N

    def direction(Dm):
        M = {d: _ct(Ri[d]) @ Dm[d] @ Ri[d] + P[d] @ rp[d] @ P[d] for d in keys}
        dx = system.solve(lay.adjoint(M) - rd)
        lin = lay.linear(dx)
        dS = {d: _herm(lin[d] - rp[d]) for d in keys}
        dZ = {d: _herm(_ct(Ri[d]) @ Dm[d] @ Ri[d] - P[d] @ dS[d] @ P[d]) for d in keys}
        ds_t = {d: _herm(Ri[d] @ dS[d] @ _ct(Ri[d])) for d in keys}
        dz_t = {d: _herm(_ct(R[d]) @ dZ[d] @ R[d]) for d in keys}
        return dx, dS, dZ, ds_t, dz_t

    def steps(ds_t, dz_t):
        ap = min(_max_step(lam[d], ds_t[d]) for d in keys)
        ad = min(_max_step(lam[d], dz_t[d]) for d in keys)
        return ap, ad

    diag = {d: lam[d][:, :, None] * np.eye(d) for d in keys}

    # predictor
    _, _, _, ds_a, dz_a = direction({d: -diag[d].astype(np.complex128) for d in keys})
    ap, ad = steps(ds_a, dz_a)
    ap, ad = min(1.0, ap), min(1.0, ad)
    mu_aff = sum(np.vdot(diag[d] + ap * ds_a[d], diag[d] + ad * dz_a[d]).real
                 for d in keys) / N
    sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3
    if min(ap, ad) < 0.1:
        sigma = max(sigma, opts.mu_reduction)

    # corrector
    Dm = {}
    for d in keys:
        lsum = lam[d][:, :, None] + lam[d][:, None, :]
        T = sigma * mu * np.eye(d) - diag[d] ** 2 - _herm(ds_a[d] @ dz_a[d])
        Dm[d] = 2.0 * T / lsum
    dx, dS, dZ, ds_t, dz_t = direction(Dm)
    ap, ad = steps(ds_t, dz_t)
    ap = min(1.0, opts.step_fraction * ap)
    ad = min(1.0, opts.step_fraction * ad)
    return dx, dS, dZ, ap, ad
