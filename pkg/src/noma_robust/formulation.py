"""Robust, non-robust and OMA power-minimization SDPs and beamformer extraction.

All per-user quantities inside this module are in decoding order: index 0 is
the weakest user, whose signal every other user decodes and cancels first.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .hermitian import principal_eigpair
from .sdp import ProblemBuilder, SdpProblem, SolverOptions, Status, solve

DEFAULT_TOL_RANK = 1e-4


class RankOneViolation(Exception):
    """An optimal ``W_k`` is not numerically rank one."""

    def __init__(self, ratio, w=None, ratios=None):
        super().__init__(f"rank ratio {ratio:.3e} exceeds tolerance")
        self.ratio = ratio
        self.w = w
        self.ratios = ratios


@dataclass
class BeamDesign:
    """Beamformers of one scheme for one channel set (decoding order)."""

    scheme: str
    status: Status
    order: np.ndarray
    W: list = field(default_factory=list)
    w: np.ndarray = None
    lam: dict = field(default_factory=dict)
    total_power: float = np.nan
    objective: float = np.nan
    rank_ratio: np.ndarray = None
    iterations: int = 0
    solve_ms: float = 0.0
    rank_flag: bool = False
    recovered: bool = False
    note: str = ""

    @property
    def solved(self):
        return self.status == Status.OPTIMAL

    @property
    def max_rank_ratio(self):
        return float(np.max(self.rank_ratio)) if self.rank_ratio is not None else np.nan


def _decoded_params(s, h_hat, order):
    h_hat = np.atleast_2d(np.asarray(h_hat, dtype=np.complex128))
    order = np.asarray(order, dtype=int)
    if s.K == 0 or h_hat.shape != (s.K, s.M) or sorted(order) != list(range(s.K)):
        raise ValueError(f"expected {s.K} channels of length {s.M} and a permutation order")
    h = h_hat[order]
    eps = np.asarray(s.epsilon)[order]
    gam = np.asarray(s.gamma_min)[order]
    sig = np.asarray(s.noise_var)[order]
    return h, eps, gam, sig


def _power_problem(h, eps, gam, sig, bases=None):
    """SDP for channels/targets already in decoding order.

    With ``bases`` (one matrix ``B_k`` with orthonormal rows per user) the
    covariances are restricted to ``W_k = B_k^H X_k B_k``; a single row gives
    a power-allocation problem along a fixed direction.

    Each variable is scaled by the power that meets its target on its own
    nominal channel, and the last row/column of every SINR block by
    ``1/|h_l|``.  Both are congruences, so the feasible set is unchanged; they
    keep the Newton system well conditioned when path losses differ by
    orders of magnitude.
    """
    K, M = h.shape
    full = bases is None
    if full:
        bases = [np.eye(M)] * K

    def mapped(m, X):
        # identical maps stay one object so the solver can share work
        return X if full else bases[m] @ X
    norms = np.linalg.norm(h, axis=1)
    inv = np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 1.0)
    b = ProblemBuilder()
    W = [b.matrix(B.shape[0], f"W{k}", trace_cost=1.0, scale=gam[k] * sig[k] * inv[k] ** 2)
         for k, B in enumerate(bases)]
    for k, B in enumerate(bases):
        b.block(B.shape[0], congruence_terms=[(W[k], 1.0, np.eye(B.shape[0]))],
                label=f"W{k}>=0")
    select = np.hstack([np.eye(M), np.zeros((M, 1))])
    for k in range(K):
        for l in range(k, K):
            if eps[l] > 0:
                T = np.hstack([np.eye(M), inv[l] * h[l][:, None]])
                D = np.eye(M + 1)
                D[M, M] = -(eps[l] * inv[l]) ** 2
                F0 = np.zeros((M + 1, M + 1))
                F0[M, M] = -sig[l] * inv[l] ** 2
                lam = b.scalar(f"lambda{k}{l}")
                sel = select
                label = f"C{k}{l}"
            else:
                # zero-radius ball: the LMI collapses to h^H phi_k h >= sigma^2
                T = inv[l] * h[l][:, None]
                F0 = [[-sig[l] * inv[l] ** 2]]
                lam = None
                sel = None
                label = f"C{k}{l}"
            maps = {m: mapped(m, T) for m in range(k, K)}
            terms = [(W[k], 1.0 / gam[k], maps[k])]
            terms += [(W[m], -1.0, maps[m]) for m in range(k + 1, K)]
            if sel is not None:
                terms += [(W[m], -1.0, mapped(m, sel)) for m in range(k)]
            if lam is None:
                b.block(1, const=F0, congruence_terms=terms, label=label)
            else:
                b.block(M + 1, const=F0, scalar_terms=[(lam, D)], congruence_terms=terms,
                        label=label)
                b.block(1, scalar_terms=[(lam, np.ones((1, 1)))], label=f"lambda{k}{l}>=0")
    return b.build()


def quick_infeasibility(h, eps, gam):
    """Reason string when a necessary condition for robust feasibility fails.

    Arguments are in decoding order.  Two conditions are checked:

    * ``|h_l| > eps_l``: otherwise the ball contains the zero channel;
    * ``|h_k| + eps_k > sqrt(gam_j * gam_k) * eps_k`` for every ``j < k``.
      User ``k`` must decode ``j`` over its own signal while its own signal
      beats the residual of ``j``; an error aligned with ``w_j`` makes both
      hold only if ``(|h_k| + eps_k)^2 > gam_j * gam_k * eps_k^2``.

    Returns ``None`` when both hold (the SDP must then decide).
    """
    norms = np.linalg.norm(h, axis=1)
    for l in range(len(norms)):
        if eps[l] > 0 and norms[l] <= eps[l]:
            return f"|h_{l}| = {norms[l]:.4g} inside its error ball"
    for k in range(1, len(norms)):
        need = np.sqrt(np.max(gam[:k]) * gam[k]) * eps[k]
        if norms[k] + eps[k] <= need:
            return f"|h_{k}| + eps = {norms[k] + eps[k]:.4g} <= {need:.4g}"
    return None


def build_robust_sdp(s, h_hat, order):
    """Worst-case SINR constrained power minimization for a channel estimate.

    ``h_hat`` rows follow the original user indexing; ``order`` is the
    decoding order (see :func:`noma_robust.channel.order_users`).
    """
    return _power_problem(*_decoded_params(s, h_hat, order))


def build_nonrobust_sdp(s, h_hat, order):
    """Same design treating the estimates as exact (zero error radius)."""
    return build_robust_sdp(replace(s, epsilon=0.0), h_hat, order)


def oma_targets(gamma_min, K):
    """SINR target in a 1/K time slot delivering the same rate."""
    return (1.0 + np.asarray(gamma_min, dtype=float)) ** K - 1.0


def build_oma_design(s, h_hat):
    """One single-user robust problem per user with rate-scaled targets."""
    h_hat = np.atleast_2d(np.asarray(h_hat, dtype=np.complex128))
    targets = oma_targets(s.gamma_min, s.K)
    return [_power_problem(h_hat[k:k + 1], np.array([s.epsilon[k]]), targets[k:k + 1],
                           np.array([s.noise_var[k]])) for k in range(s.K)]


def extract_beamformers(W, tol_rank=DEFAULT_TOL_RANK):
    """Principal-eigenvector beamformers ``sqrt(l1) u1`` and ratios ``l2 / l1``.

    Raises :class:`RankOneViolation` (carrying the beamformers) when a ratio
    exceeds ``tol_rank``.
    """
    w, ratios = [], []
    for Wk in W:
        Wk = 0.5 * (Wk + Wk.conj().T)
        vals = np.linalg.eigvalsh(Wk)
        l1, u = principal_eigpair(Wk)
        w.append(np.sqrt(max(l1, 0.0)) * u)
        second = vals[-2] if vals.size > 1 else 0.0
        ratios.append(max(second, 0.0) / l1 if l1 > 0 else 0.0)
    w = np.array(w)
    ratios = np.array(ratios)
    worst = float(ratios.max())
    if worst > tol_rank:
        raise RankOneViolation(worst, w, ratios)
    return w, ratios


PENALTY_WEIGHTS = (1.0, 4.0, 16.0, 64.0)
PENALTY_ROUNDS = 3


def _allocate(params, directions, opts):
    """Minimum powers along fixed unit directions, or ``None`` if infeasible."""
    bases = [u[None, :].conj() for u in directions]
    problem = _power_problem(*params, bases=bases)
    sol = solve(problem, opts)
    if sol.status != Status.OPTIMAL:
        return None
    p = np.array([max(problem.matrix_value(sol.x, k)[0, 0].real, 0.0)
                  for k in range(len(bases))])
    return np.sqrt(p)[:, None] * np.asarray(directions)


def _with_cost(problem, costs):
    """Copy of ``problem`` minimizing ``sum_k Re tr(costs[k] W_k)``."""
    c = np.zeros_like(problem.c)
    for mv, C in zip(problem.matrix_vars, costs):
        c[mv.slice] = mv.scale * mv.adjoint(C)
    return SdpProblem(c, problem.blocks, problem.matrix_vars, problem.var_index)


def recover_rank_one(params, W, opts=None):
    """Feasible rank-one beamformers near a higher-rank relaxation optimum.

    First allocates power along the principal eigenvectors of ``W``.  If
    that is infeasible, the trace objective is augmented with the
    linearized rank penalty ``rho * (tr W_k - u_k^H W_k u_k)`` around the
    current principal directions ``u_k`` for increasing ``rho``, retrying the
    allocation after every solve.  Every returned beamformer set satisfies
    the constraints exactly (it is a solution of the allocation problem).

    Returns ``(w, solves)``; ``w`` is ``None`` when nothing feasible is found.
    """
    directions = [principal_eigpair(Wk)[1] for Wk in W]
    w = _allocate(params, directions, opts)
    solves = 1
    if w is not None:
        return w, solves
    problem = _power_problem(*params)
    M = W[0].shape[0]
    for rho in PENALTY_WEIGHTS:
        for _ in range(PENALTY_ROUNDS):
            costs = [(1.0 + rho) * np.eye(M) - rho * np.outer(u, u.conj())
                     for u in directions]
            prob = _with_cost(problem, costs)
            sol = solve(prob, opts)
            solves += 1
            if sol.status != Status.OPTIMAL:
                return None, solves
            directions = [principal_eigpair(prob.matrix_value(sol.x, k))[1]
                          for k in range(len(W))]
            w = _allocate(params, directions, opts)
            solves += 1
            if w is not None:
                return w, solves
    return None, solves


def _finish(problem, sol, scheme, order, K, tol_rank, elapsed, params=None, opts=None):
    d = BeamDesign(scheme=scheme, status=sol.status, order=np.asarray(order),
                   iterations=sol.iterations, solve_ms=elapsed)
    if sol.status != Status.OPTIMAL:
        return d
    d.W = [problem.matrix_value(sol.x, g) for g in range(K)]
    d.lam = {name: float(sol.x[j]) for name, j in problem.var_index.items()
             if name.startswith("lambda")}
    d.objective = float(sum(np.trace(Wk).real for Wk in d.W))
    try:
        d.w, d.rank_ratio = extract_beamformers(d.W, tol_rank)
    except RankOneViolation as exc:
        d.w, d.rank_ratio, d.rank_flag = exc.w, exc.ratios, True
        if params is not None:
            w, solves = recover_rank_one(params, d.W, opts)
            d.note = (f"rank ratio {exc.ratio:.3g}; rank-one recovery "
                      f"{'succeeded' if w is not None else 'failed'} after {solves} solves")
            if w is not None:
                d.w, d.recovered = w, True
    d.total_power = float(np.sum(np.abs(d.w) ** 2))
    return d


def design(s, channels, scheme="robust", opts=None, tol_rank=DEFAULT_TOL_RANK, prefilter=True,
           recover=True):
    """Solve one scheme ("robust", "nonrobust" or "oma") for a channel set.

    With ``prefilter`` the robust scheme is first screened by
    :func:`quick_infeasibility`, skipping the SDP when it cannot be feasible.
    When the relaxation optimum is not rank one the design stays flagged
    (``rank_flag``); with ``recover`` its beamformers come from
    :func:`recover_rank_one` if that succeeds, and from the principal
    eigenvectors otherwise.
    """
    order = channels.order
    t0 = time.perf_counter()
    if scheme in ("robust", "nonrobust"):
        s_used = s if scheme == "robust" else replace(s, epsilon=0.0)
        params = _decoded_params(s_used, channels.h_hat, order)
        if scheme == "robust" and prefilter:
            reason = quick_infeasibility(*params[:3])
            if reason is not None:
                return BeamDesign(scheme=scheme, status=Status.INFEASIBLE, order=np.asarray(order),
                                  solve_ms=1e3 * (time.perf_counter() - t0), note=reason)
        problem = _power_problem(*params)
        sol = solve(problem, opts)
        d = _finish(problem, sol, scheme, order, s.K, tol_rank, 0.0,
                    params if recover else None, opts)
        d.solve_ms = 1e3 * (time.perf_counter() - t0)
        return d
    if scheme == "oma":
        return _design_oma(s, channels, opts, tol_rank, t0, prefilter)
    raise ValueError(f"unknown scheme {scheme!r}")


def _design_oma(s, channels, opts, tol_rank, t0, prefilter):
    order = channels.order
    if prefilter:
        norms = np.linalg.norm(channels.h_hat, axis=1)
        bad = [k for k in range(s.K) if s.epsilon[k] > 0 and norms[k] <= s.epsilon[k]]
        if bad:
            return BeamDesign(scheme="oma", status=Status.INFEASIBLE, order=order,
                              solve_ms=1e3 * (time.perf_counter() - t0),
                              note=f"|h_{bad[0]}| inside its error ball")
    parts = []
    for problem in build_oma_design(s, channels.h_hat):
        sol = solve(problem, opts)
        parts.append(_finish(problem, sol, "oma", [0], 1, tol_rank, 0.0))
    d = BeamDesign(scheme="oma", status=Status.OPTIMAL, order=order,
                   iterations=sum(p.iterations for p in parts))
    bad = [p.status for p in parts if p.status != Status.OPTIMAL]
    if bad:
        d.status = bad[0]
    else:
        # store per-user beamformers in decoding order like the NOMA designs
        d.W = [parts[k].W[0] for k in order]
        d.w = np.array([parts[k].w[0] for k in order])
        d.rank_ratio = np.array([parts[k].rank_ratio[0] for k in order])
        d.rank_flag = any(p.rank_flag for p in parts)
        d.objective = float(np.mean([p.objective for p in parts]))
        d.total_power = float(np.mean([p.total_power for p in parts]))
    d.solve_ms = 1e3 * (time.perf_counter() - t0)
    return d
