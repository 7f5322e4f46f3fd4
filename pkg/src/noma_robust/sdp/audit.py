"""Solver-independent residuals recomputed from the dense LMI coefficients."""

import numpy as np

from .solver import Status


def _dense_eval(lmi, x):
    out = []
    for F0, coeffs in lmi:
        F = F0.copy()
        for i, Fi in coeffs.items():
            F = F + x[i] * Fi
        out.append(0.5 * (F + F.conj().T))
    return out


def _dense_adjoint(lmi, Z, n):
    g = np.zeros(n)
    for (_, coeffs), Zb in zip(lmi, Z):
        for i, Fi in coeffs.items():
            g[i] += np.vdot(Zb, Fi).real
    return g


def _neg_part(mats):
    worst = 0.0
    for M in mats:
        worst = max(worst, -np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0])
    return worst


def residuals(problem, sol):
    """Return ``(primal_infeas, dual_infeas, gap)`` for a solution.

    For a solution reported optimal:

    * ``primal_infeas`` is the most negative eigenvalue of ``F(x)`` (0 when
      PSD), relative to ``1 + max |eig F(x)|``;
    * ``dual_infeas`` is ``|A*(Z) - c| / (1 + |c|)`` plus the negative part
      of ``Z``;
    * ``gap`` is ``|c^T x + tr(F0 Z)|`` relative to the larger objective.

    For an ``infeasible`` status the dual blocks are read as a Farkas ray,
    normalized so that ``tr(F0 Z) = -1``: ``primal_infeas`` is then
    ``|A*(Z)|`` (0 for an exact certificate), ``dual_infeas`` the negative
    part of the normalized ray and ``gap`` is NaN.
    """
    lmi = problem.lmi_blocks()
    n = problem.num_vars
    c = problem.c
    Z = sol.dual_blocks
    tr_f0z = float(sum(np.vdot(Zb, F0).real for (F0, _), Zb in zip(lmi, Z)))
    if sol.status == Status.INFEASIBLE:
        scale = -tr_f0z
        if not scale > 0:
            return np.inf, np.inf, np.nan
        Zn = [Zb / scale for Zb in Z]
        return (float(np.linalg.norm(_dense_adjoint(lmi, Zn, n))),
                float(_neg_part(Zn)), np.nan)
    F = _dense_eval(lmi, sol.x)
    size = max(np.abs(np.linalg.eigvalsh(Fb)).max() for Fb in F)
    primal = _neg_part(F) / (1.0 + size)
    dual = (np.linalg.norm(_dense_adjoint(lmi, Z, n) - c) / (1.0 + np.linalg.norm(c))
            + _neg_part(Z))
    pobj = float(c @ sol.x)
    gap = abs(pobj + tr_f0z) / max(abs(pobj), abs(tr_f0z), 1e-12)
    return float(primal), float(dual), float(gap)
