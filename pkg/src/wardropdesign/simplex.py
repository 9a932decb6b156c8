"""Dense two-phase tableau simplex with a Bland anti-cycling fallback.

Solves  min c.x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0.
Meant for small dense programs where basic (vertex) solutions are wanted.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, UnboundedError

TOL = 1e-11


@dataclass
class LPResult:
    x: np.ndarray
    value: float
    basis: list
    pivots: int


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]
    basis[row] = col


def _run(T, basis, allowed, tol, max_pivots, stall=50):
    """Simplex on tableau ``T`` whose last row holds reduced costs and -objective.

    Entering columns follow the most negative reduced cost; after ``stall``
    consecutive degenerate pivots Bland's smallest-index rule takes over until
    the objective moves again, which rules out cycling.
    """
    m = T.shape[0] - 1
    allowed = np.asarray(list(allowed))
    pivots = 0
    degenerate = 0
    while True:
        red = T[-1, allowed]
        neg = np.flatnonzero(red < -tol)
        if neg.size == 0:
            return pivots
        bland = degenerate >= stall
        enter = int(allowed[neg[0]] if bland else allowed[neg[np.argmin(red[neg])]])
        col = T[:m, enter]
        rows = np.flatnonzero(col > tol)
        if rows.size == 0:
            raise UnboundedError(f"objective unbounded along column {enter}")
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol * max(1.0, abs(best))]
        leave = min(ties, key=lambda i: basis[i]) if bland else ties[np.argmax(col[ties])]
        _pivot(T, basis, leave, enter)
        np.maximum(T[:m, -1], 0.0, out=T[:m, -1], where=T[:m, -1] > -tol)
        degenerate = degenerate + 1 if best <= tol else 0
        pivots += 1
        if pivots > max_pivots:
            raise RuntimeError("simplex pivot limit exceeded")


def linprog_bland(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, tol=TOL, max_pivots=100_000) -> LPResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    blocks, rhs = [], []
    n_ub = 0
    if A_ub is not None and len(A_ub):
        A_ub = np.asarray(A_ub, dtype=float)
        n_ub = A_ub.shape[0]
        blocks.append(np.hstack([A_ub, np.eye(n_ub)]))
        rhs.append(np.asarray(b_ub, dtype=float))
    if A_eq is not None and len(A_eq):
        A_eq = np.asarray(A_eq, dtype=float)
        blocks.append(np.hstack([A_eq, np.zeros((A_eq.shape[0], n_ub))]))
        rhs.append(np.asarray(b_eq, dtype=float))
    A = np.vstack(blocks)
    b = np.concatenate(rhs)
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    m, N = A.shape

    # phase 1: artificial basis, minimize the sum of artificials
    T = np.zeros((m + 1, N + m + 1))
    T[:m, :N] = A
    T[:m, N:N + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :N] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(N, N + m))
    pivots = _run(T, basis, range(N + m), tol, max_pivots)
    residual = -T[-1, -1]
    if residual > 1e-9:
        farkas = 1.0 - T[-1, N:N + m]
        farkas[neg] *= -1
        raise InfeasibleError(
            f"no feasible point; phase-1 residual {residual:.3e}",
            {"phase1_residual": float(residual), "farkas": farkas.tolist()},
        )
    # pivot remaining artificials out; rows that cannot be pivoted are redundant
    keep = []
    for i in range(m):
        if basis[i] >= N:
            cand = np.flatnonzero(np.abs(T[i, :N]) > tol)
            if cand.size:
                _pivot(T, basis, i, int(cand[0]))
                pivots += 1
            else:
                continue
        keep.append(i)
    T2 = np.zeros((len(keep) + 1, N + 1))
    T2[:-1, :N] = T[keep, :N]
    T2[:-1, -1] = T[keep, -1]
    basis = [basis[i] for i in keep]
    cf = np.concatenate([c, np.zeros(N - n)])
    cb = cf[basis]
    T2[-1, :N] = cf - cb @ T2[:-1, :N]
    T2[-1, -1] = -cb @ T2[:-1, -1]
    pivots += _run(T2, basis, range(N), tol, max_pivots)
    x = np.zeros(N)
    x[basis] = T2[:-1, -1]
    x = np.where(np.abs(x) < 1e-15, 0.0, x)
    return LPResult(x[:n], float(c @ x[:n]), basis, pivots)
