"""Minimization of potentials over products of scaled simplices.

All step rules share one stopping certificate, the Frank-Wolfe duality gap
<C(y), y - s> where s puts each block's mass on its cheapest action, together
with the largest cost slack of a supported action.

``projected`` (default)
    Projected gradient with Barzilai-Borwein step lengths and a nonmonotone
    Armijo search, vectorized over all blocks.
``pairwise``
    Block by block, move mass from the costliest supported action to the
    cheapest one with an exact line search on the potential.
``open_loop``
    Classical Frank-Wolfe with step 2/(t+2) applied to all blocks at once;
    candidates that increase the potential are rejected.

For the first two rules, once the supports have been stable for
``polish_every`` iterations (and periodically regardless), an active-set
Newton method solves the first-order conditions: equal costs on each support
and fixed block mass.  The polished point is kept only when it lowers both the
potential and the gap; otherwise the base rule carries on.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, LinAlgWarning, lstsq, solve
from scipy.optimize import brentq

from .auxiliary import AuxiliaryGame
from .errors import ConvergenceError, DomainError

log = logging.getLogger(__name__)

SUPPORT_THRESHOLD = 1e-9
STEP_RULES = ("projected", "pairwise", "open_loop")
NONMONOTONE_MEMORY = 10


@dataclass
class DescentConfig:
    target_gap: float = 1e-8
    max_iters: int = 100_000
    seed: int | None = None
    step_rule: str = "projected"
    polish_every: int = 5

    def __post_init__(self):
        if self.target_gap <= 0:
            raise DomainError("target_gap must be positive")
        if self.max_iters < 1:
            raise DomainError("max_iters must be at least 1")
        if self.step_rule not in STEP_RULES:
            raise DomainError(f"unknown step rule {self.step_rule!r}")


@dataclass
class DescentResult:
    flows: np.ndarray
    duality_gap: float
    wardrop_gap: float
    iterations: int
    potentials: list = field(default_factory=list)


def gaps(aux: AuxiliaryGame, Y, C=None):
    """(duality gap, max slack over supported actions) over active blocks."""
    if C is None:
        C = aux.block_costs(Y)
    act = aux.active
    if not np.any(act):
        return 0.0, 0.0
    Ca, Ya = C[act], Y[act]
    cmin = Ca.min(axis=1, keepdims=True)
    slack = Ca - cmin
    dual = float(np.sum(Ya * slack))
    sup = Ya > SUPPORT_THRESHOLD
    wg = float(np.max(np.where(sup, slack, 0.0)))
    return dual, wg


def initial_flows(aux: AuxiliaryGame, seed=None):
    """Corner of the first action when ``seed`` is None, else a random interior point."""
    if seed is None:
        Y = aux.corner_flows()
    else:
        Y = aux.random_flows(np.random.default_rng(seed))
    Y[~aux.active] = aux.uniform_flows()[~aux.active]
    return Y


def minimize_potential(aux: AuxiliaryGame, config: DescentConfig | None = None, start=None) -> DescentResult:
    config = config or DescentConfig()
    Y = initial_flows(aux, config.seed) if start is None else np.array(start, dtype=float)
    if Y.shape != (aux.n_blocks, aux.n_actions):
        raise DomainError(f"start has shape {Y.shape}, expected {(aux.n_blocks, aux.n_actions)}")
    Y[~aux.active] = aux.uniform_flows()[~aux.active]
    step = {
        "projected": _ProjectedGradient(aux),
        "pairwise": _pairwise_sweep,
        "open_loop": _open_loop_step,
    }[config.step_rule]
    potentials = [aux.potential(Y)]
    best = np.inf
    polish = config.step_rule != "open_loop" and config.polish_every > 0
    support, stable, tried = None, 0, None
    for it in range(config.max_iters + 1):
        dual, wg = gaps(aux, Y)
        if polish and max(dual, wg) > config.target_gap:
            current = Y > SUPPORT_THRESHOLD * aux.block_mass[:, None]
            stable = stable + 1 if support is not None and np.array_equal(current, support) else 0
            support = current
            due = stable >= config.polish_every and (tried is None or not np.array_equal(tried, current))
            if due or (it + 1) % (8 * config.polish_every) == 0:
                tried = current
                Z = _newton_polish(aux, Y, config.target_gap)
                if Z is not None:
                    phi = aux.potential(Z)
                    zd, zw = gaps(aux, Z)
                    if phi <= potentials[-1] + 1e-14 * max(1.0, abs(phi)) and max(zd, zw) < max(dual, wg):
                        Y, dual, wg = Z, zd, zw
                        potentials[-1] = phi
                        tried = None
        best = min(best, max(dual, wg))
        if dual <= config.target_gap and wg <= config.target_gap:
            log.debug("converged after %d iterations: dual %.3e, wardrop %.3e", it, dual, wg)
            return DescentResult(Y, dual, wg, it, potentials)
        if it == config.max_iters:
            break
        Y = step(aux, Y, it, potentials)
        potentials.append(aux.potential(Y))
    raise ConvergenceError("iteration cap reached", best, config.max_iters)


def _pairwise_sweep(aux, Y, it, potentials):
    Y = Y.copy()
    F = aux.total_flows(Y)
    game = aux.game
    for b in np.flatnonzero(aux.active):
        J = aux.block_profiles[b]
        w = aux.weights[J]
        st = aux.profile_states[J]
        groups = [(s, np.flatnonzero(st == s)) for s in np.unique(st)]
        FJ = F[J]
        c = (w[:, None] * aux.profile_costs(FJ, groups=groups)).sum(axis=0)
        sup = np.flatnonzero(Y[b] > 0)
        lo = int(np.argmin(c))
        hi = int(sup[np.argmax(c[sup])])
        if c[hi] <= c[lo]:
            continue
        d = np.zeros(aux.n_actions)
        d[lo], d[hi] = 1.0, -1.0

        def slope(t):
            costs = np.empty(len(J))
            G = FJ + t * d
            for s, idx in groups:
                ac = game.action_costs(G[idx], int(s))
                costs[idx] = ac[:, lo] - ac[:, hi]
            return float(np.dot(w, costs))

        tmax = Y[b, hi]
        if slope(0.0) >= 0:
            continue
        if slope(tmax) <= 0:
            t = tmax
        else:
            t = brentq(slope, 0.0, tmax, xtol=1e-17, rtol=4 * np.finfo(float).eps, maxiter=200)
        Y[b, lo] += t
        Y[b, hi] = 0.0 if t == tmax else Y[b, hi] - t
        F[J] = FJ + t * d
    return Y


def project_rows(V, mass):
    """Euclidean projection of each row of ``V`` onto {y >= 0, sum y = mass}."""
    n = V.shape[1]
    U = -np.sort(-V, axis=1)
    css = np.cumsum(U, axis=1) - mass[:, None]
    ok = U - css / np.arange(1, n + 1) > 0
    rho = n - 1 - np.argmax(ok[:, ::-1], axis=1)
    theta = css[np.arange(len(V)), rho] / (rho + 1)
    return np.maximum(V - theta[:, None], 0.0)


class _ProjectedGradient:
    def __init__(self, aux):
        self.step_length = 1.0
        self.prev = None

    def __call__(self, aux, Y, it, potentials):
        act = aux.active
        # per-block metric: block curvature scales with the type probability
        w = np.where(act, aux.type_prob, 1.0)[:, None]
        G = aux.block_costs(Y) if self.prev is None else self.prev
        D = project_rows(Y - self.step_length * G / w, aux.block_mass) - Y
        D[~act] = 0.0
        ref = max(potentials[-NONMONOTONE_MEMORY:])
        slope = float(np.sum(G * D))
        t = 1.0
        while True:
            Z = Y + t * D
            if aux.potential(Z) <= ref + 1e-4 * t * slope or t < 1e-12:
                break
            t *= 0.5
        Z = project_rows(Z, aux.block_mass)
        Z[~act] = Y[~act]
        GZ = aux.block_costs(Z)
        sd, yd = Z - Y, GZ - G
        sy = float(np.sum(sd * yd))
        self.step_length = float(np.clip(np.sum(w * sd * sd) / sy, 1e-10, 1e10)) if sy > 0 else 1e3
        self.prev = GZ
        return Z


def _open_loop_step(aux, Y, it, potentials):
    phi = potentials[-1]
    C = aux.block_costs(Y)
    S = np.zeros_like(Y)
    S[np.arange(aux.n_blocks), np.argmin(C, axis=1)] = aux.block_mass
    S[~aux.active] = Y[~aux.active]
    gamma = 2.0 / (it + 2.0)
    cand = Y + gamma * (S - Y)
    return cand if aux.potential(cand) <= phi else Y


def _newton_polish(aux, Y, target, max_steps=8):
    """Primal active-set Newton on the first-order system.

    Newton steps solve "equal costs on the support, fixed block mass" with the
    support frozen; a step that would make a flow negative is cut at the
    boundary and the variable leaves the support.  Once the system is solved,
    cheaper unsupported actions enter the support and the loop continues.
    """
    Y = Y.copy()
    act = aux.active
    B, A = Y.shape
    sup = (Y > SUPPORT_THRESHOLD * aux.block_mass[:, None]) & act[:, None]
    Y[act] = np.where(sup[act], Y[act], 0.0)
    Y[act] *= (aux.block_mass[act] / Y[act].sum(axis=1))[:, None]
    tol = 1e-3 * target
    last_res = np.inf
    since_change = 0
    for _ in range(max_steps):
        idx = np.flatnonzero(sup.ravel())
        if idx.size == 0:
            return None
        blocks, col = np.unique(idx // A, return_inverse=True)
        n, m = idx.size, blocks.size
        Cfull = aux.block_costs(Y)
        C = Cfull.ravel()[idx]
        lam = np.bincount(col, weights=C) / np.bincount(col)
        r = C - lam[col]
        res = float(np.max(np.abs(r)))
        if res <= tol:
            lam_b = np.full(B, np.inf)
            lam_b[blocks] = lam
            enter = act[:, None] & ~sup & (Cfull < lam_b[:, None] - tol)
            if not np.any(enter):
                return Y
            sup |= enter
            last_res, since_change = np.inf, 0
            continue
        # wrong support or no quadratic convergence: leave it to the base rule
        if since_change >= 3 and res > 0.25 * last_res:
            return Y
        last_res = res
        since_change += 1
        J = aux.cost_jacobian(Y)[np.ix_(idx, idx)]
        J[np.diag_indices(n)] += 1e-12 * max(float(np.max(np.diag(J))), 1e-300)
        E = np.zeros((m, n))
        E[col, np.arange(n)] = 1.0
        KKT = np.block([[J, E.T], [E, np.zeros((m, m))]])
        rhs = np.concatenate([-r, np.zeros(m)])
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", LinAlgWarning)
                step = solve(KKT, rhs, assume_a="sym")[:n]
        except (LinAlgError, LinAlgWarning):
            step = lstsq(KKT, rhs, lapack_driver="gelsy")[0][:n]
        x = Y.ravel()[idx]
        flat = Y.ravel()
        stuck = (x <= 0) & (step < 0)
        moving = (x > 0) & (step < 0)
        alpha = 1.0
        if np.any(moving):
            alpha = min(1.0, float(np.min(x[moving] / -step[moving])))
        new = np.where(stuck, 0.0, x + alpha * step)
        if alpha < 1.0:
            ratio = np.where(moving, x / np.where(moving, -step, 1.0), np.inf)
            new[ratio <= alpha * (1 + 1e-12)] = 0.0
        flat[idx] = np.maximum(new, 0.0)
        Y = flat.reshape(B, A)
        Y[act] *= (aux.block_mass[act] / Y[act].sum(axis=1))[:, None]
        if alpha < 1.0 or np.any(stuck):
            sup = (Y > 0) & act[:, None]
            last_res, since_change = np.inf, 0
    return Y
