"""Empirical full-implementation certificates and equilibrium-multiplicity probing.

A designed structure fully implements a BCWE when every Bayesian Wardrop
equilibrium it induces yields the designed outcome (strictly convex
potentials) or at least the designed expected social cost (convex
potentials).  Both are checked here by multi-start potential descent; the
probe additionally searches for extra equilibria with damped best response
and support-restricted Newton steps, which also works without convexity.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.optimize import root

from .auxiliary import build_auxiliary
from .bcwe import verify_bcwe
from .bwe import interim_report, profile_from_flows, project_outcome, total_cost_report, verify_eps_bwe
from .descent import SUPPORT_THRESHOLD, DescentConfig, minimize_potential
from .design import (
    build_direct_structure,
    epsilon_bound,
    estimate_modulus,
    obedient_profile,
    rational_approximation,
)
from .errors import ConvergenceError, DomainError, UnsupportedModelError
from .model import (
    CongestionGame,
    ConvexityClass,
    FiniteOutcome,
    classify_potential,
    expected_social_cost,
    outcome_distance,
)

log = logging.getLogger(__name__)

OBEDIENCE_TOL = 1e-9

UNIQUE_OUTCOME = "unique_outcome"
UNIQUE_SOCIAL_COST = "unique_social_cost"
PARTIAL_ONLY = "partial_only"
SOLVER_LIMITED = "solver_limited"


def derive_seeds(master, n):
    """``n`` independent integer seeds derived from one master seed."""
    return [int(c.generate_state(1)[0]) for c in np.random.SeedSequence(master).spawn(n)]


@dataclass
class FullCheckConfig:
    eta: float = 1e-3
    runs: int = 8
    seed: int = 0
    tol_cost: float = 1e-6
    tol_outcome: float = 1e-4
    descent: DescentConfig = field(default_factory=DescentConfig)
    modulus_samples: int = 1024

    def __post_init__(self):
        if self.runs < 1:
            raise DomainError("at least one run is required")


@dataclass
class RunRecord:
    seed: int
    converged: bool
    expected_social_cost: float | None
    outcome_distance: float | None
    duality_gap: float | None
    iterations: int
    eps: float | None


@dataclass
class FullImplementationCertificate:
    convexity: str
    K: int
    eta_achieved: float
    obedience_eps: float
    epsilon_bound: float | None
    bcwe_social_cost: float
    designed_social_cost: float
    reference: str
    runs: list
    verdict: str
    state_residuals: dict
    cost_gap: float
    max_outcome_distance: float
    sc_modulus: float

    def to_dict(self):
        return asdict(self)


def _state_costs(game, outcome):
    return {
        s: sum(p * float(game.social_costs(f.entries, s)) for f, p in atoms)
        for s, atoms in outcome.per_state.items()
    }


def full_check(game: CongestionGame, bcwe: FiniteOutcome, config: FullCheckConfig | None = None) -> FullImplementationCertificate:
    config = config or FullCheckConfig()
    convexity = classify_potential(game)
    if convexity is ConvexityClass.NON_CONVEX:
        raise UnsupportedModelError("full implementation is only certified for convex potentials")
    ob = verify_bcwe(game, bcwe)
    if not ob.certified(1e-8):
        raise DomainError(f"input outcome is not a BCWE (violation {ob.violation:.3e})")

    approx = rational_approximation(bcwe.support_flows(), config.eta)
    structure = build_direct_structure(bcwe, approx, game)
    aux = build_auxiliary(game, structure)
    obedient = obedient_profile(structure, game)
    rep = verify_eps_bwe(game, structure, obedient, aux=aux)
    designed_outcome = project_outcome(structure, obedient)
    designed_cost = total_cost_report(game, structure, obedient, aux=aux).total_cost
    lip = estimate_modulus(game, config.modulus_samples, config.seed)
    try:
        bound = epsilon_bound(approx, bcwe, lip)
    except DomainError:
        bound = None
    log.info("designed K=%d, obedience eps %.3e", approx.K, rep.eps)

    seeds = derive_seeds(config.seed, config.runs)

    def run(seed):
        cfg = replace(config.descent, seed=seed)
        try:
            res = minimize_potential(aux, cfg)
        except ConvergenceError as exc:
            log.warning("run with seed %d stopped at gap %.3e", seed, exc.best_gap)
            return seed, None, exc.iterations
        return seed, res, res.iterations

    with ThreadPoolExecutor() as pool:
        results = sorted(pool.map(run, seeds), key=lambda r: r[0])

    outcomes, records = [], []
    for seed, res, iters in results:
        if res is None:
            records.append(RunRecord(seed, False, None, None, None, iters, None))
            outcomes.append(None)
            continue
        prof = profile_from_flows(aux, res.flows)
        out = project_outcome(structure, prof)
        cost = total_cost_report(game, structure, prof, aux=aux).total_cost
        outcomes.append(out)
        records.append(RunRecord(seed, True, cost, None, res.duality_gap, iters, interim_report(aux, res.flows).eps))

    done = [i for i, r in enumerate(records) if r.converged]
    if rep.eps <= OBEDIENCE_TOL or not done:
        reference, ref_out, ref_cost = "obedient", designed_outcome, designed_cost
    else:
        first = done[0]
        reference, ref_out, ref_cost = f"run:{records[first].seed}", outcomes[first], records[first].expected_social_cost
    for i in done:
        records[i].outcome_distance = outcome_distance(outcomes[i], ref_out)

    if len(done) < len(records):
        verdict = SOLVER_LIMITED
    elif convexity is ConvexityClass.STRICTLY_CONVEX_ON_SIMPLEX and all(
        records[i].outcome_distance <= config.tol_outcome for i in done
    ):
        verdict = UNIQUE_OUTCOME
    elif all(abs(records[i].expected_social_cost - ref_cost) <= config.tol_cost for i in done):
        verdict = UNIQUE_SOCIAL_COST
    else:
        verdict = PARTIAL_ONLY

    bcwe_cost = expected_social_cost(game, bcwe)
    target = _state_costs(game, bcwe)
    designed_states = _state_costs(game, designed_outcome)
    residuals = {}
    for s in game.states:
        worst = max((abs(_state_costs(game, outcomes[i])[s] - target[s]) for i in done), default=None)
        residuals[s] = {"designed": abs(designed_states[s] - target[s]), "worst_run": worst}
    cost_gap = max((abs(records[i].expected_social_cost - bcwe_cost) for i in done), default=0.0)
    max_dist = max((outcome_distance(outcomes[i], bcwe) for i in done), default=0.0)
    sc_lip = estimate_modulus(game, config.modulus_samples, config.seed, fn=game.social_costs)

    return FullImplementationCertificate(
        convexity.value, approx.K, approx.eta_achieved, rep.eps, bound, bcwe_cost, designed_cost,
        reference, records, verdict, residuals, cost_gap, max_dist, sc_lip.L,
    )


@dataclass
class ProbeConfig:
    runs: int = 32
    seed: int = 0
    steps: int = 10_000
    damping: float = 0.5
    eps_tol: float = 1e-6
    dedup_tol: float = 1e-4
    patience: int = 500


@dataclass
class ProbeCandidate:
    profile: object
    outcome: FiniteOutcome
    eps: float
    expected_social_cost: float
    method: str


def _best_response_run(aux, Y, cfg):
    act = aux.active
    prob = np.where(act, aux.type_prob, 1.0)[:, None]
    rows = np.arange(aux.n_blocks)
    best, since = np.inf, 0
    for _ in range(cfg.steps):
        C = aux.block_costs(Y) / prob
        cmin = C.min(axis=1)
        slack = np.where(Y > SUPPORT_THRESHOLD, C, -np.inf).max(axis=1) - cmin
        # blocks already best-responding stay put
        moving = act & (slack > cfg.eps_tol)
        if not np.any(moving):
            return Y, True
        # cycling runs are abandoned once epsilon stops improving
        eps = float(slack[act].max())
        if eps < best * (1 - 1e-3):
            best, since = eps, 0
        else:
            since += 1
            if since >= cfg.patience:
                break
        target = np.zeros_like(Y)
        target[rows, np.argmin(C, axis=1)] = aux.block_mass
        Y = np.where(moving[:, None], (1 - cfg.damping) * Y + cfg.damping * target, Y)
    return Y, interim_report(aux, Y).eps <= cfg.eps_tol


def _newton(aux, Y0, cfg):
    """Solve cost equalization on the support of ``Y0`` block by block jointly."""
    sup = (Y0 > SUPPORT_THRESHOLD) & aux.active[:, None]
    idx = np.argwhere(sup)
    if len(idx) == 0:
        return None
    blocks = np.unique(idx[:, 0])

    def assemble(x):
        Y = np.where(aux.active[:, None], 0.0, Y0)
        Y[sup] = x
        return Y

    def residual(x):
        Y = assemble(x)
        C = aux.block_costs(Y) / np.where(aux.active, aux.type_prob, 1.0)[:, None]
        out = []
        for b in blocks:
            cols = np.flatnonzero(sup[b])
            out.extend(C[b, cols[1:]] - C[b, cols[0]])
            out.append(Y[b, cols].sum() - aux.block_mass[b])
        return np.array(out)

    sol = root(residual, Y0[sup], method="hybr")
    if not sol.success or np.any(sol.x < -1e-12) or np.max(np.abs(residual(sol.x))) > 1e-10:
        return None
    Y = assemble(np.maximum(sol.x, 0.0))
    return Y if interim_report(aux, Y).eps <= cfg.eps_tol else None


def adversarial_probe(game: CongestionGame, structure, config: ProbeConfig | None = None) -> list:
    """Distinct approximate BWE reachable from random starts, in discovery order."""
    cfg = config or ProbeConfig()
    aux = build_auxiliary(game, structure)
    found = []

    def add(Y, method):
        prof = profile_from_flows(aux, Y)
        out = project_outcome(structure, prof)
        if any(outcome_distance(out, c.outcome) <= cfg.dedup_tol for c in found):
            return
        rep = verify_eps_bwe(game, structure, prof, aux=aux)
        found.append(ProbeCandidate(prof, out, rep.eps, aux.expected_social_cost(Y), method))

    for seed in derive_seeds(cfg.seed, cfg.runs):
        start = aux.random_flows(np.random.default_rng(seed))
        start[~aux.active] = aux.uniform_flows()[~aux.active]
        Y, ok = _best_response_run(aux, start.copy(), cfg)
        if ok:
            add(Y, "best_response")
        for origin, Y0 in (("start", start), ("best_response", Y)):
            Z = _newton(aux, Y0, cfg)
            if Z is not None:
                add(Z, f"newton_from_{origin}")
    return found
