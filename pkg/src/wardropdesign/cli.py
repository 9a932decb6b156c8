"""Command-line entry point.

Every command prints a JSON run report on stdout.  Exit status is 0 when the
result is certified, 2 when a verification fails or a solver stops short of
its target, and 1 on usage or input errors.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import dataclass, field

from . import io
from .bcwe import optimize_bcwe, verify_bcwe
from .bwe import bwe_descent, project_outcome, total_cost_report, verify_eps_bwe, profile_from_flows
from .descent import DescentConfig
from .design import (
    build_direct_structure,
    epsilon_bound,
    estimate_modulus,
    obedient_profile,
    rational_approximation,
)
from .errors import (
    ConsistencyError,
    ConvergenceError,
    DomainError,
    ModelError,
    ResourceLimitError,
    UnsupportedModelError,
)
from .full import FullCheckConfig, UNIQUE_OUTCOME, UNIQUE_SOCIAL_COST, full_check
from .model import expected_social_cost
from .wardrop import average_wardrop_descent, verify_wardrop, wardrop_descent

EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2
LOG_LEVELS = {"quiet": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    pass


@dataclass
class RunReport:
    command: str
    inputs: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    seed: int | None = None
    status: str = "ok"
    wall_time: float = 0.0

    def to_dict(self):
        return {
            "command": self.command,
            "status": self.status,
            "seed": self.seed,
            "inputs": self.inputs,
            "tolerances": self.tolerances,
            "results": self.results,
            "wall_time": self.wall_time,
        }


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _parser():
    p = _Parser(prog="wardrop-design", description="Information design for nonatomic congestion games.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def cmd(name, help_):
        return sub.add_parser(name, help=help_)

    def descent_flags(q):
        q.add_argument("--gap", type=float, default=1e-8)
        q.add_argument("--max-iters", type=int, default=100_000)
        q.add_argument("--seed", type=int, default=None)

    q = cmd("wardrop", "complete-information equilibria, one per state")
    q.add_argument("--game", required=True)
    q.add_argument("--state", action="append", help="restrict to these states (repeatable)")
    q.add_argument("--average", action="store_true", help="solve the prior-averaged game instead")
    descent_flags(q)
    q.add_argument("--out")

    q = cmd("bcwe-opt", "optimize an objective over grid-supported BCWE")
    q.add_argument("--game", required=True)
    q.add_argument("--objective", default="social_cost",
                   help="social_cost, neg_social_cost, or a JSON file {state: [values on the grid]}")
    q.add_argument("--denominator", type=int, default=6)
    q.add_argument("--out")

    q = cmd("bcwe-verify", "check the obedience constraints of an outcome")
    q.add_argument("--game", required=True)
    q.add_argument("--outcome", required=True)
    q.add_argument("--tol", type=float, default=1e-8)

    q = cmd("design", "direct information structure implementing a BCWE")
    q.add_argument("--game", required=True)
    q.add_argument("--bcwe", required=True)
    q.add_argument("--eta", type=float, default=1e-3)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out")

    q = cmd("bwe-solve", "Bayesian Wardrop equilibrium of a game with a structure")
    q.add_argument("--game", required=True)
    q.add_argument("--structure", required=True)
    descent_flags(q)
    q.add_argument("--out")

    q = cmd("bwe-verify", "epsilon of an interim profile (obedient profile by default)")
    q.add_argument("--game", required=True)
    q.add_argument("--structure", required=True)
    q.add_argument("--profile")
    q.add_argument("--tol", type=float, default=1e-8)

    q = cmd("full-check", "multi-start full-implementation certificate")
    q.add_argument("--game", required=True)
    q.add_argument("--bcwe", required=True)
    q.add_argument("--eta", type=float, default=1e-3)
    q.add_argument("--runs", type=int, default=8)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--tol", type=float, default=1e-6, help="tolerance on expected social cost")
    q.add_argument("--gap", type=float, default=1e-8)
    q.add_argument("--max-iters", type=int, default=100_000)
    q.add_argument("--out")
    return p


def _load(report, name, path):
    doc, digest = io.load_json(path)
    report.inputs[name] = {"path": str(path), "sha256": digest}
    return doc


def _config(args):
    return DescentConfig(target_gap=args.gap, max_iters=args.max_iters, seed=args.seed)


def _flows(outcome):
    return io.serialize_outcome(outcome)["per_state"]


def _cmd_wardrop(args, rep):
    game = io.parse_game(_load(rep, "game", args.game))
    cfg = _config(args)
    rep.seed = args.seed
    rep.tolerances["target_gap"] = cfg.target_gap
    out, ok = {}, True
    if args.average:
        res = average_wardrop_descent(game, cfg)
        avg = game.average_game()
        gap = verify_wardrop(avg, res.flows[0], 0).gap
        out["average"] = {"flow": res.flows[0].tolist(), "wardrop_gap": gap, "iterations": res.iterations}
        ok = gap <= cfg.target_gap
    else:
        for s in args.state or game.states:
            res = wardrop_descent(game, s, cfg)
            gap = verify_wardrop(game, res.flows[0], s).gap
            out[s] = {
                "flow": res.flows[0].tolist(),
                "wardrop_gap": gap,
                "social_cost": float(game.social_costs(res.flows[0], s)),
                "iterations": res.iterations,
            }
            ok = ok and gap <= cfg.target_gap
    rep.results["equilibria"] = out
    if args.out:
        io.dump_json(out, args.out)
    return ok


def _cmd_bcwe_opt(args, rep):
    game = io.parse_game(_load(rep, "game", args.game))
    objective = args.objective
    if objective not in ("social_cost", "neg_social_cost"):
        objective = _load(rep, "objective", objective)
        if not isinstance(objective, dict):
            raise ModelError("SCHEMA_TYPE", "objective table must map states to value lists", args.objective)
    outcome, value = optimize_bcwe(game, objective, args.denominator)
    violation = verify_bcwe(game, outcome).violation
    rep.tolerances["obedience"] = 1e-8
    rep.results.update(value=value, denominator=args.denominator, violation=violation, outcome=_flows(outcome))
    if args.out:
        io.dump_json(io.serialize_outcome(outcome), args.out)
    return True


def _cmd_bcwe_verify(args, rep):
    game = io.parse_game(_load(rep, "game", args.game))
    outcome = io.parse_outcome(_load(rep, "outcome", args.outcome))
    r = verify_bcwe(game, outcome)
    rep.tolerances["obedience"] = args.tol
    rep.results.update(
        violation=r.violation,
        pairs=[
            {"from": a, "to": b, "lhs": float(r.lhs[i, j]), "rhs": float(r.rhs[i, j])}
            for i, a in enumerate(r.actions) for j, b in enumerate(r.actions) if i != j
        ],
        expected_social_cost=expected_social_cost(game, outcome),
    )
    return r.certified(args.tol)


def _cmd_design(args, rep):
    game = io.parse_game(_load(rep, "game", args.game))
    bcwe = io.parse_outcome(_load(rep, "bcwe", args.bcwe))
    rep.seed = args.seed
    approx = rational_approximation(bcwe.support_flows(), args.eta)
    structure = build_direct_structure(bcwe, approx, game)
    r = verify_eps_bwe(game, structure, obedient_profile(structure, game))
    lip = estimate_modulus(game, 1024, args.seed)
    try:
        bound = epsilon_bound(approx, bcwe, lip)
    except DomainError as exc:
        bound = None
        rep.results["bound_error"] = str(exc)
    rep.tolerances["eta"] = args.eta
    rep.results.update(K=approx.K, eta_achieved=approx.eta_achieved, obedience_eps=r.eps,
                       modulus=lip.L, epsilon_bound=bound)
    if args.out:
        io.dump_json(io.serialize_structure(structure), args.out)
    return bound is None or r.eps <= bound + 1e-9


def _cmd_bwe_solve(args, rep):
    game = io.parse_game(_load(rep, "game", args.game))
    structure = io.parse_structure(_load(rep, "structure", args.structure))
    cfg = _config(args)
    rep.seed = args.seed
    aux, res = bwe_descent(game, structure, cfg)
    prof = profile_from_flows(aux, res.flows)
    r = verify_eps_bwe(game, structure, prof, aux=aux)
    tc = total_cost_report(game, structure, prof, aux=aux)
    rep.tolerances["target_gap"] = cfg.target_gap
    rep.results.update(
        duality_gap=res.duality_gap, iterations=res.iterations, eps=r.eps,
        total_cost=tc.total_cost, expected_social_cost=tc.expected_social_cost,
        outcome=_flows(project_outcome(structure, prof)), excluded=[f"{k}:{t}" for k, t in r.excluded],
    )
    if args.out:
        io.dump_json(io.serialize_profile(prof), args.out)
    return True


def _cmd_bwe_verify(args, rep):
    game = io.parse_game(_load(rep, "game", args.game))
    structure = io.parse_structure(_load(rep, "structure", args.structure))
    if args.profile:
        prof = io.parse_profile(_load(rep, "profile", args.profile), structure)
    else:
        prof = obedient_profile(structure, game)
        rep.results["profile"] = "obedient"
    r = verify_eps_bwe(game, structure, prof)
    rep.tolerances["eps"] = args.tol
    rep.results.update(
        eps=r.eps, eps_weighted=r.eps_weighted,
        total_cost=total_cost_report(game, structure, prof).total_cost,
        excluded=[f"{k}:{t}" for k, t in r.excluded],
    )
    return r.certified(args.tol)


def _cmd_full_check(args, rep):
    game = io.parse_game(_load(rep, "game", args.game))
    bcwe = io.parse_outcome(_load(rep, "bcwe", args.bcwe))
    rep.seed = args.seed
    cfg = FullCheckConfig(eta=args.eta, runs=args.runs, seed=args.seed, tol_cost=args.tol,
                          descent=DescentConfig(target_gap=args.gap, max_iters=args.max_iters))
    cert = full_check(game, bcwe, cfg)
    rep.tolerances.update(cost=cfg.tol_cost, outcome=cfg.tol_outcome, target_gap=args.gap)
    rep.results["certificate"] = cert.to_dict()
    if args.out:
        io.dump_json(cert.to_dict(), args.out)
    return cert.verdict in (UNIQUE_OUTCOME, UNIQUE_SOCIAL_COST)


COMMANDS = {
    "wardrop": _cmd_wardrop,
    "bcwe-opt": _cmd_bcwe_opt,
    "bcwe-verify": _cmd_bcwe_verify,
    "design": _cmd_design,
    "bwe-solve": _cmd_bwe_solve,
    "bwe-verify": _cmd_bwe_verify,
    "full-check": _cmd_full_check,
}


def _configure_logging():
    level = LOG_LEVELS.get(os.environ.get("WARDROP_LOG", "quiet").lower(), logging.ERROR)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.getLogger("wardropdesign").setLevel(level)


def dispatch(argv):
    """Run one command; returns ``(exit status, RunReport or None)``."""
    parser = _parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a command is required")
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n{parser.format_usage()}")
        return EXIT_USAGE, None
    rep = RunReport(args.command)
    start = time.perf_counter()
    try:
        ok = COMMANDS[args.command](args, rep)
        status = EXIT_OK if ok else EXIT_FAILED
        rep.status = "certified" if ok else "failed"
    except ConvergenceError as exc:
        rep.status = "failed"
        rep.results["error"] = {"type": "convergence", "message": str(exc), "best_gap": exc.best_gap}
        status = EXIT_FAILED
    except (ModelError, DomainError, ConsistencyError, UnsupportedModelError, ResourceLimitError, OSError) as exc:
        rep.status = "error"
        err = {"type": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, ModelError):
            err.update(code=exc.code, path=exc.path)
        rep.results["error"] = err
        sys.stderr.write(f"error: {exc}\n")
        status = EXIT_USAGE
    rep.wall_time = time.perf_counter() - start
    return status, rep


def main(argv=None):
    _configure_logging()
    status, rep = dispatch(sys.argv[1:] if argv is None else argv)
    if rep is not None:
        sys.stdout.write(io.dump_json(rep.to_dict()))
    return status


if __name__ == "__main__":
    sys.exit(main())
