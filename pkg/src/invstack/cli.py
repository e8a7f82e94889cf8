"""Command-line front end.

    invstack solve-static --input game.json --out results/
    invstack solve-diff --input diff.json --steps 8 --out results/
    invstack solve-mixed --input diff.json --out results/
    invstack compare --input game.json --out results/
    invstack verify --games 200 --seed 7 --out results/
    invstack --input game.json --dump

Exit status: 0 success, 2 no solution on the grid, 3 search budget
exhausted (best-so-far is still written), 1 any other error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import __version__
from .diffgame import (
    LatticeEscapeError,
    StateLattice,
    build_punishment_diff,
    deviation_sweep,
    solve_inverse_diff,
)
from .expr import ExpressionError
from .game_model import DifferentialGameSpec, GameDefinitionError, StaticGame, dump_game, load_game
from .mixed import MixedControlPath, fixed_point_search, leader_sweep, relaxed_integrate
from .static_inverse import admissible_set_n, solve_inverse_n, solve_inverse_two_player, solve_ordinary_stackelberg
from .verify import run_suite

COMMANDS = ("solve-static", "solve-diff", "solve-mixed", "compare", "verify")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NO_SOLUTION = 2
EXIT_BUDGET = 3


@dataclass
class RunConfig:
    command: str
    input: Optional[str] = None
    out: str = "."
    steps: Optional[int] = None
    eps_incl: float = 0.0
    eps_c: float = 1e-9
    matrix_tol: float = 1e-9
    seed: int = 0
    games: int = 200
    workers: int = 1
    budget: int = 5_000_000
    max_iterations: int = 200

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        for name in ("eps_incl", "eps_c", "matrix_tol"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")
        if self.steps is not None and self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.games < 0 or self.workers < 1 or self.budget < 1 or self.max_iterations < 1:
            raise ValueError("games, workers, budget and max-iterations must be positive")

    def echo(self):
        # output location and worker count never change results, keep them out of the report
        d = asdict(self)
        d.pop("out")
        d.pop("workers")
        return d


class CliError(Exception):
    pass


# ----------------------------------------------------------------- output


def _num(v):
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_num(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_num(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _num(x) for k, x in v.items()}
    return v


def _write_json(path, data):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_num(data), fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def _base_report(cfg, game=None):
    rep = {
        "tool": "invstack",
        "version": __version__,
        "command": cfg.command,
        "config": cfg.echo(),
        "tolerances": {"eps_incl": cfg.eps_incl, "eps_c": cfg.eps_c, "matrix_tol": cfg.matrix_tol},
    }
    if game is not None:
        rep["players"] = len(game.grids)
        rep["grid_sizes"] = [g.size for g in game.grids]
    return rep


def _labels(game, p, idx):
    return [float(v) for v in game.grids[p].points[idx]]


def _load(cfg, kind):
    if not cfg.input:
        raise CliError(f"{cfg.command} needs --input")
    game = load_game(cfg.input)
    if kind == "static" and not isinstance(game, StaticGame):
        raise CliError(f"{cfg.command} needs a static game document")
    if kind == "differential":
        if not isinstance(game, DifferentialGameSpec):
            raise CliError(f"{cfg.command} needs a differential game document")
        if cfg.steps is not None:
            game = game.with_steps(cfg.steps)
    return game


# --------------------------------------------------------------- commands


def _solution_json(game, rep):
    if not rep.found:
        return None
    out = {
        "leader_action": rep.leader_action,
        "profile": list(rep.profile),
        "leader_point": _labels(game, 0, rep.leader_action),
        "profile_points": [_labels(game, i + 1, a) for i, a in enumerate(rep.profile)],
        "leader_payoff": rep.leader_payoff,
        "follower_payoffs": rep.follower_payoffs,
        "verification_margins": rep.margins,
    }
    if rep.strategy is not None:
        out["incentive_map"] = rep.strategy.punishment_map.tolist()
    return out


def _admissible_rows(game, mask):
    for cell in np.argwhere(mask):
        cell = tuple(int(a) for a in cell)
        pts = [v for p, a in enumerate(cell) for v in _labels(game, p, a)]
        yield list(cell) + pts + [float(J[cell]) for J in game.payoffs]


def _admissible_header(game):
    idx = [f"a{p}" for p in range(len(game.grids))]
    pts = [f"u{p}[{j}]" for p, g in enumerate(game.grids) for j in range(g.dim)]
    return idx + pts + [f"J{p}" for p in range(len(game.grids))]


def cmd_solve_static(cfg):
    game = _load(cfg, "static")
    report = _base_report(cfg, game)
    if game.n_followers == 1:
        inv = solve_inverse_two_player(game, cfg.eps_incl)
        ordy = solve_ordinary_stackelberg(game)
        report["ordinary"] = _solution_json(game, ordy)
        report["ordinary"].pop("incentive_map", None)
    else:
        inv = solve_inverse_n(game, cfg.eps_incl)
    mask, elements = admissible_set_n(game, cfg.eps_incl)
    report["thresholds"] = inv.thresholds
    report["admissible_count"] = len(elements)
    report["inverse"] = _solution_json(game, inv)
    report["status"] = "solved" if inv.found else "no solution on grid"
    _write_json(os.path.join(cfg.out, "report.json"), report)
    _write_csv(os.path.join(cfg.out, "admissible.csv"), _admissible_header(game), _admissible_rows(game, mask))
    return EXIT_OK if inv.found else EXIT_NO_SOLUTION


def cmd_compare(cfg):
    game = _load(cfg, "static")
    if game.n_followers != 1:
        raise CliError("compare needs a game with one follower")
    inv = solve_inverse_two_player(game, cfg.eps_incl)
    ordy = solve_ordinary_stackelberg(game)
    report = _base_report(cfg, game)
    report.update(
        {
            "inverse": _solution_json(game, inv),
            "ordinary": _solution_json(game, ordy),
            "leader_gain": inv.leader_payoff - ordy.leader_payoff,
            "inverse_dominates": bool(inv.leader_payoff >= ordy.leader_payoff),
            "thresholds": inv.thresholds,
        }
    )
    report["ordinary"].pop("incentive_map", None)
    _write_json(os.path.join(cfg.out, "report.json"), report)
    return EXIT_OK


def _trajectory_rows(spec, traj, controls):
    """controls: list per player of per-step entries (index or weight vector)."""
    for k in range(len(traj.times)):
        row = [k, float(traj.times[k])] + [float(v) for v in traj.states[k]]
        for c in controls:
            row.append(c[k] if k < spec.steps else "")
        row += [float(v) for v in traj.z[:, k]]
        yield row


def _trajectory_header(spec):
    return (
        ["k", "t"]
        + [f"x[{j}]" for j in range(spec.d)]
        + [f"a{p}" for p in range(spec.n_followers + 1)]
        + [f"z{p}" for p in range(spec.n_followers + 1)]
    )


def _margin_rows(spec, margins):
    for i in range(margins.shape[0]):
        for k in range(margins.shape[1]):
            yield [i + 1, k, spec.time(k), float(margins[i, k])]


def cmd_solve_diff(cfg):
    spec = _load(cfg, "differential")
    lattice = StateLattice(spec)
    sol = solve_inverse_diff(spec, eps_c=cfg.eps_c, budget=cfg.budget, lattice=lattice)
    report = _base_report(cfg, spec)
    report["steps"] = spec.steps
    report["stats"] = sol.stats
    if sol.leader_path is None:
        report["status"] = "budget exhausted" if not sol.optimal else "no solution on grid"
        _write_json(os.path.join(cfg.out, "report.json"), report)
        return EXIT_BUDGET if not sol.optimal else EXIT_NO_SOLUTION
    strategy = build_punishment_diff(spec, sol.leader_path, sol.profile, sol.tables, cfg.eps_c)
    sweep = deviation_sweep(spec, strategy)
    report.update(
        {
            "status": "solved" if sol.optimal else "budget exhausted",
            "optimal": sol.optimal,
            "leader_path": list(sol.leader_path),
            "profile": [list(p) for p in sol.profile],
            "leader_payoff": sol.leader_payoff,
            "follower_payoffs": sol.follower_payoffs,
            "margins": sol.margins,
            "min_margin": float(sol.margins.min()),
            "deviation_sweep": {
                "exhaustive": sweep.exhaustive,
                "deviations": len(sweep.rows),
                "max_profit": sweep.max_profit,
                "constant_estimate": sweep.constant,
                "rows": [
                    {"follower": r[0], "path": list(r[1]), "payoff": r[2], "equilibrium": r[3], "profit": r[4]}
                    for r in sweep.rows
                ],
            },
        }
    )
    _write_json(os.path.join(cfg.out, "report.json"), report)
    controls = [list(sol.leader_path)] + [list(p) for p in sol.profile]
    _write_csv(os.path.join(cfg.out, "trajectory.csv"), _trajectory_header(spec), _trajectory_rows(spec, sol.trajectory, controls))
    _write_csv(os.path.join(cfg.out, "margins.csv"), ["follower", "k", "t", "margin"], _margin_rows(spec, sol.margins))
    return EXIT_OK if sol.optimal else EXIT_BUDGET


def _mixed_from_json(entry, steps, size, where):
    w = np.asarray(entry, dtype=float)
    if w.ndim == 1:
        w = np.tile(w, (steps, 1))
    if w.shape != (steps, size):
        raise CliError(f"{where}: expected {size} weights per step for {steps} steps")
    try:
        return MixedControlPath(w)
    except ValueError as exc:
        raise CliError(f"{where}: {exc}") from None


def cmd_solve_mixed(cfg):
    spec = _load(cfg, "differential")
    section = spec.extra.get("mixed", {}) or {}
    K0, N = spec.grids[0].size, spec.steps
    lattice = StateLattice(spec)
    report = _base_report(cfg, spec)
    report["steps"] = N
    if "candidates" in section:
        cands = [_mixed_from_json(c, N, K0, f"mixed.candidates[{j}]") for j, c in enumerate(section["candidates"])]
        best, runs = leader_sweep(spec, cands, cfg.max_iterations, cfg.matrix_tol, lattice=lattice)
        report["candidates"] = [{"leader": c.to_json(), "certificate": r[1].to_json()} for c, r in zip(cands, runs)]
        report["best_candidate"] = best
        pick = best if best is not None else 0
        mu0, (mu, cert) = cands[pick], runs[pick]
    else:
        leader = section.get("leader")
        mu0 = MixedControlPath.uniform(N, K0) if leader is None else _mixed_from_json(leader, N, K0, "mixed.leader")
        mu, cert = fixed_point_search(spec, mu0, cfg.max_iterations, cfg.matrix_tol, lattice=lattice)
    traj = relaxed_integrate(spec, mu0, mu)
    report.update(
        {
            "status": "converged" if cert.converged else "not converged",
            "leader": mu0.to_json(),
            "followers": [m.to_json() for m in mu],
            "certificate": cert.to_json(),
        }
    )
    _write_json(os.path.join(cfg.out, "report.json"), report)
    controls = [[json.dumps(_num(m[k])) for k in range(N)] for m in [mu0] + mu]
    _write_csv(os.path.join(cfg.out, "trajectory.csv"), _trajectory_header(spec), _trajectory_rows(spec, traj, controls))
    _write_csv(os.path.join(cfg.out, "margins.csv"), ["follower", "k", "t", "margin"], _margin_rows(spec, cert.margins))
    res_rows = (
        [it, r, cert.step_sizes[it] if it < len(cert.step_sizes) else ""] for it, r in enumerate(cert.residuals)
    )
    _write_csv(os.path.join(cfg.out, "residuals.csv"), ["iteration", "residual", "step_size"], res_rows)
    return EXIT_OK


def cmd_verify(cfg):
    summary = run_suite(cfg.games, cfg.seed, cfg.workers)
    report = _base_report(cfg)
    report["verification"] = summary
    report["status"] = "passed" if summary["passed"] else "failed"
    _write_json(os.path.join(cfg.out, "report.json"), report)
    return EXIT_OK if summary["passed"] else EXIT_ERROR


HANDLERS = {
    "solve-static": cmd_solve_static,
    "solve-diff": cmd_solve_diff,
    "solve-mixed": cmd_solve_mixed,
    "compare": cmd_compare,
    "verify": cmd_verify,
}


def run(cfg: RunConfig) -> int:
    os.makedirs(cfg.out, exist_ok=True)
    return HANDLERS[cfg.command](cfg)


# ------------------------------------------------------------------- main


def build_parser():
    p = argparse.ArgumentParser(prog="invstack", description="Inverse Stackelberg game solvers.")
    p.add_argument("command_pos", nargs="?", choices=COMMANDS, metavar="command", help=" | ".join(COMMANDS))
    p.add_argument("--command", choices=COMMANDS)
    p.add_argument("--input")
    p.add_argument("--out", default=".")
    p.add_argument("--steps", type=int)
    p.add_argument("--eps-incl", type=float, default=0.0)
    p.add_argument("--eps-c", type=float, default=1e-9)
    p.add_argument("--matrix-tol", type=float, default=1e-9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--games", type=int, default=200)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--budget", type=int, default=5_000_000, help="search node budget for solve-diff")
    p.add_argument("--max-iterations", type=int, default=200, help="fixed-point iterations for solve-mixed")
    p.add_argument("--dump", action="store_true", help="print the parsed game document and exit")
    p.add_argument("--version", action="version", version=f"invstack {__version__}")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.dump:
            if not args.input:
                raise CliError("--dump needs --input")
            sys.stdout.write(dump_game(load_game(args.input)))
            return EXIT_OK
        if args.command_pos and args.command and args.command_pos != args.command:
            raise CliError("conflicting commands")
        command = args.command or args.command_pos
        if command is None:
            raise CliError("no command given")
        cfg = RunConfig(
            command=command,
            input=args.input,
            out=args.out,
            steps=args.steps,
            eps_incl=args.eps_incl,
            eps_c=args.eps_c,
            matrix_tol=args.matrix_tol,
            seed=args.seed,
            games=args.games,
            workers=args.workers,
            budget=args.budget,
            max_iterations=args.max_iterations,
        )
        code = run(cfg)
        if code == EXIT_NO_SOLUTION:
            print("no solution on this grid", file=sys.stderr)
        elif code == EXIT_BUDGET:
            print("search budget exhausted; report holds the best candidate found", file=sys.stderr)
        return code
    except (CliError, GameDefinitionError, ExpressionError, LatticeEscapeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
