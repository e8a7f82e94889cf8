"""Randomized roundtrip checks for the static punishment constructions.

Every game is generated from its own child seed, so results do not depend
on how the batch is split across workers.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .game_model import StaticGame, StrategyGrid
from .static_inverse import (
    IncentiveStrategy,
    admissible_set_n,
    admissible_set_two_player,
    build_punishment_n,
    build_punishment_two_player,
    follower_best_responses,
    nash_set_under_incentive,
    solve_inverse_two_player,
    solve_ordinary_stackelberg,
)


def random_static_game(rng, n_followers=1, min_size=2, max_size=6):
    sizes = [int(rng.integers(min_size, max_size + 1)) for _ in range(n_followers + 1)]
    grids = [StrategyGrid([[float(v)] for v in range(s)]) for s in sizes]
    payoffs = [rng.uniform(-1.0, 1.0, size=sizes) for _ in range(n_followers + 1)]
    return StaticGame(grids, payoffs)


def _child_rngs(seed, count, stream):
    root = np.random.SeedSequence([int(seed), stream])
    return [np.random.default_rng(s) for s in root.spawn(count)]


def check_two_player(game, rng, samples=5):
    """Both directions of the two-player roundtrip plus the ordinary-vs-inverse inequality."""
    out = {"targets": 0, "target_failures": 0, "samples": 0, "sample_failures": 0, "dominance_ok": True}
    mask, pairs = admissible_set_two_player(game)
    for pair in pairs:
        alpha = build_punishment_two_player(game, pair)
        out["targets"] += 1
        if alpha(pair[1]) != pair[0] or pair[1] not in follower_best_responses(game, alpha):
            out["target_failures"] += 1
    K0, K1 = game.shape
    for _ in range(samples):
        alpha = IncentiveStrategy.from_map(rng.integers(0, K0, size=K1))
        for a1 in follower_best_responses(game, alpha):
            out["samples"] += 1
            if not mask[alpha(a1), a1]:
                out["sample_failures"] += 1
    inv = solve_inverse_two_player(game)
    ordy = solve_ordinary_stackelberg(game)
    out["dominance_ok"] = bool(inv.leader_payoff >= ordy.leader_payoff)
    out["inverse_payoff"] = inv.leader_payoff
    out["ordinary_payoff"] = ordy.leader_payoff
    return out


def check_n_followers(game, rng, samples=5):
    out = {"targets": 0, "target_failures": 0, "samples": 0, "sample_failures": 0}
    mask, elements = admissible_set_n(game)
    for target in elements:
        alpha = build_punishment_n(game, target)
        out["targets"] += 1
        if target[1:] not in nash_set_under_incentive(game, alpha):
            out["target_failures"] += 1
    for _ in range(samples):
        pm = rng.integers(0, game.shape[0], size=game.follower_shape)
        alpha = IncentiveStrategy.from_map(pm)
        for u in nash_set_under_incentive(game, alpha):
            out["samples"] += 1
            if not mask[(alpha(u),) + u]:
                out["sample_failures"] += 1
    return out


def _two_player_job(rng):
    game = random_static_game(rng, 1, 2, 6)
    return check_two_player(game, rng)


def _n_job(rng):
    n = int(rng.integers(2, 4))
    game = random_static_game(rng, n, 2, 4)
    res = check_n_followers(game, rng)
    res["n_followers"] = n
    return res


def _run(job, rngs, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(job, rngs))
    return [job(r) for r in rngs]


def _summary(results, extra=()):
    keys = ("targets", "target_failures", "samples", "sample_failures")
    out = {k: int(sum(r[k] for r in results)) for k in keys}
    out["games"] = len(results)
    for k in extra:
        out[k] = int(sum(not r[k] for r in results))
    out["passed"] = out["target_failures"] == 0 and out["sample_failures"] == 0 and all(
        out[k] == 0 for k in extra
    )
    return out


def run_suite(games=200, seed=0, workers=1, n_games=None):
    """Two-player roundtrip on ``games`` games and n-follower roundtrip on ``n_games`` (default games // 2)."""
    n_games = games // 2 if n_games is None else n_games
    two = _run(_two_player_job, _child_rngs(seed, games, 1), workers)
    many = _run(_n_job, _child_rngs(seed, n_games, 2), workers)
    s2 = _summary(two, extra=("dominance_ok",))
    s2["dominance_violations"] = s2.pop("dominance_ok")
    sn = _summary(many)
    return {
        "two_player": s2,
        "n_followers": sn,
        "passed": s2["passed"] and sn["passed"],
    }
