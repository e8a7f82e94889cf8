import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from invstack.game_model import StaticGame, StrategyGrid
from invstack.static_inverse import (
    IncentiveStrategy,
    NotAdmissibleError,
    admissible_set_n,
    admissible_set_two_player,
    build_punishment_n,
    build_punishment_two_player,
    deviator,
    follower_best_responses,
    nash_set_under_incentive,
    solve_inverse_n,
    solve_inverse_two_player,
    solve_ordinary_stackelberg,
    team_select,
)
from invstack.verify import random_static_game

from .oracles import (
    admissible_n_loop,
    best_responses_loop,
    inverse_two_player_brute,
    nash_loop,
    ordinary_brute,
)


def g(*vals):
    return StrategyGrid([[float(v)] for v in vals])


def idx(game, p, value):
    return game.grids[p].index_of([value])


def test_worked_admissible(worked_game):
    mask, pairs = admissible_set_two_player(worked_game)
    assert mask[idx(worked_game, 0, 1), idx(worked_game, 1, -1)]
    assert mask[idx(worked_game, 0, 1), idx(worked_game, 1, 1)]
    assert not mask[idx(worked_game, 0, -1), idx(worked_game, 1, -1)]
    assert pairs == sorted(pairs) and len(pairs) == int(mask.sum())


def test_worked_solutions(worked_game):
    inv = solve_inverse_two_player(worked_game)
    assert inv.pair == (20, 0) and inv.leader_payoff == 2.0
    assert inv.thresholds["V_lower"] == 0.0 and inv.thresholds["V_upper"] == 0.0
    ordy = solve_ordinary_stackelberg(worked_game)
    assert ordy.pair == (20, 20) and ordy.leader_payoff == 0.0 and ordy.follower_payoffs == [2.0]


def test_worked_incentive_map(worked_game):
    alpha = build_punishment_two_player(worked_game, (20, 0))
    assert alpha(0) == 20
    assert all(alpha(a) == 0 for a in range(1, 21))
    # both u1 = -1 and u1 = 1 reach J1 = 0 under alpha
    assert follower_best_responses(worked_game, alpha) == [0, 20]
    n = solve_inverse_n(worked_game)
    assert n.pair == (20, 0) and n.strategy == alpha


def test_constant_follower_payoff():
    game = StaticGame([g(0, 1, 2), g(0, 1)], [np.array([[0, 1], [5, 2], [3, 5]]), np.full((3, 2), 7.0)])
    mask, _ = admissible_set_two_player(game)
    assert mask.all()
    assert solve_inverse_two_player(game).pair == (1, 0)
    alpha = build_punishment_two_player(game, (2, 1))
    assert alpha.punishment_map.tolist() == [0, 2]


def test_refuses_inadmissible_target(worked_game):
    with pytest.raises(NotAdmissibleError) as exc:
        build_punishment_two_player(worked_game, (0, 0))
    assert exc.value.margin == -2.0


def test_constant_incentive_best_responses():
    game = StaticGame([g(0, 1), g(0, 1, 2)], [np.zeros((2, 3)), np.array([[1, 3, 3], [0, 0, 1]])])
    assert follower_best_responses(game, IncentiveStrategy.constant(game, 0)) == [1, 2]


def test_incentive_strategy_checks_target():
    with pytest.raises(ValueError):
        IncentiveStrategy((0,), 1, np.array([0, 0]))


def test_two_follower_example(two_follower_game):
    game = two_follower_game
    mask, elements = admissible_set_n(game)
    assert mask[1, 0, 0] and not mask[0, 0, 0]
    rep = solve_inverse_n(game)
    assert rep.pair == (1, 0, 0) and rep.leader_payoff == 3.0
    assert rep.thresholds["at_solution"] == [0.0, 0.0]
    alpha = rep.strategy
    # follower 1 deviates to u1 = 1: punished with u0 = -1, payoff 0 equals the equilibrium payoff
    assert alpha((1, 0)) == 0
    assert game.payoffs[1][0, 1, 0] == 0.0 == game.payoffs[1][1, 0, 0]
    assert (0, 0) in nash_set_under_incentive(game, alpha)
    assert team_select(game, alpha, nash_set_under_incentive(game, alpha)) == (0, 0)


def test_empty_admissible_set_is_reported():
    # follower 1 always wants to match follower 2 and vice versa mismatch: no pure profile works
    game = StaticGame.from_expressions(
        [g(0), g(-1, 1), g(-1, 1)], ["0", "u1 * u2", "-u1 * u2"]
    )
    rep = solve_inverse_n(game)
    assert not rep.found and rep.admissible_count == 0


def test_deviator_rule():
    assert deviator((0, 1, 1), (0, 0, 0)) == 2
    assert deviator((0, 0), (0, 0)) is None


def test_multi_deviation_punishes_lowest_index(two_follower_game):
    alpha = build_punishment_n(two_follower_game, (1, 0, 0))
    # both deviate: punish follower 1, argmin of u0 + u1 is u0 = -1
    assert alpha((1, 1)) == 0


def test_constant_payoffs_n():
    game = StaticGame([g(0, 1), g(0, 1), g(0, 1)], [np.array([[[0, 1], [2, 3]], [[4, 9], [5, 6]]]), np.ones((2, 2, 2)), np.ones((2, 2, 2))])
    rep = solve_inverse_n(game)
    assert rep.pair == (1, 0, 1)
    assert rep.strategy.target_profile in nash_set_under_incentive(game, rep.strategy)


def random_pair_games(count, seed):
    rng = np.random.default_rng(seed)
    return [random_static_game(rng, 1, 2, 6) for _ in range(count)]


def test_inverse_matches_brute_force():
    for game in random_pair_games(200, 11):
        J0, J1 = game.payoffs[0].tolist(), game.payoffs[1].tolist()
        pair, v = inverse_two_player_brute(J0, J1)
        rep = solve_inverse_two_player(game)
        assert rep.pair == pair and rep.thresholds["V_lower"] == v
        assert solve_inverse_n(game).pair == rep.pair
        assert solve_ordinary_stackelberg(game).pair == ordinary_brute(J0, J1)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_punishment_roundtrip_two_player(seed):
    rng = np.random.default_rng(seed)
    game = random_static_game(rng, 1, 2, 6)
    mask, pairs = admissible_set_two_player(game)
    assert pairs
    for a0, a1 in pairs:
        alpha = build_punishment_two_player(game, (a0, a1))
        assert alpha(a1) == a0
        assert a1 in best_responses_loop(game.payoffs[1], alpha)
    for _ in range(5):
        alpha = IncentiveStrategy.from_map(rng.integers(0, game.shape[0], size=game.shape[1]))
        brs = follower_best_responses(game, alpha)
        assert brs == best_responses_loop(game.payoffs[1], alpha)
        assert all(mask[alpha(a), a] for a in brs)
    assert solve_inverse_two_player(game).leader_payoff >= solve_ordinary_stackelberg(game).leader_payoff


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 3))
def test_punishment_roundtrip_n(seed, n):
    rng = np.random.default_rng(seed)
    game = random_static_game(rng, n, 2, 3)
    mask, elements = admissible_set_n(game)
    assert set(elements) == admissible_n_loop(game.payoffs, game.shape)
    for target in elements:
        alpha = build_punishment_n(game, target)
        assert alpha(target[1:]) == target[0]
        assert target[1:] in nash_set_under_incentive(game, alpha)
    for _ in range(3):
        alpha = IncentiveStrategy.from_map(rng.integers(0, game.shape[0], size=game.follower_shape))
        ne = nash_set_under_incentive(game, alpha)
        assert ne == nash_loop(game.payoffs, game.shape, alpha)
        assert all(mask[(alpha(u),) + u] for u in ne)


def test_determinism(worked_game):
    a = solve_inverse_two_player(worked_game)
    b = solve_inverse_two_player(worked_game)
    assert a.pair == b.pair and a.strategy == b.strategy
