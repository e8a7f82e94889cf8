import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from invstack.game_model import StaticGame, StrategyGrid
from invstack.zerosum import (
    MatrixGameNonConvergence,
    guarantee_values,
    lower_value,
    mixed_matrix_value,
    per_follower_lower_value,
    upper_value,
)

from .oracles import lower_value_loops, mixed_value_2x2, upper_value_loops


def g(*vals):
    return StrategyGrid([[float(v)] for v in vals])


def test_worked_matrix(worked_game):
    J1 = worked_game.payoffs[1]
    assert lower_value(J1) == (0.0, 20)
    assert upper_value(J1)[0] == 0.0


def test_small_examples():
    A = [[3, 0], [1, 2]]
    assert lower_value(A) == (1.0, 0)
    assert upper_value(A) == (2.0, 1)
    assert lower_value(np.full((3, 4), 3.0)) == (3.0, 0)
    assert upper_value(np.full((3, 4), 3.0)) == (3.0, 0)


def test_guarantees():
    game = StaticGame.from_expressions([g(-1, 1), g(-1, 1), g(-1, 1)], ["0", "u0+u1", "u0+u2"])
    assert guarantee_values(game, (0, 0)).tolist() == [-2.0, -2.0]
    assert per_follower_lower_value(game, 1, (0,)) == (0.0, 1)
    assert per_follower_lower_value(game, 2, (1,)) == (0.0, 1)


def test_guarantee_worked(worked_game):
    assert guarantee_values(worked_game, (20,))[0] == 0.0


def test_constant_guarantee():
    game = StaticGame.from_expressions([g(0, 1), g(0, 1, 2)], ["1", "2.5"])
    assert guarantee_values(game, (2,)).tolist() == [2.5]
    assert per_follower_lower_value(game, 1, ()) == (2.5, 0)


def test_n1_reduces_to_lower_value():
    rng = np.random.default_rng(3)
    for _ in range(100):
        m, n = rng.integers(1, 7, size=2)
        J = rng.uniform(-1, 1, size=(m, n))
        game = StaticGame([g(*range(m)), g(*range(n))], [np.zeros((m, n)), J])
        assert per_follower_lower_value(game, 1, ()) == lower_value(J)


@pytest.mark.parametrize(
    "A,value,p,q",
    [
        ([[1, -1], [-1, 1]], 0.0, [0.5, 0.5], [0.5, 0.5]),
        ([[3, 0], [1, 2]], 1.5, [0.25, 0.75], [0.5, 0.5]),
    ],
)
def test_mixed_examples(A, value, p, q):
    for method in ("exact-LP", "fictitious-play"):
        tol = 1e-9 if method == "exact-LP" else 1e-6
        sol = mixed_matrix_value(A, method=method, tolerance=tol)
        assert sol.value == pytest.approx(value, abs=1e-6)
        assert np.allclose(sol.minimizer_mixed, p, atol=1e-3)
        assert np.allclose(sol.maximizer_mixed, q, atol=1e-3)
        assert sol.duality_gap <= tol


def test_constant_mixed():
    sol = mixed_matrix_value(np.full((3, 2), 4.0))
    assert sol.value == 4.0 and sol.duality_gap == 0.0


def test_fictitious_play_non_convergence_carries_bounds():
    A = np.random.default_rng(1).uniform(-1, 1, size=(8, 9))
    with pytest.raises(MatrixGameNonConvergence) as exc:
        mixed_matrix_value(A, method="fictitious-play", tolerance=1e-12, max_iterations=50)
    best = exc.value.best
    assert best.lower_bound <= best.upper_bound
    assert exc.value.iterations <= 50


def test_bad_inputs():
    with pytest.raises(ValueError):
        mixed_matrix_value([[1.0]], tolerance=0)
    with pytest.raises(ValueError):
        lower_value([[np.nan]])
    with pytest.raises(ValueError):
        mixed_matrix_value([[1.0]], method="simplex")


matrices = st.tuples(st.integers(1, 6), st.integers(1, 6)).flatmap(
    lambda s: arrays(np.float64, s, elements=st.floats(-10, 10, allow_nan=False, allow_infinity=False))
)


@settings(max_examples=300, deadline=None)
@given(matrices)
def test_pure_values_match_loops(A):
    lo = lower_value(A)
    hi = upper_value(A)
    assert lo == lower_value_loops(A.tolist())
    assert hi == upper_value_loops(A.tolist())
    assert lo[0] <= hi[0]
    assert lower_value(A) == lo and upper_value(A) == hi


@settings(max_examples=300, deadline=None)
@given(matrices)
def test_mixed_bracket_and_gap(A):
    sol = mixed_matrix_value(A, tolerance=1e-6)
    assert lower_value(A)[0] <= sol.value <= upper_value(A)[0]
    assert sol.duality_gap <= 1e-6
    for w in (sol.minimizer_mixed, sol.maximizer_mixed):
        assert np.all(w >= 0) and abs(w.sum() - 1) <= 1e-12
    # certified guarantees of the returned weights
    assert float((sol.minimizer_mixed @ A).max()) <= sol.value + 1e-6
    assert float((A @ sol.maximizer_mixed).min()) >= sol.value - 1e-6


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, (2, 2), elements=st.floats(-5, 5, allow_nan=False)))
def test_mixed_2x2_closed_form(A):
    assert mixed_matrix_value(A).value == pytest.approx(mixed_value_2x2(A.tolist()), abs=1e-7)
