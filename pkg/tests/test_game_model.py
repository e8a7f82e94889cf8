import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from invstack.game_model import (
    DifferentialGameSpec,
    GameDefinitionError,
    StaticGame,
    StrategyGrid,
    TabulationError,
    dump_game,
    game_from_dict,
    parse_game_document,
    tabulate,
)
from invstack.expr import parse_expression

from .conftest import linear_doc


def grid(*vals):
    return StrategyGrid([[float(v)] for v in vals])


def test_worked_document(worked_game):
    assert isinstance(worked_game, StaticGame)
    assert worked_game.shape == (21, 21)
    pts = worked_game.grids[0].points[:, 0]
    assert pts[0] == -1.0 and pts[10] == 0.0 and pts[20] == 1.0
    assert worked_game.payoffs[0][20, 0] == 2.0  # J0(1, -1)
    assert worked_game.payoffs[1][20, 20] == 2.0


def test_constant_payoff():
    g = game_from_dict({"kind": "static", "players": [[0, 1], [0, 1]], "payoffs": ["3", "3"]})
    assert np.all(g.payoffs[0] == 3.0) and g.payoffs[1].shape == (2, 2)


def test_unknown_symbol_rejected():
    doc = {"kind": "static", "players": [[0, 1], [0, 1]], "payoffs": ["u0", "u2"]}
    with pytest.raises(GameDefinitionError, match="unknown symbol"):
        game_from_dict(doc)


def test_syntax_error_has_line_and_column():
    with pytest.raises(GameDefinitionError) as exc:
        parse_game_document('{\n  "kind": "static",\n  "players": [1, 2\n}')
    assert exc.value.line == 4


@pytest.mark.parametrize(
    "players",
    [[[], [0]], [[0, 0], [1]], [[0, float("inf")], [1]]],
)
def test_bad_grids(players):
    with pytest.raises(GameDefinitionError):
        game_from_dict({"kind": "static", "players": players, "payoffs": ["0", "0"]})


@pytest.mark.parametrize(
    "text,expected",
    [("u0+u1", [[-2, 0], [0, 2]]), ("min(u0,u1)", None)],
)
def test_tabulate_examples(text, expected):
    if expected is None:
        t = tabulate(parse_expression(text), [grid(0, 1), grid(0, 1)])
        assert t.tolist() == [[0, 0], [0, 1]]
    else:
        t = tabulate(parse_expression(text), [grid(-1, 1), grid(-1, 1)])
        assert t.tolist() == expected


def test_tabulate_reports_index_of_non_finite_cell():
    with pytest.raises(TabulationError) as exc:
        tabulate(parse_expression("1 / (u0 - u1)"), [grid(0, 1, 2), grid(2, 5)])
    assert exc.value.index == (2, 0)


def test_tabulate_pointwise():
    e = parse_expression("u0 * u1 - u1 ^ 2")
    a = tabulate(e, [grid(0, 1, 2), grid(-1, 3)])
    b = tabulate(e, [grid(0, 7, 2), grid(-1, 3)])
    assert np.array_equal(a[[0, 2]], b[[0, 2]])
    assert not np.array_equal(a[1], b[1])


def test_vector_controls():
    g = game_from_dict(
        {
            "kind": "static",
            "players": [[[0, 1], [2, 3]], [[1, 1], [0, 0], [1, 0]]],
            "payoffs": ["u0[0] + u0[1] * u1[1]", "u1[0]"],
        }
    )
    assert g.payoffs[0].tolist() == [[1, 0, 0], [5, 2, 2]]


def test_static_round_trip(worked_game, two_follower_game):
    for g in (worked_game, two_follower_game):
        assert parse_game_document(dump_game(g)) == g
        assert dump_game(parse_game_document(dump_game(g))) == dump_game(g)


def test_table_payoffs_round_trip():
    g = game_from_dict({"kind": "static", "players": [[0, 1], [0, 1]], "payoffs": [[[1, 2], [3, 4]], "u0"]})
    assert g.payoffs[0].tolist() == [[1, 2], [3, 4]]
    assert parse_game_document(dump_game(g)) == g


def test_differential_round_trip():
    doc = linear_doc(3)
    doc["state_grid"] = {"min": -5, "max": 5, "points": 11}
    doc["running"] = [{"state": "x", "leader": "u0"}, "u1 * t"]
    spec = game_from_dict(doc)
    assert isinstance(spec, DifferentialGameSpec)
    assert spec.dt == pytest.approx(1 / 3) and spec.time(3) == 1.0
    again = parse_game_document(dump_game(spec))
    assert again == spec
    assert again.running[0].parts is not None


@pytest.mark.parametrize(
    "patch,fragment",
    [
        ({"steps": 0}, "steps"),
        ({"horizon": -1}, "horizon"),
        ({"dynamics": ["u0", "u1"]}, "dimension mismatch"),
        ({"terminal": ["u0", "x"]}, "unknown symbol"),
        ({"running": ["0"]}, "running"),
        ({"dynamics": ["x[1]"]}, "dimension mismatch"),
    ],
)
def test_differential_validation(patch, fragment):
    doc = linear_doc()
    doc.update(patch)
    with pytest.raises(GameDefinitionError, match=fragment):
        game_from_dict(doc)


small_grids = st.lists(
    st.lists(st.integers(-4, 4), min_size=1, max_size=4, unique=True), min_size=2, max_size=3
)


@settings(max_examples=50, deadline=None)
@given(small_grids, st.integers(0, 2**31 - 1))
def test_round_trip_property(grids, seed):
    rng = np.random.default_rng(seed)
    n = len(grids)
    terms = [f"{rng.integers(-3, 4)}*u{p}" for p in range(n)]
    payoffs = [" + ".join(rng.permutation(terms)) for _ in range(n)]
    doc = {"kind": "static", "players": grids, "payoffs": payoffs}
    g = game_from_dict(json.loads(json.dumps(doc)))
    assert parse_game_document(dump_game(g)) == g
    assert all(np.all(np.isfinite(J)) for J in g.payoffs)
