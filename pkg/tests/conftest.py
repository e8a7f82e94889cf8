import pathlib

import pytest

from invstack.game_model import game_from_dict, load_game

GAMES = pathlib.Path(__file__).resolve().parent.parent / "games"


@pytest.fixture
def games_dir():
    return GAMES


@pytest.fixture
def worked_game():
    return load_game(GAMES / "worked_example.json")


@pytest.fixture
def two_follower_game():
    return load_game(GAMES / "two_follower.json")


def linear_doc(steps=4, grid=(-1, 0, 1)):
    return {
        "kind": "differential",
        "players": [{"grid": list(grid)}, {"grid": list(grid)}],
        "dynamics": ["u0 + u1"],
        "running": ["0", "0"],
        "terminal": ["-x", "x"],
        "horizon": 1.0,
        "x0": [0.0],
        "steps": steps,
    }


def linear_spec(steps=4):
    return game_from_dict(linear_doc(steps))


@pytest.fixture
def linear():
    return linear_spec


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
