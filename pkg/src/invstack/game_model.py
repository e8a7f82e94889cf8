"""Game definitions: strategy grids, static games, differential game specs.

Documents are JSON.  A static game::

    {"kind": "static",
     "players": [{"grid": {"min": -1, "max": 1, "step": 0.1}},
                 {"grid": {"min": -1, "max": 1, "step": 0.1}}],
     "payoffs": ["u0 - u1", "u0 + u1"]}

Player 0 is the leader.  A payoff is an expression string or an explicit
nested-list table indexed by action indices.  A differential game replaces
``payoffs`` by ``dynamics``, ``terminal`` and ``running`` and adds
``horizon``, ``x0``, ``steps`` and optionally ``state_grid``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .expr import BinOp, ExpressionError, PayoffExpr, check_symbols, parse_expression

RUNNING_PARTS = ("state", "leader", "followers")


class GameDefinitionError(ValueError):
    """Invalid game document.  ``line``/``column`` are set for JSON syntax errors."""

    def __init__(self, message, line=None, column=None, path=None):
        self.line = line
        self.column = column
        self.path = path
        where = []
        if path:
            where.append(path)
        if line is not None:
            where.append(f"line {line}, column {column}")
        if where:
            message = f"{' @ '.join(where)}: {message}"
        super().__init__(message)


class TabulationError(GameDefinitionError):
    def __init__(self, message, index=None, path=None):
        self.index = index
        super().__init__(message, path=path)


class StrategyGrid:
    """Finite, ordered strategy set; ``points`` has shape ``(size, dim)``."""

    __slots__ = ("points", "spec")

    def __init__(self, points, spec=None):
        pts = np.array(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
            raise GameDefinitionError("empty grid")
        if not np.all(np.isfinite(pts)):
            raise GameDefinitionError("grid coordinates must be finite")
        if len({tuple(p) for p in pts.tolist()}) != len(pts):
            raise GameDefinitionError("grid contains duplicate points")
        pts = pts + 0.0  # normalise -0.0
        pts.setflags(write=False)
        self.points = pts
        # original range description, kept so that dumps echo the document
        self.spec = spec

    @classmethod
    def from_range(cls, lo, hi, step):
        if not (math.isfinite(lo) and math.isfinite(hi) and math.isfinite(step)):
            raise GameDefinitionError("range bounds must be finite")
        if step <= 0 or hi < lo:
            raise GameDefinitionError("range needs step > 0 and max >= min")
        count = int(round((hi - lo) / step)) + 1
        if abs(lo + (count - 1) * step - hi) > 1e-9 * max(1.0, abs(hi)):
            raise GameDefinitionError(f"step {step} does not divide [{lo}, {hi}]")
        pts = np.round(np.linspace(lo, hi, count), 12)
        return cls(pts, spec={"min": lo, "max": hi, "step": step})

    @property
    def size(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def index_of(self, point, tol=1e-9):
        p = np.atleast_1d(np.asarray(point, dtype=float))
        hits = np.flatnonzero(np.all(np.abs(self.points - p) <= tol, axis=1))
        if len(hits) == 0:
            raise KeyError(f"{point!r} is not a grid point")
        return int(hits[0])

    def label(self, index):
        p = self.points[index]
        return float(p[0]) if self.dim == 1 else [float(v) for v in p]

    def to_json(self):
        if self.spec is not None:
            return dict(self.spec)
        if self.dim == 1:
            return [float(v) for v in self.points[:, 0]]
        return self.points.tolist()

    def __eq__(self, other):
        return isinstance(other, StrategyGrid) and np.array_equal(self.points, other.points)

    def __repr__(self):
        return f"StrategyGrid(size={self.size}, dim={self.dim})"


def symbol_env(grids, actions, t=None, x=None):
    """Build an expression environment.

    ``actions[p]`` is an integer array (any broadcastable shape) of action
    indices into ``grids[p]``; ``x`` is a sequence of per-component arrays.
    """
    env = {}
    if t is not None:
        env["t"] = [np.float64(t)]
    if x is not None:
        env["x"] = list(x)
    for p, (grid, idx) in enumerate(zip(grids, actions)):
        pts = grid.points
        env[f"u{p}"] = [pts[:, j][idx] for j in range(grid.dim)]
    return env


def broadcast_indices(sizes, lead=0):
    """Open-mesh index arrays for a full action lattice, with ``lead`` leading axes."""
    total = lead + len(sizes)
    out = []
    for p, k in enumerate(sizes):
        shape = [1] * total
        shape[lead + p] = k
        out.append(np.arange(k).reshape(shape))
    return out


def tabulate(payoff: PayoffExpr, grids: Sequence[StrategyGrid], path=None) -> np.ndarray:
    """Tensor of ``payoff`` over the product of ``grids`` (axis p = player p)."""
    sizes = tuple(g.size for g in grids)
    dims = {f"u{p}": g.dim for p, g in enumerate(grids)}
    try:
        check_symbols(payoff, dims)
    except ExpressionError as exc:
        raise GameDefinitionError(str(exc), path=path) from None
    env = symbol_env(grids, broadcast_indices(sizes))
    values = np.broadcast_to(np.asarray(payoff.evaluate(env), dtype=float), sizes).copy()
    bad = np.argwhere(~np.isfinite(values))
    if len(bad):
        idx = tuple(int(v) for v in bad[0])
        raise TabulationError(
            f"non-finite value of {payoff.source!r} at action indices {idx}", index=idx, path=path
        )
    return values


class StaticGame:
    """Finite game: leader grid ``grids[0]``, follower grids ``grids[1:]``.

    ``payoffs[i]`` is J_i tabulated on the full action lattice, axis p for
    player p.  ``sources[i]`` is the expression (or None for a raw table).
    """

    def __init__(self, grids, payoffs, sources=None, names=None):
        self.grids = tuple(g if isinstance(g, StrategyGrid) else StrategyGrid(g) for g in grids)
        if len(self.grids) < 2:
            raise GameDefinitionError("need a leader and at least one follower")
        shape = tuple(g.size for g in self.grids)
        tensors = []
        for i, J in enumerate(payoffs):
            J = np.array(J, dtype=float)
            if J.shape != shape:
                raise GameDefinitionError(f"payoff {i} has shape {J.shape}, expected {shape}")
            if not np.all(np.isfinite(J)):
                raise GameDefinitionError(f"payoff {i} has non-finite entries")
            J.setflags(write=False)
            tensors.append(J)
        if len(tensors) != len(self.grids):
            raise GameDefinitionError(
                f"expected {len(self.grids)} payoffs (one per player), got {len(tensors)}"
            )
        self.payoffs = tuple(tensors)
        self.sources = tuple(sources) if sources is not None else (None,) * len(tensors)
        self.names = tuple(names) if names is not None else None

    @classmethod
    def from_expressions(cls, grids, exprs, names=None):
        grids = [g if isinstance(g, StrategyGrid) else StrategyGrid(g) for g in grids]
        dims = {f"u{p}": g.dim for p, g in enumerate(grids)}
        parsed = [e if isinstance(e, PayoffExpr) else parse_expression(e, dims) for e in exprs]
        tensors = [tabulate(e, grids, path=f"payoffs[{i}]") for i, e in enumerate(parsed)]
        return cls(grids, tensors, sources=parsed, names=names)

    @property
    def n_followers(self):
        return len(self.grids) - 1

    @property
    def shape(self):
        return self.payoffs[0].shape

    @property
    def follower_shape(self):
        return self.shape[1:]

    def payoff_vector(self, a0, profile):
        idx = (a0,) + tuple(profile)
        return np.array([J[idx] for J in self.payoffs])

    def __eq__(self, other):
        return (
            isinstance(other, StaticGame)
            and self.grids == other.grids
            and all(np.array_equal(a, b) for a, b in zip(self.payoffs, other.payoffs))
            and self.sources == other.sources
        )

    def __repr__(self):
        return f"StaticGame(n_followers={self.n_followers}, shape={self.shape})"


@dataclass(frozen=True)
class RunningPayoff:
    """Running payoff g_i; ``parts`` holds the declared additive split, if any."""

    expr: PayoffExpr
    parts: Optional[tuple] = None  # ((part name, PayoffExpr), ...)


@dataclass(frozen=True, eq=False)
class DifferentialGameSpec:
    grids: tuple
    horizon: float
    x0: np.ndarray
    dynamics: tuple
    running: tuple
    terminal: tuple
    steps: int
    state_grid: Optional[tuple] = None  # per dimension: {"min","max","points"} (any subset)
    names: Optional[tuple] = None
    extra: dict = field(default_factory=dict)  # passthrough sections (e.g. "mixed")

    def __post_init__(self):
        if not self.horizon > 0 or not math.isfinite(self.horizon):
            raise GameDefinitionError("horizon must be a positive finite number")
        if int(self.steps) != self.steps or self.steps < 1:
            raise GameDefinitionError("steps must be an integer >= 1")
        x0 = np.array(self.x0, dtype=float).reshape(-1)
        if x0.size == 0 or not np.all(np.isfinite(x0)):
            raise GameDefinitionError("x0 must be a nonempty finite vector")
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        d = x0.size
        n_players = len(self.grids)
        if n_players < 2:
            raise GameDefinitionError("need a leader and at least one follower")
        if len(self.dynamics) != d:
            raise GameDefinitionError(f"dynamics has {len(self.dynamics)} entries, state dim is {d}")
        if len(self.running) != n_players or len(self.terminal) != n_players:
            raise GameDefinitionError(f"need {n_players} running and terminal payoffs")
        if self.state_grid is not None and len(self.state_grid) != d:
            raise GameDefinitionError(f"state_grid needs {d} entries")
        dims = self.symbol_dims()
        sdims = {"x": d}
        try:
            for e in self.dynamics:
                check_symbols(e, dims)
            for r in self.running:
                check_symbols(r.expr, dims)
            for e in self.terminal:
                check_symbols(e, sdims)
        except ExpressionError as exc:
            raise GameDefinitionError(str(exc)) from None

    @property
    def d(self):
        return self.x0.size

    @property
    def n_followers(self):
        return len(self.grids) - 1

    @property
    def dt(self):
        return self.horizon / self.steps

    def time(self, k):
        return self.horizon * k / self.steps

    def symbol_dims(self):
        dims = {"t": 1, "x": self.d}
        dims.update({f"u{p}": g.dim for p, g in enumerate(self.grids)})
        return dims

    def with_steps(self, steps):
        return replace(self, steps=int(steps))

    def __eq__(self, other):
        return (
            isinstance(other, DifferentialGameSpec)
            and self.grids == other.grids
            and self.horizon == other.horizon
            and np.array_equal(self.x0, other.x0)
            and self.dynamics == other.dynamics
            and self.running == other.running
            and self.terminal == other.terminal
            and self.steps == other.steps
            and self.state_grid == other.state_grid
        )


# ---------------------------------------------------------------- documents


def parse_game_document(text: str):
    """Parse a JSON game document into a StaticGame or DifferentialGameSpec."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameDefinitionError(f"syntax error: {exc.msg}", exc.lineno, exc.colno) from None
    return game_from_dict(doc)


def load_game(path):
    with open(path, encoding="utf-8") as fh:
        return parse_game_document(fh.read())


def game_from_dict(doc):
    if not isinstance(doc, dict):
        raise GameDefinitionError("document must be a JSON object")
    kind = doc.get("kind")
    if kind not in ("static", "differential"):
        raise GameDefinitionError("kind must be 'static' or 'differential'", path="kind")
    players = doc.get("players")
    if not isinstance(players, list) or len(players) < 2:
        raise GameDefinitionError("players must list the leader and at least one follower", path="players")
    grids, names = [], []
    for p, entry in enumerate(players):
        where = f"players[{p}]"
        if isinstance(entry, dict) and "grid" in entry:
            names.append(entry.get("name"))
            entry = entry["grid"]
        else:
            names.append(None)
        grids.append(_grid_from_json(entry, where))
    names = tuple(names) if any(n is not None for n in names) else None
    if kind == "static":
        return _static_from_dict(doc, grids, names)
    return _differential_from_dict(doc, grids, names)


def _grid_from_json(entry, where):
    try:
        if isinstance(entry, dict):
            missing = {"min", "max", "step"} - set(entry)
            if missing:
                raise GameDefinitionError(f"range grid is missing {sorted(missing)}")
            return StrategyGrid.from_range(float(entry["min"]), float(entry["max"]), float(entry["step"]))
        if isinstance(entry, list):
            if not entry:
                raise GameDefinitionError("empty grid")
            return StrategyGrid(entry)
    except GameDefinitionError as exc:
        raise GameDefinitionError(str(exc), path=where) from None
    except (TypeError, ValueError) as exc:
        raise GameDefinitionError(f"bad grid: {exc}", path=where) from None
    raise GameDefinitionError("grid must be a point list or {min,max,step}", path=where)


def _parse(entry, dims, where):
    try:
        return parse_expression(entry, dims)
    except ExpressionError as exc:
        raise GameDefinitionError(str(exc), path=where) from None


def _static_from_dict(doc, grids, names):
    payoffs = doc.get("payoffs")
    if not isinstance(payoffs, list) or len(payoffs) != len(grids):
        raise GameDefinitionError(f"payoffs must list {len(grids)} entries", path="payoffs")
    dims = {f"u{p}": g.dim for p, g in enumerate(grids)}
    tensors, sources = [], []
    for i, entry in enumerate(payoffs):
        where = f"payoffs[{i}]"
        if isinstance(entry, list):
            try:
                J = np.array(entry, dtype=float)
            except (TypeError, ValueError):
                raise GameDefinitionError("table must be a rectangular numeric array", path=where) from None
            if J.shape != tuple(g.size for g in grids):
                raise GameDefinitionError(
                    f"dimension mismatch: table shape {J.shape}, grids {tuple(g.size for g in grids)}",
                    path=where,
                )
            tensors.append(J)
            sources.append(None)
        else:
            expr = _parse(entry, dims, where)
            tensors.append(tabulate(expr, grids, path=where))
            sources.append(expr)
    return StaticGame(grids, tensors, sources=sources, names=names)


def _differential_from_dict(doc, grids, names):
    for key in ("dynamics", "terminal", "running", "horizon", "x0", "steps"):
        if key not in doc:
            raise GameDefinitionError(f"missing field {key!r}")
    x0 = doc["x0"]
    if isinstance(x0, (int, float)):
        x0 = [x0]
    d = len(x0)
    dims = {"t": 1, "x": d}
    dims.update({f"u{p}": g.dim for p, g in enumerate(grids)})
    n_players = len(grids)
    if not isinstance(doc["dynamics"], list) or len(doc["dynamics"]) != d:
        raise GameDefinitionError(f"dimension mismatch: dynamics needs {d} entries", path="dynamics")
    dynamics = tuple(_parse(e, dims, f"dynamics[{j}]") for j, e in enumerate(doc["dynamics"]))
    for key in ("terminal", "running"):
        if not isinstance(doc[key], list) or len(doc[key]) != n_players:
            raise GameDefinitionError(f"dimension mismatch: {key} needs {n_players} entries", path=key)
    terminal = tuple(_parse(e, {"x": d}, f"terminal[{i}]") for i, e in enumerate(doc["terminal"]))
    running = []
    for i, e in enumerate(doc["running"]):
        where = f"running[{i}]"
        if isinstance(e, dict):
            unknown = set(e) - set(RUNNING_PARTS)
            if unknown or not e:
                raise GameDefinitionError(f"running components must be among {RUNNING_PARTS}", path=where)
            parts = tuple((name, _parse(e[name], dims, f"{where}.{name}")) for name in RUNNING_PARTS if name in e)
            total = parts[0][1].tree
            for _, part in parts[1:]:
                total = BinOp("+", total, part.tree)
            running.append(RunningPayoff(PayoffExpr(total), parts))
        else:
            running.append(RunningPayoff(_parse(e, dims, where)))
    state_grid = doc.get("state_grid")
    if state_grid is not None:
        if isinstance(state_grid, dict):
            state_grid = [state_grid] * d
        if not isinstance(state_grid, list) or len(state_grid) != d:
            raise GameDefinitionError(f"dimension mismatch: state_grid needs {d} entries", path="state_grid")
        cleaned = []
        for j, sg in enumerate(state_grid):
            if not isinstance(sg, dict) or set(sg) - {"min", "max", "points"}:
                raise GameDefinitionError("state_grid entries take min, max, points", path=f"state_grid[{j}]")
            if "points" in sg and (int(sg["points"]) != sg["points"] or sg["points"] < 2):
                raise GameDefinitionError("points must be an integer >= 2", path=f"state_grid[{j}]")
            if ("min" in sg) != ("max" in sg) or ("min" in sg and not sg["min"] < sg["max"]):
                raise GameDefinitionError("state_grid needs both min < max or neither", path=f"state_grid[{j}]")
            cleaned.append(tuple(sorted((k, v) for k, v in sg.items())))
        state_grid = tuple(cleaned)
    extra = {k: v for k, v in doc.items() if k == "mixed"}
    try:
        return DifferentialGameSpec(
            grids=tuple(grids),
            horizon=float(doc["horizon"]),
            x0=np.array(x0, dtype=float),
            dynamics=dynamics,
            running=tuple(running),
            terminal=terminal,
            steps=doc["steps"],
            state_grid=state_grid,
            names=names,
            extra=extra,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, GameDefinitionError):
            raise
        raise GameDefinitionError(str(exc)) from None


def game_to_dict(game):
    """Canonical document for ``game``; parsing it reproduces an equal game."""
    players = []
    names = game.names or (None,) * len(game.grids)
    for name, g in zip(names, game.grids):
        entry = {"grid": g.to_json()}
        if name is not None:
            entry["name"] = name
        players.append(entry)
    if isinstance(game, StaticGame):
        payoffs = [
            src.to_source() if src is not None else J.tolist() for src, J in zip(game.sources, game.payoffs)
        ]
        return {"kind": "static", "players": players, "payoffs": payoffs}
    running = []
    for r in game.running:
        if r.parts is not None:
            running.append({name: e.to_source() for name, e in r.parts})
        else:
            running.append(r.expr.to_source())
    doc = {
        "kind": "differential",
        "players": players,
        "dynamics": [e.to_source() for e in game.dynamics],
        "running": running,
        "terminal": [e.to_source() for e in game.terminal],
        "horizon": game.horizon,
        "x0": [float(v) for v in game.x0],
        "steps": game.steps,
    }
    if game.state_grid is not None:
        doc["state_grid"] = [dict(sg) for sg in game.state_grid]
    doc.update(game.extra)
    return doc


def dump_game(game) -> str:
    return json.dumps(game_to_dict(game), indent=2, sort_keys=True) + "\n"
