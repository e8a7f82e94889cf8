"""Discrete-time differential inverse Stackelberg games.

Controls are piecewise constant on the uniform grid ``t_k = T k / N`` and the
state is advanced by explicit Euler.  Follower i's punishment level
``V_i(t_k, x)`` is computed by backward dynamic programming on a state
lattice: at each step the follower picks its action first and the leader
answers it (the leader's nonanticipative advantage), with multilinear
interpolation between lattice nodes.
"""

from __future__ import annotations

import itertools
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .game_model import StaticGame, broadcast_indices, symbol_env

DEFAULT_LATTICE_POINTS = 21
LATTICE_PAD = 1.1


class IntegrationError(RuntimeError):
    def __init__(self, step, message="non-finite state"):
        self.step = step
        super().__init__(f"{message} at step {step}")


class LatticeEscapeError(RuntimeError):
    def __init__(self, step, point):
        self.step = step
        self.point = np.asarray(point, dtype=float)
        super().__init__(
            f"Euler image {self.point.tolist()} leaves the state lattice at step {step}; "
            "enlarge state_grid"
        )


@dataclass(frozen=True)
class Trajectory:
    start: int
    times: np.ndarray  # (L,)
    states: np.ndarray  # (L, d)
    z: np.ndarray  # (n+1, L) running-payoff accumulators, z[:, 0] == 0

    @property
    def final_state(self):
        return self.states[-1]

    def row(self, k):
        return k - self.start


# ------------------------------------------------------------- evaluation


def _xcomps(X, ndim):
    """Split an (M, d) point array into per-component arrays of rank ``ndim``."""
    X = np.asarray(X, dtype=float)
    shape = (X.shape[0],) + (1,) * (ndim - 1)
    return [X[:, j].reshape(shape) for j in range(X.shape[1])]


def eval_list(spec, exprs, t, xcomps, actions, shape):
    env = symbol_env(spec.grids, actions, t=t, x=xcomps)
    return [np.broadcast_to(np.asarray(e.evaluate(env), dtype=float), shape) for e in exprs]


def running_exprs(spec):
    return [r.expr for r in spec.running]


def terminal_values(spec, X):
    """sigma_p(x) for every player p at the points X (M, d) -> (n+1, M)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    env = {"x": [X[:, j] for j in range(X.shape[1])]}
    return np.stack([np.broadcast_to(np.asarray(e.evaluate(env), dtype=float), (X.shape[0],)) for e in spec.terminal])


def _step_actions(spec, u0, u, k):
    return [np.asarray(u0[k])] + [np.asarray(p[k]) for p in u]


def check_path(spec, player, path):
    path = tuple(int(a) for a in path)
    if len(path) != spec.steps:
        raise ValueError(f"control path of player {player} has length {len(path)}, expected {spec.steps}")
    size = spec.grids[player].size
    if any(a < 0 or a >= size for a in path):
        raise ValueError(f"control path of player {player} has an index outside 0..{size - 1}")
    return path


def integrate(spec, u0, u, start=0, x_start=None):
    """Euler trajectory from step ``start`` under pure control paths."""
    u0 = check_path(spec, 0, u0)
    u = [check_path(spec, i + 1, p) for i, p in enumerate(u)]
    if len(u) != spec.n_followers:
        raise ValueError(f"expected {spec.n_followers} follower paths")
    x = np.array(spec.x0 if x_start is None else x_start, dtype=float).reshape(-1)
    N, dt = spec.steps, spec.dt
    L = N - start + 1
    states = np.empty((L, spec.d))
    z = np.zeros((spec.n_followers + 1, L))
    states[0] = x
    g_exprs = running_exprs(spec)
    for k in range(start, N):
        row = k - start
        actions = _step_actions(spec, u0, u, k)
        xc = [np.float64(v) for v in states[row]]
        f = eval_list(spec, spec.dynamics, spec.time(k), xc, actions, ())
        g = eval_list(spec, g_exprs, spec.time(k), xc, actions, ())
        states[row + 1] = states[row] + dt * np.array(f)
        z[:, row + 1] = z[:, row] + dt * np.array(g)
        if not (np.all(np.isfinite(states[row + 1])) and np.all(np.isfinite(z[:, row + 1]))):
            raise IntegrationError(k + 1)
    times = np.array([spec.time(k) for k in range(start, N + 1)])
    return Trajectory(start, times, states, z)


def tail_payoffs(spec, traj, k):
    """J_p(t_k, x_k, u0, u) for every player: terminal payoff plus running payoff on [t_k, T]."""
    row = traj.row(k)
    sigma = terminal_values(spec, traj.states[-1:])[:, 0]
    return sigma + (traj.z[:, -1] - traj.z[:, row])


def full_payoffs(spec, traj):
    return tail_payoffs(spec, traj, traj.start)


# ---------------------------------------------------------------- lattice


class StateLattice:
    """Per-step uniform state lattices covering the reachable box.

    The box at step k+1 is the box at step k widened by ``1.1 * dt`` times
    the largest |f| seen over the step-k nodes and every action tuple.
    """

    def __init__(self, spec, points=None):
        self.spec = spec
        N, d, dt = spec.steps, spec.d, spec.dt
        caps = [dict(sg) for sg in spec.state_grid] if spec.state_grid else [{} for _ in range(d)]
        if points is None:
            points = [int(c.get("points", DEFAULT_LATTICE_POINTS)) for c in caps]
        elif np.isscalar(points):
            points = [int(points)] * d
        self.points = list(points)
        lo = spec.x0.astype(float).copy()
        hi = spec.x0.astype(float).copy()
        self.lo, self.hi, self.axes = [], [], []
        sizes = tuple(g.size for g in spec.grids)
        acts = broadcast_indices(sizes, lead=1)
        for k in range(N + 1):
            self._add(lo, hi)
            if k == N:
                break
            nodes = self.nodes(k)
            xc = _xcomps(nodes, 1 + len(sizes))
            f = eval_list(spec, spec.dynamics, spec.time(k), xc, acts, (len(nodes),) + sizes)
            bound = np.array([np.max(np.abs(fj)) for fj in f])
            if not np.all(np.isfinite(bound)):
                raise IntegrationError(k, "non-finite dynamics on the lattice")
            lo = lo - LATTICE_PAD * dt * bound
            hi = hi + LATTICE_PAD * dt * bound
            for j, c in enumerate(caps):
                if "min" in c:
                    lo[j] = max(lo[j], c["min"])
                    hi[j] = min(hi[j], c["max"])

    def _add(self, lo, hi):
        self.lo.append(lo.copy())
        self.hi.append(hi.copy())
        axes = []
        for j in range(len(lo)):
            if hi[j] > lo[j]:
                axes.append(np.linspace(lo[j], hi[j], self.points[j]))
            else:
                axes.append(np.array([lo[j]]))
        self.axes.append(axes)

    def shape(self, k):
        return tuple(len(a) for a in self.axes[k])

    def nodes(self, k):
        grids = np.meshgrid(*self.axes[k], indexing="ij")
        return np.stack([g.reshape(-1) for g in grids], axis=1)

    def interpolate(self, k, values, X):
        """Multilinear interpolation of ``values`` (lattice-shaped) at points X (M, d)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        axes = self.axes[k]
        lows, weights, spans = [], [], []
        for j, ax in enumerate(axes):
            xj = X[:, j]
            lo, hi = ax[0], ax[-1]
            tol = 1e-9 * max(1.0, abs(lo), abs(hi))
            bad = (xj < lo - tol) | (xj > hi + tol) | ~np.isfinite(xj)
            if np.any(bad):
                raise LatticeEscapeError(k, X[int(np.argmax(bad))])
            if len(ax) == 1:
                lows.append(np.zeros(len(xj), dtype=np.int64))
                weights.append(np.zeros(len(xj)))
                spans.append(1)
                continue
            h = (hi - lo) / (len(ax) - 1)
            s = (xj - lo) / h
            i0 = np.clip(np.floor(s), 0, len(ax) - 2).astype(np.int64)
            lows.append(i0)
            weights.append(np.clip(s - i0, 0.0, 1.0))
            spans.append(2)
        out = np.zeros(X.shape[0])
        for corner in itertools.product(*(range(s) for s in spans)):
            w = np.ones(X.shape[0])
            idx = []
            for j, c in enumerate(corner):
                if spans[j] == 1:
                    idx.append(lows[j])
                    continue
                w = w * (weights[j] if c else 1.0 - weights[j])
                idx.append(lows[j] + c)
            out = out + w * values[tuple(idx)]
        return out


# ------------------------------------------------------------ value tables


def _others_map(spec, i, frozen):
    frozen = [tuple(int(a) for a in p) for p in frozen]
    if len(frozen) != spec.n_followers - 1:
        raise ValueError(f"need {spec.n_followers - 1} frozen follower paths")
    out = {}
    it = iter(frozen)
    for j in range(1, spec.n_followers + 1):
        if j != i:
            out[j] = check_path(spec, j, next(it))
    return out


class ValueTable:
    """Lower value V_i(t_k, x) of the leader-vs-follower-i game with u_{-i} frozen.

    ``values[k]`` is lattice shaped; ``best_action[k]`` (follower maximizer)
    and ``response[k]`` (leader minimizer per follower action) are the stored
    feedback policies at the nodes.
    """

    def __init__(self, spec, i, frozen, lattice=None):
        if not 1 <= i <= spec.n_followers:
            raise ValueError(f"follower index {i} out of range")
        self.spec = spec
        self.i = i
        self.others = _others_map(spec, i, frozen)
        self.lattice = lattice if lattice is not None else StateLattice(spec)
        self._cache = {}
        N = spec.steps
        self.values = [None] * (N + 1)
        self.best_action = [None] * (N + 1)
        self.response = [None] * (N + 1)
        nodes = self.lattice.nodes(N)
        self.values[N] = terminal_values(spec, nodes)[i].reshape(self.lattice.shape(N))
        for k in range(N - 1, -1, -1):
            nodes = self.lattice.nodes(k)
            Q = self.step_matrices(k, nodes)
            mins = Q.min(axis=1)
            shape = self.lattice.shape(k)
            self.values[k] = mins.max(axis=1).reshape(shape)
            self.best_action[k] = np.argmax(mins, axis=1).reshape(shape)
            self.response[k] = np.argmin(Q, axis=1).reshape(shape + (Q.shape[2],))

    def _actions(self, k, leader_axis, follower_axis):
        acts = []
        for p in range(self.spec.n_followers + 1):
            if p == 0:
                acts.append(leader_axis)
            elif p == self.i:
                acts.append(follower_axis)
            else:
                acts.append(np.asarray(self.others[p][k]))
        return acts

    def continuation(self, k, X):
        """V_i(t_k, .) at points X: exact terminal payoff at k = N, interpolation otherwise."""
        if k == self.spec.steps:
            return terminal_values(self.spec, X)[self.i]
        return self.lattice.interpolate(k, self.values[k], X)

    def step_matrices(self, k, X, follower_actions=None):
        """Q[m, a0, a_i] = dt * g_i + V_i(t_{k+1}, x_m + dt * f) for points X (M, d).

        ``follower_actions`` optionally overrides the other followers' step-k actions.
        """
        spec = self.spec
        X = np.atleast_2d(np.asarray(X, dtype=float))
        M, K0, Ki = X.shape[0], spec.grids[0].size, spec.grids[self.i].size
        shape = (M, K0, Ki)
        acts = self._actions(k, np.arange(K0).reshape(1, K0, 1), np.arange(Ki).reshape(1, 1, Ki))
        if follower_actions is not None:
            for p, a in enumerate(follower_actions, start=1):
                if p != self.i:
                    acts[p] = np.asarray(a)
        xc = _xcomps(X, 3)
        t = spec.time(k)
        f = eval_list(spec, spec.dynamics, t, xc, acts, shape)
        g = eval_list(spec, [spec.running[self.i].expr], t, xc, acts, shape)[0]
        nxt = np.stack([xc[j] + spec.dt * f[j] for j in range(spec.d)], axis=-1).reshape(-1, spec.d)
        try:
            cont = self.continuation(k + 1, nxt).reshape(shape)
        except LatticeEscapeError as exc:
            raise LatticeEscapeError(k + 1, exc.point) from None
        return spec.dt * g + cont

    def value_at(self, k, x):
        """V_i(t_k, x) re-derived by one backup from the step-(k+1) table."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if k == self.spec.steps:
            return float(terminal_values(self.spec, x[None, :])[self.i, 0])
        key = (k, x.tobytes())
        v = self._cache.get(key)
        if v is None:
            Q = self.step_matrices(k, x[None, :])[0]
            v = float(Q.min(axis=0).max())
            self._cache[key] = v
        return v

    def punish(self, k, x, follower_actions):
        """Leader action minimizing follower i's continuation given the observed step-k actions."""
        x = np.asarray(x, dtype=float).reshape(-1)
        Q = self.step_matrices(k, x[None, :], follower_actions)[0]
        return int(np.argmin(Q[:, follower_actions[self.i - 1]]))

    def node_residual(self):
        """Largest gap between stored node values and a fresh backup at each node."""
        worst = 0.0
        for k in range(self.spec.steps):
            nodes = self.lattice.nodes(k)
            fresh = self.step_matrices(k, nodes).min(axis=1).max(axis=1)
            worst = max(worst, float(np.max(np.abs(fresh - self.values[k].reshape(-1)))))
        return worst


def lower_value_function(spec, i, frozen=(), lattice=None):
    return ValueTable(spec, i, frozen, lattice)


def _frozen_for(u, i):
    return [p for j, p in enumerate(u, start=1) if j != i]


def value_tables_for(spec, u, lattice=None):
    lattice = lattice if lattice is not None else StateLattice(spec)
    return [ValueTable(spec, i, _frozen_for(u, i), lattice) for i in range(1, spec.n_followers + 1)]


# ------------------------------------------------------------ constraint set


@dataclass
class ConstraintCheck:
    member: bool
    margins: np.ndarray  # (n, N+1)
    eps: float
    lipschitz: float  # largest |margin change| per unit time along the trajectory
    allowance: float  # lipschitz * dt

    @property
    def worst(self):
        return float(self.margins.min())


def _margins(spec, traj, tables):
    J = full_payoffs(spec, traj)
    margins = np.zeros((spec.n_followers, spec.steps + 1))
    for i, table in enumerate(tables, start=1):
        for k in range(spec.steps + 1):
            row = traj.row(k)
            w = traj.z[i, row] + table.value_at(k, traj.states[row])
            margins[i - 1, k] = J[i] - w
    return margins


def constraint_check(spec, u0, u, tables=None, eps_c=1e-9, traj=None):
    """Margins J_i(t_k, x_k) - V_i(t_k, x_k) along the trajectory of (u0, u)."""
    if tables is None:
        tables = value_tables_for(spec, u)
    if traj is None:
        traj = integrate(spec, u0, u)
    margins = _margins(spec, traj, tables)
    lip = 0.0
    if spec.steps >= 1:
        lip = float(np.max(np.abs(np.diff(margins, axis=1)))) / spec.dt
    return ConstraintCheck(bool(np.all(margins >= -eps_c)), margins, eps_c, lip, lip * spec.dt)


# ------------------------------------------------------------------ search


@dataclass
class DiffSolutionReport:
    leader_path: Optional[tuple]
    profile: Optional[tuple]
    leader_payoff: Optional[float]
    follower_payoffs: Optional[list]
    margins: Optional[np.ndarray]
    feasible: bool
    optimal: bool
    stats: dict = field(default_factory=dict)
    trajectory: Optional[Trajectory] = None
    tables: Optional[list] = None
    check: Optional[ConstraintCheck] = None


class _BudgetExceeded(Exception):
    pass


class _Search:
    """Memoized depth-first search over step action tuples.

    A subproblem is (k, x_k, z_k, W_k) with W_i = max_{j<=k} z_i(j) + V_i(t_j, x_j);
    the complete path is admissible iff J_i - W_i >= -eps for all i, which is
    exactly the margin test of :func:`constraint_check`.
    """

    def __init__(self, spec, tables, allowed, eps, budget, counters):
        self.spec = spec
        self.tables = tables
        self.allowed = allowed
        self.eps = eps
        self.budget = budget
        self.counters = counters
        self.memo = {}
        self.prefix = []
        self.best = None  # (J0, path tuple) best complete candidate seen
        self.g_exprs = running_exprs(spec)

    def _record(self, value, suffix):
        if value is None:
            return
        path = tuple(self.prefix) + suffix
        if self.best is None or value > self.best[0]:
            self.best = (value, path)

    def run(self):
        spec = self.spec
        x = spec.x0.astype(float).copy()
        z = np.zeros(spec.n_followers + 1)
        W = np.array([z[i] + t.value_at(0, x) for i, t in enumerate(self.tables, start=1)])
        return self._best(0, x, z, W)

    def _best(self, k, x, z, W):
        key = (k, x.tobytes(), z.tobytes(), W.tobytes())
        if key in self.memo:
            self.counters["memo_hits"] += 1
            res = self.memo[key]
            if res is not None:
                self._record(res[0], res[1])
            return res
        self.counters["expansions"] += 1
        if self.counters["expansions"] > self.budget:
            raise _BudgetExceeded
        spec = self.spec
        if k == spec.steps:
            J = terminal_values(spec, x[None, :])[:, 0] + z
            ok = all(J[i] - W[i - 1] >= -self.eps for i in range(1, spec.n_followers + 1))
            res = (float(J[0]), ()) if ok else None
            if res is not None:
                self._record(res[0], ())
            self.memo[key] = res
            return res
        tuples = self.allowed(k)
        T = len(tuples)
        acts = [tuples[:, p] for p in range(tuples.shape[1])]
        xc = [np.float64(v) for v in x]
        t = spec.time(k)
        f = eval_list(spec, spec.dynamics, t, xc, acts, (T,))
        g = eval_list(spec, self.g_exprs, t, xc, acts, (T,))
        nxt = np.stack([x[j] + spec.dt * f[j] for j in range(spec.d)], axis=1)
        znext = np.stack([z[p] + spec.dt * g[p] for p in range(spec.n_followers + 1)], axis=1)
        res = None
        for r in range(T):
            x1 = nxt[r]
            z1 = znext[r]
            W1 = np.array(
                [max(W[i - 1], z1[i] + tab.value_at(k + 1, x1)) for i, tab in enumerate(self.tables, start=1)]
            )
            step = tuple(int(a) for a in tuples[r])
            self.prefix.append(step)
            try:
                sub = self._best(k + 1, x1, z1, W1)
            finally:
                self.prefix.pop()
            if sub is not None and (res is None or sub[0] > res[0]):
                res = (sub[0], (step,) + sub[1])
        self.memo[key] = res
        return res


def _split(spec, path):
    u0 = tuple(s[0] for s in path)
    u = tuple(tuple(s[p] for s in path) for p in range(1, spec.n_followers + 1))
    return u0, u


def solve_inverse_diff(spec, eps_c=1e-9, budget=5_000_000, lattice=None):
    """Leader-best piecewise-constant control tuple subject to the trajectory constraints.

    Ties go to the lexicographically first tuple in step-major order.
    ``optimal`` is False when the expansion budget ran out.
    """
    lattice = lattice if lattice is not None else StateLattice(spec)
    n = spec.n_followers
    sizes = [g.size for g in spec.grids]
    counters = {"expansions": 0, "memo_hits": 0, "follower_profiles": 0}
    best = None  # (J0, path, tables)
    optimal = True
    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 10 * spec.steps + 1000))
    try:
        if n == 1:
            tables = [ValueTable(spec, 1, (), lattice)]
            all_tuples = np.array(list(itertools.product(*(range(s) for s in sizes))), dtype=np.int64)
            search = _Search(spec, tables, lambda k: all_tuples, eps_c, budget, counters)
            counters["follower_profiles"] = 1
            try:
                res = search.run()
                if res is not None:
                    best = (res[0], res[1], tables)
            except _BudgetExceeded:
                optimal = False
                if search.best is not None:
                    best = (search.best[0], search.best[1], tables)
        else:
            table_cache = {}
            follower_paths = [list(itertools.product(range(s), repeat=spec.steps)) for s in sizes[1:]]
            leader = np.arange(sizes[0], dtype=np.int64)[:, None]
            try:
                for u in itertools.product(*follower_paths):
                    counters["follower_profiles"] += 1
                    tables = []
                    for i in range(1, n + 1):
                        key = (i, tuple(_frozen_for(u, i)))
                        if key not in table_cache:
                            table_cache[key] = ValueTable(spec, i, key[1], lattice)
                        tables.append(table_cache[key])

                    def allowed(k, u=u):
                        tail = np.array([p[k] for p in u], dtype=np.int64)
                        return np.hstack([leader, np.broadcast_to(tail, (len(leader), n))])

                    search = _Search(spec, tables, allowed, eps_c, budget, counters)
                    try:
                        res = search.run()
                    except _BudgetExceeded:
                        if search.best is not None:
                            best = _better(best, (search.best[0], search.best[1], tables))
                        raise
                    if res is not None:
                        best = _better(best, (res[0], res[1], tables))
            except _BudgetExceeded:
                optimal = False
    finally:
        sys.setrecursionlimit(old_limit)

    stats = dict(counters, budget=budget, lattice_points=list(lattice.points))
    if best is None:
        return DiffSolutionReport(None, None, None, None, None, False, optimal, stats)
    _, path, tables = best
    u0, u = _split(spec, path)
    traj = integrate(spec, u0, u)
    check = constraint_check(spec, u0, u, tables, eps_c, traj)
    payoffs = full_payoffs(spec, traj)
    stats["lipschitz_estimate"] = check.lipschitz
    stats["discretization_allowance"] = check.allowance
    return DiffSolutionReport(
        leader_path=u0,
        profile=u,
        leader_payoff=float(payoffs[0]),
        follower_payoffs=[float(v) for v in payoffs[1:]],
        margins=check.margins,
        feasible=check.member,
        optimal=optimal,
        stats=stats,
        trajectory=traj,
        tables=tables,
        check=check,
    )


def _better(cur, cand):
    if cur is None or cand[0] > cur[0] or (cand[0] == cur[0] and cand[1] < cur[1]):
        return cand
    return cur


# ------------------------------------------------------------ punishment


class NonanticipativeStrategy:
    """Leader strategy: follow u0* while followers conform, punish the first deviator.

    At step k the followers' step-k actions are observed before the leader
    acts.  Play state is per instance; call :meth:`reset` between play-outs.
    """

    def __init__(self, spec, leader_path, profile, tables):
        self.spec = spec
        self.leader_path = tuple(leader_path)
        self.profile = tuple(tuple(p) for p in profile)
        self.tables = list(tables)
        self.reset()

    def reset(self):
        self.conforming = [True] * self.spec.n_followers
        self.first_deviation = [None] * self.spec.n_followers
        self.punished = None
        self.tau = None

    def act(self, k, x, actions):
        actions = tuple(int(a) for a in actions)
        for i, a in enumerate(actions, start=1):
            if self.conforming[i - 1] and a != self.profile[i - 1][k]:
                self.conforming[i - 1] = False
                self.first_deviation[i - 1] = k
                if self.punished is None:
                    self.punished = i
                    self.tau = k
        if self.punished is None:
            return self.leader_path[k]
        return self.tables[self.punished - 1].punish(k, x, actions)


def build_punishment_diff(spec, leader_path, profile, tables=None, eps_c=1e-9):
    if tables is None:
        tables = value_tables_for(spec, profile)
    check = constraint_check(spec, leader_path, profile, tables, eps_c)
    if not check.member:
        i, k = np.unravel_index(int(np.argmin(check.margins)), check.margins.shape)
        raise ValueError(
            f"solution violates the follower constraints: follower {i + 1} at step {k} "
            f"has margin {check.margins[i, k]:.6g}"
        )
    return NonanticipativeStrategy(spec, leader_path, profile, tables)


@dataclass
class PlayResult:
    trajectory: Trajectory
    payoffs: np.ndarray
    leader_path: tuple
    deviations: list  # first divergent step per follower (None = conformed)
    punished: Optional[int]


def simulate_play(spec, strategy, follower_paths):
    u = [check_path(spec, i + 1, p) for i, p in enumerate(follower_paths)]
    strategy.reset()
    x = spec.x0.astype(float).copy()
    leader = []
    for k in range(spec.steps):
        a0 = strategy.act(k, x, [p[k] for p in u])
        leader.append(a0)
        # advance one Euler step with the same arithmetic as integrate()
        actions = [np.asarray(a0)] + [np.asarray(p[k]) for p in u]
        xc = [np.float64(v) for v in x]
        f = eval_list(spec, spec.dynamics, spec.time(k), xc, actions, ())
        x = x + spec.dt * np.array(f)
    traj = integrate(spec, leader, u)
    return PlayResult(traj, full_payoffs(spec, traj), tuple(leader), list(strategy.first_deviation), strategy.punished)


def deviation_paths(spec, i, base, exhaustive_limit=10_000):
    """Alternatives to ``base`` for follower i: every path if few enough, else single switches."""
    K, N = spec.grids[i].size, spec.steps
    base = tuple(base)
    if K**N <= exhaustive_limit:
        for path in itertools.product(range(K), repeat=N):
            if path != base:
                yield path
        return
    for s in range(N):
        for a in range(K):
            path = base[:s] + (a,) * (N - s)
            if path != base:
                yield path


@dataclass
class DeviationSweep:
    rows: list  # (follower, path, deviator payoff, equilibrium payoff, profit)
    max_profit: float
    exhaustive: bool
    constant: float  # max(0, max_profit) / dt


def deviation_sweep(spec, strategy, exhaustive_limit=10_000):
    eq = simulate_play(spec, strategy, strategy.profile)
    rows = []
    exhaustive = True
    for i in range(1, spec.n_followers + 1):
        exhaustive &= spec.grids[i].size ** spec.steps <= exhaustive_limit
        for path in deviation_paths(spec, i, strategy.profile[i - 1], exhaustive_limit):
            u = list(strategy.profile)
            u[i - 1] = path
            res = simulate_play(spec, strategy, u)
            profit = float(res.payoffs[i] - eq.payoffs[i])
            rows.append((i, path, float(res.payoffs[i]), float(eq.payoffs[i]), profit))
    max_profit = max((r[4] for r in rows), default=0.0)
    return DeviationSweep(rows, max_profit, exhaustive, max(0.0, max_profit) / spec.dt)


# ------------------------------------------------------------ reductions


def induced_static_game(spec):
    """One-step game: J_p(a) = tail payoff of the N = 1 trajectory under action tuple a."""
    one = spec.with_steps(1)
    sizes = tuple(g.size for g in spec.grids)
    tensors = np.empty((len(sizes),) + sizes)
    for a in itertools.product(*(range(s) for s in sizes)):
        traj = integrate(one, (a[0],), [(b,) for b in a[1:]])
        tensors[(slice(None),) + a] = tail_payoffs(one, traj, 0)
    return StaticGame(spec.grids, list(tensors))
