"""Mixed-strategy relaxation of the differential game.

Players use step-wise probability weights over their control grids; the
state follows the expectation of the dynamics under the product measure.
Follower i's upper value ``V_i^+`` comes from a backward recursion of mixed
one-step matrix games, and a damped iteration looks for a follower profile
that reproduces itself under the best-response map built from those values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diffgame import (
    IntegrationError,
    LatticeEscapeError,
    StateLattice,
    Trajectory,
    _xcomps,
    eval_list,
    running_exprs,
    terminal_values,
)
from .zerosum import mixed_matrix_value

WEIGHT_TOL = 1e-12
# slack when deciding whether a follower's current step weights are already a best response
BEST_RESPONSE_TOL = 1e-12


def _normalize(w):
    w = np.clip(np.asarray(w, dtype=float), 0.0, None)
    w = w / w.sum(axis=-1, keepdims=True)
    # push rounding residue into the largest entry of each row
    rows = np.atleast_2d(w)
    for r in rows:
        r[np.argmax(r)] += 1.0 - r.sum()
    return rows.reshape(w.shape)


class MixedControlPath:
    """Per-step probability weights over one player's control grid, shape (N, K)."""

    __slots__ = ("weights",)

    def __init__(self, weights):
        w = np.array(weights, dtype=float)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
            raise ValueError("mixed path weights must have shape (steps, grid size)")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("mixed path weights must be finite and nonnegative")
        if np.any(np.abs(w.sum(axis=1) - 1.0) > WEIGHT_TOL):
            raise ValueError("mixed path weights must sum to 1 at every step")
        w.setflags(write=False)
        self.weights = w

    @classmethod
    def point_mass(cls, path, size):
        w = np.zeros((len(path), size))
        w[np.arange(len(path)), list(path)] = 1.0
        return cls(w)

    @classmethod
    def uniform(cls, steps, size):
        return cls(np.full((steps, size), 1.0 / size))

    @classmethod
    def constant(cls, weights, steps):
        w = _normalize(np.asarray(weights, dtype=float))
        return cls(np.tile(w, (steps, 1)))

    @property
    def steps(self):
        return self.weights.shape[0]

    @property
    def size(self):
        return self.weights.shape[1]

    def __getitem__(self, k):
        return self.weights[k]

    def __eq__(self, other):
        return isinstance(other, MixedControlPath) and np.array_equal(self.weights, other.weights)

    def __repr__(self):
        return f"MixedControlPath(steps={self.steps}, size={self.size})"

    def mix(self, other, lam):
        return MixedControlPath(_normalize((1.0 - lam) * self.weights + lam * other.weights))

    def tv_distance(self, other):
        """Largest total-variation distance over steps."""
        return float(np.max(0.5 * np.abs(self.weights - other.weights).sum(axis=1)))

    def to_json(self):
        return self.weights.tolist()


def _check_paths(spec, mu0, mu):
    mu = list(mu)
    if len(mu) != spec.n_followers:
        raise ValueError(f"expected {spec.n_followers} follower mixed paths")
    for p, m in enumerate([mu0] + mu):
        if m.steps != spec.steps or m.size != spec.grids[p].size:
            raise ValueError(f"mixed path of player {p} has shape {m.weights.shape}")
    return mu


def _support(w):
    idx = np.flatnonzero(w > 0)
    return idx, w[idx]


def _expectation(spec, exprs, t, xc, supports, lead):
    """Expectation of each expression over the product of all players' supports."""
    return _expectation_keep(spec, exprs, t, xc, supports, keep=(), lead=lead)


def _step_supports(spec, i, other_weights):
    """Full grids for the leader and follower i, supports of the frozen measures elsewhere."""
    supports = []
    for p in range(spec.n_followers + 1):
        if p in (0, i):
            size = spec.grids[p].size
            supports.append((np.arange(size), np.ones(size)))
        else:
            supports.append(_support(np.asarray(other_weights(p), dtype=float)))
    return supports


def relaxed_integrate(spec, mu0, mu):
    """Euler trajectory driven by the expected dynamics under the step measures."""
    mu = _check_paths(spec, mu0, mu)
    N, dt = spec.steps, spec.dt
    states = np.empty((N + 1, spec.d))
    z = np.zeros((spec.n_followers + 1, N + 1))
    states[0] = spec.x0
    g_exprs = running_exprs(spec)
    for k in range(N):
        supports = [_support(m[k]) for m in [mu0] + mu]
        xc = [np.float64(v) for v in states[k]]
        f = _expectation(spec, spec.dynamics, spec.time(k), xc, supports, 0)
        g = _expectation(spec, g_exprs, spec.time(k), xc, supports, 0)
        states[k + 1] = states[k] + dt * np.array(f)
        z[:, k + 1] = z[:, k] + dt * np.array(g)
        if not (np.all(np.isfinite(states[k + 1])) and np.all(np.isfinite(z[:, k + 1]))):
            raise IntegrationError(k + 1)
    times = np.array([spec.time(k) for k in range(N + 1)])
    return Trajectory(0, times, states, z)


def relaxed_payoffs(spec, traj, k=0):
    sigma = terminal_values(spec, traj.states[-1:])[:, 0]
    return sigma + (traj.z[:, -1] - traj.z[:, k])


# ----------------------------------------------------------------- Isaacs


@dataclass(frozen=True)
class IsaacsResult:
    minmax: float
    maxmin: float
    gap: float
    matrix: np.ndarray


def _frozen_weights(spec, i, frozen):
    """Map follower index -> weight vector (or MixedControlPath) for j != i."""
    frozen = list(frozen)
    if len(frozen) != spec.n_followers - 1:
        raise ValueError(f"need {spec.n_followers - 1} frozen follower measures")
    out = {}
    it = iter(frozen)
    for j in range(1, spec.n_followers + 1):
        if j != i:
            out[j] = next(it)
    return out


def isaacs_check(spec, t, x, s, frozen, i, method="exact-LP", tolerance=1e-9):
    """Mixed min-max and max-min of <s, f> + g_i with the other followers' measures frozen."""
    if not 1 <= i <= spec.n_followers:
        raise ValueError(f"follower index {i} out of range")
    others = _frozen_weights(spec, i, frozen)
    s = np.asarray(s, dtype=float).reshape(-1)
    if s.size != spec.d:
        raise ValueError(f"s must have {spec.d} components")
    supports = _step_supports(spec, i, lambda j: others[j])
    xc = [np.float64(v) for v in np.asarray(x, dtype=float).reshape(-1)]
    exprs = list(spec.dynamics) + [spec.running[i].expr]
    vals = _expectation_keep(spec, exprs, t, xc, supports, keep=(0, i))
    A = sum(s[j] * vals[j] for j in range(spec.d)) + vals[-1]
    sol = mixed_matrix_value(A, method=method, tolerance=tolerance)
    minmax, maxmin = sol.upper_bound, sol.lower_bound
    return IsaacsResult(minmax, maxmin, abs(minmax - maxmin), A)


def _expectation_keep(spec, exprs, t, xc, supports, keep, lead=0):
    """Like _expectation but only averages over players not in ``keep``."""
    n_players = len(supports)
    acts, wt = [], None
    for p, (idx, w) in enumerate(supports):
        shape = [1] * (lead + n_players)
        shape[lead + p] = len(idx)
        acts.append(idx.reshape(shape))
        if p not in keep:
            wp = w.reshape(shape)
            wt = wp if wt is None else wt * wp
    shape = tuple(np.broadcast_shapes(*(a.shape for a in acts), *(np.shape(c) for c in xc)))
    vals = eval_list(spec, exprs, t, xc, acts, shape)
    axes = tuple(lead + p for p in range(n_players) if p not in keep)
    if wt is None:
        return [np.array(v) for v in vals]
    return [np.sum(wt * v, axis=axes) for v in vals]


# ------------------------------------------------------------ upper values


class UpperValueTable:
    """V_i^+ on the state lattice via mixed one-step games.

    Entries of the step game at x are ``dt * E g_i + V_i^+(t_{k+1}, x + dt * E f)``
    with the expectation over the other followers' step measures and pure
    (a0, a_i).  ``pure=True`` restricts both sides to pure step strategies
    (min over a0 of max over a_i).
    """

    def __init__(self, spec, i, frozen, lattice=None, pure=False, method="auto", tolerance=1e-9):
        if not 1 <= i <= spec.n_followers:
            raise ValueError(f"follower index {i} out of range")
        self.spec = spec
        self.i = i
        self.pure = pure
        self.method = method
        self.tolerance = tolerance
        self.others = {j: m for j, m in _frozen_weights(spec, i, frozen).items()}
        for j, m in self.others.items():
            if m.steps != spec.steps or m.size != spec.grids[j].size:
                raise ValueError(f"frozen mixed path of follower {j} has the wrong shape")
        self.lattice = lattice if lattice is not None else StateLattice(spec)
        self._cache = {}
        N = spec.steps
        self.values = [None] * (N + 1)
        self.leader_mixed = [None] * (N + 1)
        self.follower_mixed = [None] * (N + 1)
        self.values[N] = terminal_values(spec, self.lattice.nodes(N))[i].reshape(self.lattice.shape(N))
        for k in range(N - 1, -1, -1):
            nodes = self.lattice.nodes(k)
            Q = self.step_matrices(k, nodes)
            vals, ps, qs = [], [], []
            for A in Q:
                v, p, q = self._solve(A)
                vals.append(v)
                ps.append(p)
                qs.append(q)
            shape = self.lattice.shape(k)
            self.values[k] = np.array(vals).reshape(shape)
            self.leader_mixed[k] = np.array(ps).reshape(shape + (Q.shape[1],))
            self.follower_mixed[k] = np.array(qs).reshape(shape + (Q.shape[2],))

    def _solve(self, A):
        if self.pure:
            row_max = A.max(axis=1)
            a0 = int(np.argmin(row_max))
            a1 = int(np.argmax(A[a0]))
            p = np.zeros(A.shape[0])
            q = np.zeros(A.shape[1])
            p[a0] = 1.0
            q[a1] = 1.0
            return float(row_max[a0]), p, q
        sol = mixed_matrix_value(A, method=self.method, tolerance=self.tolerance)
        return sol.value, sol.minimizer_mixed, sol.maximizer_mixed

    def continuation(self, k, X):
        if k == self.spec.steps:
            return terminal_values(self.spec, X)[self.i]
        return self.lattice.interpolate(k, self.values[k], X)

    def step_matrices(self, k, X):
        spec = self.spec
        X = np.atleast_2d(np.asarray(X, dtype=float))
        supports = _step_supports(spec, self.i, lambda j: self.others[j][k])
        ndim = 1 + len(supports)
        xc = _xcomps(X, ndim)
        exprs = list(spec.dynamics) + [spec.running[self.i].expr]
        vals = _expectation_keep(spec, exprs, spec.time(k), xc, supports, keep=(0, self.i), lead=1)
        shape = (X.shape[0], spec.grids[0].size, spec.grids[self.i].size)
        vals = [np.broadcast_to(v, shape) for v in vals]
        f, g = vals[:-1], vals[-1]
        nxt = np.stack([np.broadcast_to(X[:, j].reshape(-1, 1, 1), shape) + spec.dt * f[j] for j in range(spec.d)], axis=-1)
        try:
            cont = self.continuation(k + 1, nxt.reshape(-1, spec.d)).reshape(shape)
        except LatticeEscapeError as exc:
            raise LatticeEscapeError(k + 1, exc.point) from None
        return spec.dt * g + cont

    def step_game(self, k, x):
        """(matrix, value, leader weights, follower weights) of the step game at (k, x)."""
        x = np.asarray(x, dtype=float).reshape(-1)
        key = (k, x.tobytes())
        hit = self._cache.get(key)
        if hit is None:
            A = self.step_matrices(k, x[None, :])[0]
            hit = (A,) + self._solve(A)
            self._cache[key] = hit
        return hit

    def value_at(self, k, x):
        if k == self.spec.steps:
            x = np.asarray(x, dtype=float).reshape(1, -1)
            return float(terminal_values(self.spec, x)[self.i, 0])
        return float(self.step_game(k, x)[1])


def bellman_upper_value(spec, i, frozen=(), lattice=None, pure=False, method="auto", tolerance=1e-9):
    """Upper-value table of follower i; the stored maximizer weights are the step strategies."""
    return UpperValueTable(spec, i, frozen, lattice, pure=pure, method=method, tolerance=tolerance)


def _others_of(mu, i):
    return [m for j, m in enumerate(mu, start=1) if j != i]


def upper_tables_for(spec, mu, lattice=None, method="auto"):
    lattice = lattice if lattice is not None else StateLattice(spec)
    return [UpperValueTable(spec, i, _others_of(mu, i), lattice, method=method) for i in range(1, spec.n_followers + 1)]


# ------------------------------------------------------------- response map


def g_map_response(spec, mu0, mu, lattice=None, tables=None):
    """Follower profile obtained by rolling each follower's best step responses forward.

    For follower i the state is advanced under (mu0, candidate mu_i', mu_{-i});
    at each step the current weights are kept when they are already a best
    response to mu0's step weights in the step game, otherwise the
    smallest-index pure best response is installed.
    """
    mu = _check_paths(spec, mu0, mu)
    lattice = lattice if lattice is not None else StateLattice(spec)
    if tables is None:
        tables = upper_tables_for(spec, mu, lattice)
    out = []
    for i in range(1, spec.n_followers + 1):
        table = tables[i - 1]
        x = spec.x0.astype(float).copy()
        new = np.array(mu[i - 1].weights)
        for k in range(spec.steps):
            A = table.step_game(k, x)[0]
            r = mu0[k] @ A
            best = r.max()
            cur = new[k] @ r
            if not cur >= best - BEST_RESPONSE_TOL * max(1.0, abs(best)):
                new[k] = 0.0
                new[k, int(np.argmax(r))] = 1.0
            supports = [_support(m[k]) for m in [mu0] + [new if j == i else mu[j - 1].weights for j in range(1, spec.n_followers + 1)]]
            xc = [np.float64(v) for v in x]
            f = _expectation(spec, spec.dynamics, spec.time(k), xc, supports, 0)
            x = x + spec.dt * np.array(f)
        out.append(MixedControlPath(new))
    return out


# ------------------------------------------------------------ certificates


@dataclass
class FixedPointCertificate:
    iterations: int
    residuals: list  # max_k TV(mu_i(k), G(mu)_i(k)) per iteration
    step_sizes: list  # max_k TV between successive iterates
    margins: np.ndarray  # (n, N+1)
    steps: int
    converged: bool
    tolerance: float
    best_residual: float
    leader_payoff: float = float("nan")
    follower_payoffs: list = field(default_factory=list)
    initial_values: list = field(default_factory=list)  # V_i^+(0, x0)
    hypotheses: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "iterations": self.iterations,
            "residuals": [float(r) for r in self.residuals],
            "step_sizes": [float(r) for r in self.step_sizes],
            "margins": np.asarray(self.margins).tolist(),
            "steps": self.steps,
            "converged": self.converged,
            "tolerance": self.tolerance,
            "best_residual": self.best_residual,
            "leader_payoff": self.leader_payoff,
            "follower_payoffs": list(self.follower_payoffs),
            "initial_values": list(self.initial_values),
            "hypotheses": self.hypotheses,
        }


def mixed_margins(spec, mu0, mu, tables):
    """Per (i, k): E-tail payoff of follower i minus V_i^+(t_k, x_k)."""
    traj = relaxed_integrate(spec, mu0, mu)
    J = relaxed_payoffs(spec, traj)
    margins = np.zeros((spec.n_followers, spec.steps + 1))
    for i, table in enumerate(tables, start=1):
        for k in range(spec.steps + 1):
            margins[i - 1, k] = J[i] - (traj.z[i, k] + table.value_at(k, traj.states[k]))
    return margins, traj, J


def fixed_point_search(spec, mu0, max_iterations=200, tolerance=1e-9, start=None, lattice=None, damping=None):
    """Averaged iteration mu <- (1 - lam) mu + lam G(mu), lam = 1/(it+1) by default.

    The first update (it = 0) replaces ``start`` by its response, so later
    iterates are running averages of responses.  Returns the iterate with the
    smallest measured residual and its certificate.
    """
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    lattice = lattice if lattice is not None else StateLattice(spec)
    if start is None:
        start = [MixedControlPath.uniform(spec.steps, g.size) for g in spec.grids[1:]]
    mu = _check_paths(spec, mu0, start)
    residuals, step_sizes = [], []
    best = None  # (residual, mu, tables)
    converged = False
    for it in range(max_iterations):
        tables = upper_tables_for(spec, mu, lattice)
        resp = g_map_response(spec, mu0, mu, lattice, tables)
        res = max(m.tv_distance(r) for m, r in zip(mu, resp))
        residuals.append(res)
        if best is None or res < best[0]:
            best = (res, mu, tables)
        if res <= tolerance:
            converged = True
            break
        lam = damping(it) if damping is not None else 1.0 / (it + 1)
        new = [m.mix(r, lam) for m, r in zip(mu, resp)]
        step_sizes.append(max(a.tv_distance(b) for a, b in zip(mu, new)))
        mu = new
    res, mu, tables = best
    margins, traj, J = mixed_margins(spec, mu0, mu, tables)
    cert = FixedPointCertificate(
        iterations=len(residuals),
        residuals=residuals,
        step_sizes=step_sizes,
        margins=margins,
        steps=spec.steps,
        converged=converged,
        tolerance=tolerance,
        best_residual=res,
        leader_payoff=float(J[0]),
        follower_payoffs=[float(v) for v in J[1:]],
        initial_values=[t.value_at(0, spec.x0) for t in tables],
        hypotheses=hypothesis_flags(spec, lattice),
    )
    return mu, cert


def leader_sweep(spec, candidates, max_iterations=200, tolerance=1e-9, margin_tol=1e-6, lattice=None):
    """Run the fixed-point search for each leader candidate; best certified leader payoff wins.

    No optimality claim beyond the supplied list.  Returns (best index or
    None, list of (mu, certificate)).
    """
    lattice = lattice if lattice is not None else StateLattice(spec)
    runs = []
    best = None
    for c, mu0 in enumerate(candidates):
        mu, cert = fixed_point_search(spec, mu0, max_iterations, tolerance, lattice=lattice)
        runs.append((mu, cert))
        ok = cert.converged and bool(np.all(cert.margins >= -margin_tol))
        if ok and (best is None or cert.leader_payoff > runs[best][1].leader_payoff):
            best = c
    return best, runs


# ------------------------------------------------------------ hypotheses


def concavity_probe(spec, expr, lo, hi, samples=256, seed=0, tol=1e-9):
    """Random midpoint test of concavity on the box [lo, hi]; False on any violation."""
    rng = np.random.default_rng(seed)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    a = lo + (hi - lo) * rng.random((samples, lo.size))
    b = lo + (hi - lo) * rng.random((samples, lo.size))
    m = 0.5 * (a + b)

    def ev(X):
        env = {"x": [X[:, j] for j in range(X.shape[1])]}
        return np.broadcast_to(np.asarray(expr.evaluate(env), dtype=float), (X.shape[0],))

    return bool(np.all(ev(m) >= 0.5 * (ev(a) + ev(b)) - tol))


def _split_ok(spec, i, parts):
    n = spec.n_followers
    others = {f"u{j}" for j in range(1, n + 1) if j != i}
    allowed = {
        "state": {"t", "x"} | others,
        "leader": {"t", "u0"} | others,
        "followers": {"t"} | {f"u{j}" for j in range(1, n + 1)},
    }
    return all(expr.symbol_names() <= allowed[name] for name, expr in parts)


def hypothesis_flags(spec, lattice=None, samples=256, seed=0):
    """Advisory flags for concave terminal payoffs and the additive running-payoff split."""
    lattice = lattice if lattice is not None else StateLattice(spec)
    lo, hi = lattice.lo[-1], lattice.hi[-1]
    concave = [concavity_probe(spec, spec.terminal[i], lo, hi, samples, seed) for i in range(1, spec.n_followers + 1)]
    split = []
    for i in range(1, spec.n_followers + 1):
        parts = spec.running[i].parts
        split.append(None if parts is None else _split_ok(spec, i, parts))
    return {"terminal_concave": concave, "running_split": split}


def induced_step_matrix(spec, i=1):
    """One-step (N = 1) matrix of follower i's payoff over (a0, a_i), other followers uniform."""
    one = spec.with_steps(1)
    others = [MixedControlPath.uniform(1, g.size) for j, g in enumerate(spec.grids[1:], start=1) if j != i]
    table = UpperValueTable(one, i, others, StateLattice(one, points=2))
    return table.step_game(0, one.x0)[0]


def pure_paths_to_mixed(spec, u0, u):
    mu0 = MixedControlPath.point_mass(u0, spec.grids[0].size)
    mu = [MixedControlPath.point_mass(p, spec.grids[j].size) for j, p in enumerate(u, start=1)]
    return mu0, mu


__all__ = [
    "MixedControlPath",
    "FixedPointCertificate",
    "IsaacsResult",
    "UpperValueTable",
    "relaxed_integrate",
    "relaxed_payoffs",
    "isaacs_check",
    "bellman_upper_value",
    "g_map_response",
    "fixed_point_search",
    "leader_sweep",
    "hypothesis_flags",
    "concavity_probe",
    "mixed_margins",
    "induced_step_matrix",
    "pure_paths_to_mixed",
]
