"""Minimax machinery for the leader-vs-one-follower auxiliary games.

Matrices are oriented ``A[a0, a1]``: rows belong to the leader (minimizer,
the punisher), columns to the follower (maximizer).  Every argmin/argmax
resolves ties toward the smallest index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

# above this many entries the default method switches to fictitious play
LP_SIZE_LIMIT = 250_000


@dataclass(frozen=True)
class MatrixGameSolution:
    value: float
    minimizer_mixed: np.ndarray
    maximizer_mixed: np.ndarray
    duality_gap: float
    # guarantees certified by the returned weights
    lower_bound: float
    upper_bound: float
    method: str = "exact-LP"
    iterations: int = 0


class MatrixGameNonConvergence(RuntimeError):
    """Fictitious play ran out of iterations; carries the best bounds reached."""

    def __init__(self, best: MatrixGameSolution, iterations: int, tolerance: float):
        self.best = best
        self.iterations = iterations
        self.tolerance = tolerance
        super().__init__(
            f"fictitious play did not reach gap {tolerance:g} in {iterations} iterations "
            f"(bounds [{best.lower_bound:.12g}, {best.upper_bound:.12g}])"
        )


def _matrix(J):
    A = np.asarray(J, dtype=float)
    if A.ndim != 2 or A.size == 0:
        raise ValueError("expected a nonempty 2-d matrix")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def lower_value(J):
    """``max_{a1} min_{a0} J[a0, a1]`` and the smallest maximizing ``a1``."""
    A = _matrix(J)
    col_min = A.min(axis=0)
    a1 = int(np.argmax(col_min))
    return float(col_min[a1]), a1


def upper_value(J):
    """``min_{a0} max_{a1} J[a0, a1]`` and the smallest minimizing ``a0``."""
    A = _matrix(J)
    row_max = A.max(axis=1)
    a0 = int(np.argmin(row_max))
    return float(row_max[a0]), a0


def guarantee_values(game, profile):
    """K_i(profile) = min over leader actions of J_i, for followers i = 1..n."""
    profile = tuple(int(a) for a in profile)
    if len(profile) != game.n_followers:
        raise ValueError(f"profile must have {game.n_followers} entries")
    return np.array([game.payoffs[i][(slice(None),) + profile].min() for i in range(1, game.n_followers + 1)])


def follower_matrix(game, i, others):
    """Slice of J_i over (a0, a_i) with the other followers fixed at ``others``."""
    others = tuple(int(a) for a in others)
    if len(others) != game.n_followers - 1:
        raise ValueError(f"others must have {game.n_followers - 1} entries")
    idx = [slice(None)] + list(others[: i - 1]) + [slice(None)] + list(others[i - 1 :])
    return game.payoffs[i][tuple(idx)]


def per_follower_lower_value(game, i, others):
    """``max_{a_i} min_{a0} J_i(a0, a_i, others)`` with smallest-index argmax."""
    if not 1 <= i <= game.n_followers:
        raise ValueError(f"follower index {i} out of range")
    return lower_value(follower_matrix(game, i, others))


def threshold_tensors(game):
    """Per-follower lower values for every profile, broadcast over the profile lattice.

    Entry ``[i-1][u]`` is ``max_{a_i} min_{a0} J_i(a0, a_i, u_{-i})``.
    """
    out = []
    for i in range(1, game.n_followers + 1):
        guarantee = game.payoffs[i].min(axis=0)
        thr = guarantee.max(axis=i - 1, keepdims=True)
        out.append(np.broadcast_to(thr, game.follower_shape))
    return out


# ----------------------------------------------------------------- mixed games


def _clean(weights):
    w = np.clip(np.asarray(weights, dtype=float), 0.0, None)
    total = w.sum()
    if not total > 0:
        return np.full(w.shape, 1.0 / w.size)
    w = w / total
    # push the rounding residue into the largest weight
    w[np.argmax(w)] += 1.0 - w.sum()
    return w


def _solution_from_weights(A, p, q, method, iterations=0, pure=None):
    lo_pure, _ = lower_value(A)
    hi_pure, _ = upper_value(A)
    lower = float((A @ q).min())
    upper = float((p @ A).max())
    # the exact value lies in [lower, upper] and in the pure bracket
    lower = max(lower, lo_pure)
    upper = min(upper, hi_pure)
    value = lo_pure if pure else min(max(0.5 * (lower + upper), lo_pure), hi_pure)
    return MatrixGameSolution(
        value=float(value),
        minimizer_mixed=p,
        maximizer_mixed=q,
        duality_gap=max(0.0, upper - lower),
        lower_bound=lower,
        upper_bound=upper,
        method=method,
        iterations=iterations,
    )


def _pure_saddle(A):
    lo, a1 = lower_value(A)
    hi, a0 = upper_value(A)
    if lo != hi:
        return None
    p = np.zeros(A.shape[0])
    q = np.zeros(A.shape[1])
    p[a0] = 1.0
    q[a1] = 1.0
    return p, q


def _solve_lp(A):
    m, n = A.shape
    # variables (q_1..q_n, v): maximize v s.t. (A q)_r >= v for each row r
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-A, np.ones((m, 1))])
    b_ub = np.zeros(m)
    A_eq = np.zeros((1, n + 1))
    A_eq[0, :n] = 1.0
    bounds = [(0, None)] * n + [(None, None)]
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=[1.0],
        bounds=bounds,
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")
    q = _clean(res.x[:n])
    p = _clean(-res.ineqlin.marginals)
    return p, q


def _fictitious_play(A, tolerance, max_iterations):
    # alternating (Brown) play: the follower answers the leader's updated history
    m, n = A.shape
    row_counts = np.zeros(m)
    col_counts = np.zeros(n)
    row_payoff = np.zeros(m)  # running sum of A[:, c] over played columns
    col_payoff = np.zeros(n)  # running sum of A[r, :] over played rows
    r = 0
    best = None
    for it in range(1, max_iterations + 1):
        row_counts[r] += 1
        col_payoff += A[r, :]
        c = int(np.argmax(col_payoff))
        col_counts[c] += 1
        row_payoff += A[:, c]
        lower = float(row_payoff.min() / it)
        upper = float(col_payoff.max() / it)
        if best is None or upper - lower < best[2] - best[1]:
            best = (it, lower, upper, row_counts / it, col_counts / it)
        if upper - lower <= tolerance:
            break
        r = int(np.argmin(row_payoff))
    it, _, _, p, q = best
    return _solution_from_weights(A, _clean(p), _clean(q), "fictitious-play", iterations=it)


def mixed_matrix_value(A, method="auto", tolerance=1e-9, max_iterations=200_000):
    """Value of the mixed extension of ``A`` (leader rows minimize).

    ``method`` is ``"exact-LP"``, ``"fictitious-play"`` or ``"auto"``.  The
    fictitious-play method raises :class:`MatrixGameNonConvergence` when the
    certified duality gap is still above ``tolerance`` after the budget.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    A = _matrix(A)
    if method == "auto":
        method = "exact-LP" if A.size <= LP_SIZE_LIMIT else "fictitious-play"
    if method not in ("exact-LP", "fictitious-play"):
        raise ValueError(f"unknown method {method!r}")
    saddle = _pure_saddle(A)
    if saddle is not None:
        return _solution_from_weights(A, *saddle, method, pure=True)
    if method == "exact-LP":
        p, q = _solve_lp(A)
        return _solution_from_weights(A, p, q, method)
    sol = _fictitious_play(A, tolerance, max_iterations)
    if sol.duality_gap > tolerance:
        raise MatrixGameNonConvergence(sol, sol.iterations, tolerance)
    return sol
