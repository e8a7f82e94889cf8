"""Independent reference computations written as plain loops."""

import itertools


def lower_value_loops(A):
    best, arg = None, None
    for j in range(len(A[0])):
        col = min(A[i][j] for i in range(len(A)))
        if best is None or col > best:
            best, arg = col, j
    return best, arg


def upper_value_loops(A):
    best, arg = None, None
    for i in range(len(A)):
        row = max(A[i][j] for j in range(len(A[0])))
        if best is None or row < best:
            best, arg = row, i
    return best, arg


def mixed_value_2x2(A):
    """Value of a 2x2 zero-sum game (rows minimize), by saddle test or indifference."""
    (a, b), (c, d) = A
    lo, _ = lower_value_loops(A)
    hi, _ = upper_value_loops(A)
    if lo == hi:
        return lo
    return (a * d - b * c) / (a + d - b - c)


def inverse_two_player_brute(J0, J1):
    """Leader-best pair with J1 >= max-min of J1, lexicographically first on ties."""
    m, n = len(J0), len(J0[0])
    v = max(min(J1[i][j] for i in range(m)) for j in range(n))
    best = None
    for i in range(m):
        for j in range(n):
            if J1[i][j] >= v and (best is None or J0[i][j] > J0[best[0]][best[1]]):
                best = (i, j)
    return best, v


def ordinary_brute(J0, J1):
    m, n = len(J0), len(J0[0])
    best = None
    for i in range(m):
        top = max(J1[i])
        for j in range(n):
            if J1[i][j] == top and (best is None or J0[i][j] > J0[best[0]][best[1]]):
                best = (i, j)
    return best


def linear_constrained_brute(steps, controls=(-1.0, 0.0, 1.0)):
    """Max of -x(T) over path pairs with x(T) >= x_k for all k (x' = u0 + u1, x0 = 0, T = 1)."""
    dt = 1.0 / steps
    best = None
    for u0 in itertools.product(controls, repeat=steps):
        for u1 in itertools.product(controls, repeat=steps):
            xs = [0.0]
            for a, b in zip(u0, u1):
                xs.append(xs[-1] + dt * (a + b))
            if all(xs[-1] >= x for x in xs):
                val = -xs[-1]
                best = val if best is None else max(best, val)
    return best


def best_responses_loop(J1, alpha):
    """Follower actions maximizing J1[alpha(a1), a1]."""
    vals = [J1[alpha(a)][a] for a in range(len(J1[0]))]
    top = max(vals)
    return [a for a, v in enumerate(vals) if v == top]


def nash_loop(payoffs, sizes, alpha):
    """Follower profiles with no profitable unilateral deviation once the leader plays alpha."""
    n = len(sizes) - 1
    out = []
    for u in itertools.product(*(range(k) for k in sizes[1:])):
        ok = True
        for i in range(1, n + 1):
            here = payoffs[i][(alpha(u),) + u]
            for ai in range(sizes[i]):
                dev = u[: i - 1] + (ai,) + u[i:]
                if payoffs[i][(alpha(dev),) + dev] > here:
                    ok = False
        if ok:
            out.append(u)
    return out


def admissible_n_loop(payoffs, sizes):
    """Cells (a0, u) where every follower reaches max over a_i of min over a0 of J_i given u_{-i}."""
    n = len(sizes) - 1
    cells = set()
    for cell in itertools.product(*(range(k) for k in sizes)):
        u = cell[1:]
        ok = True
        for i in range(1, n + 1):
            thr = max(
                min(payoffs[i][(a0,) + u[: i - 1] + (ai,) + u[i:]] for a0 in range(sizes[0])) for ai in range(sizes[i])
            )
            if payoffs[i][cell] < thr:
                ok = False
        if ok:
            cells.add(cell)
    return cells
