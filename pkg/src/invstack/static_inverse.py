"""Static inverse Stackelberg solutions by exhaustive enumeration.

The leader (player 0) announces an incentive map from follower profiles to
leader actions.  A pair is reachable as an equilibrium outcome exactly when
every follower gets at least their punishment guarantee there, so the
solvers enumerate that admissible set, pick the leader-best element, and
build the target-plus-punishment map that enforces it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .zerosum import lower_value, threshold_tensors, upper_value


class NotAdmissibleError(ValueError):
    """Target outside the admissible set: a follower would profit by deviating."""

    def __init__(self, follower, margin, threshold):
        self.follower = follower
        self.margin = margin
        self.threshold = threshold
        super().__init__(
            f"target is not admissible: follower {follower} gets {margin:+.6g} relative to "
            f"its guaranteed level {threshold:.6g}"
        )


@dataclass(frozen=True, eq=False)
class IncentiveStrategy:
    """Leader reaction ``alpha``: follower profile -> leader action index.

    ``punishment_map`` is an int array over the follower profile lattice.
    """

    target_profile: tuple
    target_leader_action: int
    punishment_map: np.ndarray

    def __post_init__(self):
        pm = np.asarray(self.punishment_map, dtype=np.int64)
        pm.setflags(write=False)
        object.__setattr__(self, "punishment_map", pm)
        if self.target_profile is not None and int(pm[tuple(self.target_profile)]) != self.target_leader_action:
            raise ValueError("punishment_map must send the target profile to the target leader action")

    def __call__(self, profile):
        if np.ndim(profile) == 0:
            profile = (profile,)
        return int(self.punishment_map[tuple(int(a) for a in profile)])

    @classmethod
    def constant(cls, game, a0):
        return cls(None, int(a0), np.full(game.follower_shape, int(a0), dtype=np.int64))

    @classmethod
    def from_map(cls, pm):
        return cls(None, -1, pm)

    def __eq__(self, other):
        return (
            isinstance(other, IncentiveStrategy)
            and self.target_profile == other.target_profile
            and self.target_leader_action == other.target_leader_action
            and np.array_equal(self.punishment_map, other.punishment_map)
        )


@dataclass
class StaticSolutionReport:
    leader_action: Optional[int]
    profile: Optional[tuple]
    leader_payoff: Optional[float]
    follower_payoffs: Optional[list]
    admissible_count: int
    thresholds: dict = field(default_factory=dict)
    margins: Optional[list] = None
    strategy: Optional[IncentiveStrategy] = None
    kind: str = "inverse"

    @property
    def found(self):
        return self.leader_action is not None

    @property
    def pair(self):
        return (self.leader_action,) + tuple(self.profile)


def _require_two_player(game):
    if game.n_followers != 1:
        raise ValueError(f"two-player solver needs exactly one follower, got {game.n_followers}")


def _induced(game, alpha):
    """H_i(u) = J_i(alpha[u], u) over the follower profile lattice, i = 0..n."""
    pm = alpha.punishment_map
    grids = np.indices(game.follower_shape)
    idx = (pm,) + tuple(grids)
    return [J[idx] for J in game.payoffs]


# ------------------------------------------------------------ two players


def admissible_set_two_player(game, eps_incl=0.0):
    """Mask over (a0, a1) with J_1 >= V^- - eps_incl, and its lexicographic list."""
    _require_two_player(game)
    v_low, _ = lower_value(game.payoffs[1])
    mask = game.payoffs[1] >= v_low - eps_incl
    return mask, [tuple(int(a) for a in ix) for ix in np.argwhere(mask)]


def build_punishment_two_player(game, target, eps_incl=0.0):
    """Play ``a0*`` on ``a1*`` and the follower-minimizing action elsewhere."""
    _require_two_player(game)
    a0s, a1s = (int(a) for a in target)
    J1 = game.payoffs[1]
    v_low, _ = lower_value(J1)
    if not J1[a0s, a1s] >= v_low - eps_incl:
        raise NotAdmissibleError(1, float(J1[a0s, a1s] - v_low), v_low)
    pm = np.argmin(J1, axis=0)
    pm[a1s] = a0s
    return IncentiveStrategy((a1s,), a0s, pm)


def follower_best_responses(game, alpha):
    """All a1 maximizing ``J_1(alpha[a1], a1)``."""
    _require_two_player(game)
    h = _induced(game, alpha)[1]
    return [int(a) for a in np.flatnonzero(h == h.max())]


def _two_player_thresholds(game):
    v_low, a1 = lower_value(game.payoffs[1])
    v_up, a0 = upper_value(game.payoffs[1])
    return {"V_lower": v_low, "V_upper": v_up, "lower_argmax": a1, "upper_argmin": a0}


def _verification_margins(game, alpha, profile):
    """Per follower: equilibrium payoff minus best unilateral deviation payoff."""
    H = _induced(game, alpha)
    margins = []
    profile = tuple(profile)
    for i in range(1, game.n_followers + 1):
        best_dev = None
        for ai in range(game.grids[i].size):
            if ai == profile[i - 1]:
                continue
            dev = profile[: i - 1] + (ai,) + profile[i:]
            val = H[i][dev]
            best_dev = val if best_dev is None else max(best_dev, val)
        margins.append(None if best_dev is None else float(H[i][profile] - best_dev))
    return margins


def _argmax_over_mask(J0, mask):
    cells = np.argwhere(mask)
    if len(cells) == 0:
        return None
    vals = J0[tuple(cells.T)]
    return tuple(int(a) for a in cells[int(np.argmax(vals))])


def _report(game, pair, alpha, count, thresholds, kind):
    a0, profile = pair[0], tuple(pair[1:])
    payoffs = game.payoff_vector(a0, profile)
    margins = _verification_margins(game, alpha, profile) if alpha is not None else None
    return StaticSolutionReport(
        leader_action=a0,
        profile=profile,
        leader_payoff=float(payoffs[0]),
        follower_payoffs=[float(v) for v in payoffs[1:]],
        admissible_count=count,
        thresholds=thresholds,
        margins=margins,
        strategy=alpha,
        kind=kind,
    )


def solve_inverse_two_player(game, eps_incl=0.0):
    """Leader-best pair over the admissible set plus the enforcing incentive map."""
    mask, pairs = admissible_set_two_player(game, eps_incl)
    pair = _argmax_over_mask(game.payoffs[0], mask)
    alpha = build_punishment_two_player(game, pair, eps_incl)
    return _report(game, pair, alpha, len(pairs), _two_player_thresholds(game), "inverse")


def solve_ordinary_stackelberg(game):
    """Leader commits to a0; follower best-responds, ties broken in the leader's favour."""
    _require_two_player(game)
    J0, J1 = game.payoffs[0], game.payoffs[1]
    best_resp = J1 == J1.max(axis=1, keepdims=True)
    # optimistic follower: best J0 among best responses, smallest index
    masked = np.where(best_resp, J0, -np.inf)
    a1_of = np.argmax(masked, axis=1)
    leader_vals = masked[np.arange(J0.shape[0]), a1_of]
    a0 = int(np.argmax(leader_vals))
    pair = (a0, int(a1_of[a0]))
    alpha = IncentiveStrategy.constant(game, a0)
    return _report(game, pair, alpha, int(best_resp.sum()), _two_player_thresholds(game), "ordinary")


# ------------------------------------------------------------- n followers


def admissible_set_n(game, eps_incl=0.0):
    """Mask over (a0, u): every follower i gets J_i >= its lower value given u_{-i}."""
    thr = threshold_tensors(game)
    mask = np.ones(game.shape, dtype=bool)
    for i in range(1, game.n_followers + 1):
        mask &= game.payoffs[i] >= thr[i - 1][np.newaxis] - eps_incl
    return mask, [tuple(int(a) for a in ix) for ix in np.argwhere(mask)]


def deviator(profile, target):
    """Lowest-index follower (1-based) whose action differs from ``target``."""
    for i, (a, b) in enumerate(zip(profile, target), start=1):
        if a != b:
            return i
    return None


def build_punishment_n(game, target, eps_incl=0.0):
    """Target on u*, otherwise minimize the payoff of the lowest-index deviator."""
    a0s = int(target[0])
    us = tuple(int(a) for a in target[1:])
    thr = threshold_tensors(game)
    for i in range(1, game.n_followers + 1):
        val = game.payoffs[i][(a0s,) + us]
        t = thr[i - 1][us]
        if not val >= t - eps_incl:
            raise NotAdmissibleError(i, float(val - t), float(t))
    punish = [np.argmin(game.payoffs[i], axis=0) for i in range(1, game.n_followers + 1)]
    pm = np.empty(game.follower_shape, dtype=np.int64)
    for u in itertools.product(*(range(k) for k in game.follower_shape)):
        i = deviator(u, us)
        pm[u] = a0s if i is None else punish[i - 1][u]
    return IncentiveStrategy(us, a0s, pm)


def nash_set_under_incentive(game, alpha):
    """Follower profiles that are Nash equilibria once the leader plays ``alpha``."""
    H = _induced(game, alpha)
    ok = np.ones(game.follower_shape, dtype=bool)
    for i in range(1, game.n_followers + 1):
        ok &= H[i] >= H[i].max(axis=i - 1, keepdims=True)
    return [tuple(int(a) for a in ix) for ix in np.argwhere(ok)]


def team_select(game, alpha, profiles):
    """Leader-preferred profile among ``profiles`` (first on ties)."""
    if not profiles:
        return None
    H0 = _induced(game, alpha)[0]
    vals = [H0[tuple(u)] for u in profiles]
    return tuple(profiles[int(np.argmax(vals))])


def solve_inverse_n(game, eps_incl=0.0):
    """Leader-best element of the admissible set; ``found`` is False when it is empty."""
    mask, elements = admissible_set_n(game, eps_incl)
    thr = {}
    if game.n_followers == 1:
        thr.update(_two_player_thresholds(game))
    pair = _argmax_over_mask(game.payoffs[0], mask)
    if pair is None:
        return StaticSolutionReport(None, None, None, None, 0, thr)
    alpha = build_punishment_n(game, pair, eps_incl)
    report = _report(game, pair, alpha, len(elements), thr, "inverse")
    us = pair[1:]
    report.thresholds["at_solution"] = [float(thr_i[us]) for thr_i in threshold_tensors(game)]
    return report
