"""Finite-time regret bound for AG / AG-L by history enumeration.

For every post-initialization turn ``t`` the bound weighs each live arm's gap
``Delta_{j,i*_t}`` by ``sum_h U_t(h, j) prod_s U_s(h, i_s)`` over all histories
``h`` of (explore flag, arm) pairs before ``t``. Each step factor needs
``E[p]`` under the law of the maximum mean estimate, which depends on ``h``
only through the pull counts. Histories that share a pull-count vector
therefore share all future factors, and the default evaluator aggregates them
(``method="dp"``); ``method="enumerate"`` walks every history depth-first and
is kept as the reference.

Zero-probability histories (exploiting a never-played arm, or exploring an
arm outside ``M_s(L)`` under AG-L) get a step factor of exactly 0, so pruning
them leaves the result unchanged.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping

from ..core import Environment
from ..errors import EnumerationGuardError
from ..policies import long_life_set
from .orderstats import EXACT_PULL_LIMIT, estimate_dist, expect_over_max, normal_dist_for

HISTORY_GUARD = 10**7


@dataclass
class BoundReport:
    theorem: int
    horizon: int
    init_regret: float
    main_term: float
    enumerated_histories: int = 0
    pruned: int = 0
    approximations: list = field(default_factory=list)

    @property
    def total(self) -> float:
        return self.init_regret + self.main_term

    def to_json(self) -> dict:
        return {
            "theorem": self.theorem,
            "horizon": self.horizon,
            "total": self.total,
            "init_regret": self.init_regret,
            "main_term": self.main_term,
            "histories": self.enumerated_histories,
            "pruned": self.pruned,
            "approximations": sorted(set(self.approximations)),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


@dataclass(frozen=True)
class HistoryMatrix:
    """Explore flags and played arms for turns ``start .. start + len - 1``."""

    start: int
    entries: tuple = ()

    @property
    def last_turn(self) -> int:
        return self.start + len(self.entries) - 1

    def column(self, s: int) -> tuple:
        return self.entries[s - self.start]

    def extend(self, b: int, i) -> "HistoryMatrix":
        return HistoryMatrix(self.start, self.entries + ((b, i),))

    def pull_counts(self, k: int, init_set) -> dict:
        """``t_j(h, k)``: one pull per init arm plus pulls on turns ``start..k``."""
        counts = {j: 1 for j in init_set}
        for b, i in self.entries[: max(0, k - self.start + 1)]:
            counts[i] = counts.get(i, 0) + 1
        return counts


def init_regret(env: Environment) -> float:
    return sum(env.best(k)[1] - env.mu[j] for k, j in enumerate(env.init_set, start=1))


def history_count(env: Environment, t: int) -> int:
    """``|H_{t-1}| = prod_{s=m_I+1}^{t-1} 2 m_s``."""
    out = 1
    for s in range(env.m_init + 1, t):
        out *= 2 * len(env.live(s))
    return out


@dataclass
class Theorem1Setup:
    """Everything that defines one evaluation of the AG / AG-L bound.

    ``q=1`` is the unregulated (plain AG) bound. ``explore_denominator`` is
    the size of the set exploration draws from: ``|M_s(L)|`` ("eligible", the
    probability AG-L actually uses) or ``|M_s|`` ("live"). With "live" the
    regulated bound undercounts exploration whenever ``M_s(L)`` is a strict
    subset and can fall below the true regret. ``count_short_lived_exploits``
    keeps arms outside ``M_t(L)`` in the outer sum: AG-L cannot explore them
    but can still exploit them, so dropping them loses regret. ``m_override`` and ``u_discount`` perturb a single turn's arguments
    for monotonicity probes.
    """

    env: Environment
    q: float = 0.3
    explore_denominator: str = "eligible"
    count_short_lived_exploits: bool = True
    exact_limit: int = EXACT_PULL_LIMIT
    m_override: Mapping = field(default_factory=dict)
    u_discount: Mapping = field(default_factory=dict)
    approximations: set = field(default_factory=set)

    def __post_init__(self):
        if self.explore_denominator not in ("eligible", "live"):
            raise ValueError(f"unknown explore_denominator {self.explore_denominator!r}")
        self._ep_cache: dict = {}
        self._elig_cache: dict = {}

    def eligible(self, t: int) -> frozenset:
        hit = self._elig_cache.get(t)
        if hit is None:
            live = self.env.live(t)
            rem = {j: self.env.last_turn(j) - t for j in live}
            hit = self._elig_cache[t] = frozenset(long_life_set(live, rem, self.q))
        return hit

    def denominator(self, t: int) -> int:
        if t in self.m_override:
            return self.m_override[t]
        if self.explore_denominator == "live":
            return len(self.env.live(t))
        return len(self.eligible(t))

    def expected_p(self, t: int, counts: Mapping) -> float:
        """``E[p]`` with ``p = (b - max_j Xhat_j) / r`` over initialized live arms."""
        env = self.env
        key = tuple((j, counts.get(j, 0)) for j in env.live(t) if counts.get(j, 0) > 0)
        hit = self._ep_cache.get(key)
        if hit is not None:
            return hit
        if not key:
            val = 1.0  # nothing to exploit: AG explores for sure
        else:
            rr = env.range
            dists, approx = [], False
            for j, n in key:
                d, a = estimate_dist(env[j].dist, n, rr, self.exact_limit)
                dists.append(d)
                approx |= a
            if approx:
                self.approximations.add("clt")
                dists = [normal_dist_for(env[j].dist, n, rr) for j, n in key]
            val = expect_over_max(dists, lambda x: (rr.b - x) / rr.r, rr)
            val = min(1.0, max(0.0, val))
        self._ep_cache[key] = val
        return val

    def u_value(self, t: int, counts: Mapping, j) -> float:
        """Hoeffding bound on ``P(j has the top estimate at t)``, clamped to 1."""
        env = self.env
        r = env.range.r
        mu = env.mu
        d = self.u_discount.get(t, 0)
        cj = max(0, counts.get(j, 0) - d)
        prod = 1.0
        for i in env.live(t):
            ci = counts.get(i, 0)
            if ci == 0 or mu[i] <= mu[j]:
                continue
            gap2 = (mu[i] - mu[j]) ** 2
            ci = max(0, ci - d)
            prod *= math.exp(-cj * gap2 / (2 * r)) + math.exp(-ci * gap2 / (2 * r))
            if prod >= 1.0:
                return 1.0
        return prod

    def step_factor(self, t: int, counts: Mapping, b: int, i) -> float:
        """``U_t(h, i)`` for a history column ``(b, i)`` at turn ``t``."""
        ep = self.expected_p(t, counts)
        if b == 1:
            if i not in self.eligible(t):
                return 0.0
            return min(1.0, ep / self.denominator(t))
        if counts.get(i, 0) == 0:
            return 0.0  # never-played arms cannot be exploited
        return min(1.0, (1.0 - ep) * self.u_value(t, counts, i))

    def pull_bound(self, t: int, counts: Mapping, j) -> float:
        """``U_t(h, j)``: explore-or-exploit bound on pulling ``j`` at ``t``."""
        return min(1.0, self.step_factor(t, counts, 1, j) + self.step_factor(t, counts, 0, j))

    def outer_arms(self, t: int):
        if self.count_short_lived_exploits:
            return self.env.live(t)
        return tuple(j for j in self.env.live(t) if j in self.eligible(t))

    def init_regret(self) -> float:
        return init_regret(self.env)


# ------------------------------------------------------------ public step ops


def _as_setup(ctx) -> Theorem1Setup:
    return ctx if isinstance(ctx, Theorem1Setup) else Theorem1Setup(ctx)


def u_bound(h: HistoryMatrix, s: int, arm, ctx) -> float:
    """``u_s(h, i_s)`` from the pull counts in force when turn ``s`` is decided.

    ``ctx`` is an ``Environment`` or a ``Theorem1Setup``.
    """
    setup = _as_setup(ctx)
    return setup.u_value(s, h.pull_counts(s - 1, setup.env.init_set), arm)


def U_step(h: HistoryMatrix, k: int, ctx, arm=None) -> float:
    """``U_k(h, i_k)`` for a column of ``h`` (``k < t``), or ``U_t(h, arm)`` when ``k``
    is the turn right after ``h``."""
    setup = _as_setup(ctx)
    counts = h.pull_counts(k - 1, setup.env.init_set)
    if arm is None:
        b, i = h.column(k)
        return setup.step_factor(k, counts, b, i)
    return setup.pull_bound(k, counts, arm)


# ------------------------------------------------------------ evaluators


def _check_guard(env: Environment, guard: int | None) -> None:
    if guard is None:
        return
    size = history_count(env, env.horizon)
    if size > guard:
        raise EnumerationGuardError(
            f"|H_{{n-1}}| = {size} histories exceeds the guard {guard}; shorten the horizon"
        )


def theorem1_bound(env: Environment, q: float = 0.3, *, method: str = "dp",
                   prune: bool = True, guard: int | None = HISTORY_GUARD,
                   setup: Theorem1Setup | None = None, **setup_kw) -> BoundReport:
    """Evaluate the AG-L regret bound (``q=1`` gives the plain AG bound)."""
    if setup is None:
        setup = Theorem1Setup(env, q=q, **setup_kw)
    _check_guard(setup.env, guard)
    if method == "dp":
        main, hist, pruned = _dp(setup)
    elif method == "enumerate":
        main, hist, pruned = _enumerate(setup, prune)
    else:
        raise ValueError(f"unknown method {method!r}")
    return BoundReport(1, setup.env.horizon, setup.init_regret(), main, hist, pruned,
                       sorted(setup.approximations))


def _turn_contribution(setup: Theorem1Setup, t: int, counts: Mapping) -> float:
    env = setup.env
    best_mu = env.best(t)[1]
    out = 0.0
    for j in setup.outer_arms(t):
        delta = best_mu - env.mu[j]
        if delta > 0:
            out += delta * setup.pull_bound(t, counts, j)
    return out


def _dp(setup: Theorem1Setup) -> tuple[float, int, int]:
    env = setup.env
    arms = [s.id for s in env.arms]
    index = {j: k for k, j in enumerate(arms)}
    c0 = tuple(1 if j in set(env.init_set) else 0 for j in arms)
    states = {c0: [1.0, 1]}
    main = 0.0
    visited = pruned = 0
    for t in range(env.m_init + 1, env.horizon + 1):
        size = history_count(env, t)
        alive = sum(m for _, m in states.values())
        visited += alive
        pruned += size - alive
        turn = 0.0
        for c, (w, _) in states.items():
            counts = dict(zip(arms, c))
            turn += w * _turn_contribution(setup, t, counts)
        main += turn
        if t == env.horizon:
            break
        nxt: dict = {}
        live = env.live(t)
        for c, (w, mult) in states.items():
            counts = dict(zip(arms, c))
            for b in (1, 0):
                for i in live:
                    u = setup.step_factor(t, counts, b, i)
                    if u == 0.0:
                        continue
                    c2 = list(c)
                    c2[index[i]] += 1
                    c2 = tuple(c2)
                    slot = nxt.get(c2)
                    if slot is None:
                        nxt[c2] = [w * u, mult]
                    else:
                        slot[0] += w * u
                        slot[1] += mult
        states = nxt
    return main, visited, pruned


def _enumerate(setup: Theorem1Setup, prune: bool) -> tuple[float, int, int]:
    env = setup.env
    start = env.m_init + 1
    total = [0.0, 0, 0]  # main, visited, pruned

    def walk(h: HistoryMatrix, weight: float, t: int) -> None:
        if t > env.horizon:
            return
        if weight == 0.0:
            total[2] += 1
        else:
            total[1] += 1
        counts = h.pull_counts(t - 1, env.init_set)
        total[0] += weight * _turn_contribution(setup, t, counts)
        if t == env.horizon:
            return
        for b in (1, 0):
            for i in env.live(t):
                child = h.extend(b, i)
                u = U_step(child, t, setup)
                if u == 0.0 and prune:
                    total[2] += _subtree_size(env, t + 1)
                    continue
                walk(child, weight * u, t + 1)

    walk(HistoryMatrix(start), 1.0, start)
    return total[0], total[1], total[2]


def _subtree_size(env: Environment, t: int) -> int:
    """Histories rooted at a prefix ending at turn ``t - 1``, over turns ``t..n``."""
    out, width = 0, 1
    for s in range(t, env.horizon + 1):
        out += width
        width *= 2 * len(env.live(s))
    return out


def bound_monotonicity_probe(env: Environment, probe: Mapping | None = None, q: float = 0.3,
                             **setup_kw) -> tuple[float, float]:
    """Evaluate the post-init bound before and after raising one argument.

    ``probe`` is ``{"kind": "m", "turn": s, "m": new_m}`` (raise ``1/m_s``),
    ``{"kind": "u", "turn": s, "discount": d}`` (raise ``u_s`` by using ``d``
    fewer pulls in its Hoeffding terms), or ``None`` for no change.
    """
    before = theorem1_bound(env, q, **setup_kw).main_term
    probe = probe or {"kind": "none"}
    kw = dict(setup_kw)
    if probe["kind"] == "m":
        kw["m_override"] = {probe["turn"]: probe["m"]}
    elif probe["kind"] == "u":
        kw["u_discount"] = {probe["turn"]: probe["discount"]}
    elif probe["kind"] != "none":
        raise ValueError(f"unknown probe kind {probe['kind']!r}")
    after = theorem1_bound(env, q, **kw).main_term
    return before, after
