"""Decision rules for mortal bandits.

AG / AG-L explore with probability tied to the best current estimate; AG-L
only explores arms whose remaining life is in the top ``q`` fraction.
UCB / UCB-L play the highest upper confidence bound; UCB-L scales the bonus by
``psi(j, t) = c * log(l_j - t + 1)`` so it vanishes as an arm expires.
LinUCB-L applies the same life scaling to a ridge-regression bonus.

Every policy follows the same protocol, driven by a game runner or replay loop:
``observe(t, pool, now)`` before each decision, ``select(t, pool)`` to choose,
``update(t, arm, reward)`` after a reward is revealed. ``select`` never
changes learning state, so a replay loop may call it repeatedly per turn.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import ArmEstimate, RewardRange
from .errors import ConfigError, NotSPDError, UninitializedError
from .life import LifeModel

POLICY_NAMES = ("ag", "ag-l", "ucb", "ucb-l", "linucb-l")

# Life quantile from the main text; the experiments section ended up at 0.1.
DEFAULT_LIFE_QUANTILE = 0.3
ALT_LIFE_QUANTILE = 0.1
DEFAULT_C = 0.011


@dataclass
class AglConfig:
    life_quantile: float = DEFAULT_LIFE_QUANTILE
    rng_seed: int = 0
    life_mode: str = "exact"

    def __post_init__(self):
        if not 0.0 < self.life_quantile <= 1.0:
            raise ConfigError(f"life_quantile must be in (0, 1], got {self.life_quantile}")


@dataclass
class UcblConfig:
    c: float = DEFAULT_C
    life_mode: str = "exact"

    def __post_init__(self):
        if not self.c > 0:
            raise ConfigError(f"c must be positive, got {self.c}")
        if self.life_mode not in ("exact", "estimated"):
            raise ConfigError(f"unknown life_mode {self.life_mode!r}")


@dataclass
class PolicyConfig:
    """The ``policy`` block of a run config."""

    policy: str = "ag-l"
    q: float = DEFAULT_LIFE_QUANTILE
    c: float = DEFAULT_C
    life_mode: str = "exact"
    seed: int = 0
    dim: int = 1

    def __post_init__(self):
        if self.policy not in POLICY_NAMES:
            raise ConfigError(f"unknown policy {self.policy!r}; choose from {', '.join(POLICY_NAMES)}")
        AglConfig(self.q, self.seed, self.life_mode)
        UcblConfig(self.c, self.life_mode)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "PolicyConfig":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)


# ---------------------------------------------------------------- operations


def ag_explore_prob(estimates: Mapping, live: Sequence, rr: RewardRange) -> float:
    """``p = 1 - (max_j Xhat_j - a) / (b - a)`` over initialized live arms."""
    best = -math.inf
    for j in live:
        e = estimates.get(j)
        if e is not None and e.pulls:
            best = max(best, e.reward_sum / e.pulls)
    if best == -math.inf:
        raise UninitializedError("no live arm has an estimate; play the initialization phase first")
    return min(1.0, max(0.0, 1.0 - (best - rr.a) / rr.r))


def top_count(q: float, m: int) -> int:
    """``ceil(q * m)`` robust to ``0.3 * 10 == 3.0000000000000004``."""
    return max(1, math.ceil(q * m - 1e-9))


def long_life_set(live: Sequence, remaining: Mapping | None, q: float) -> list:
    """Live arms whose remaining life is among the top ``ceil(q * m_t)`` (ties kept).

    ``remaining`` values of ``None`` mean the lives are unknown; the filter is
    then disabled and the whole live set is returned.
    """
    live = list(live)
    if q >= 1.0 or remaining is None or not live:
        return live
    vals = [remaining.get(j) for j in live]
    if any(v is None for v in vals):
        return live
    k = top_count(q, len(live))
    threshold = sorted(vals, reverse=True)[k - 1]
    out = [j for j, v in zip(live, vals) if v >= threshold]
    return out or live


def psi(t: float, death: float | None, c: float) -> tuple[float, bool]:
    """Life scale ``c * log(l_j - t + 1)`` and an "estimate expired" flag.

    When the (estimated) end is unknown or already passed, the bonus is 0 and
    only the mean estimate is used.
    """
    if death is None:
        return 0.0, True
    arg = death - t + 1
    if arg <= 0:
        return 0.0, True
    if arg < 1:
        return 0.0, False
    return c * math.log(arg), False


def ucbl_index(mean: float, pulls: int, t: int, birth: int, psi_value: float) -> float:
    """``Xhat_j + psi * sqrt(2 log(t - s_j + 1) / T_j)``; the +1 keeps ``t = s_j`` finite."""
    if pulls <= 0:
        raise UninitializedError("arm has no (real or virtual) pulls; initialize new arms first")
    if psi_value == 0.0:
        return mean
    return mean + psi_value * math.sqrt(2.0 * math.log(t - birth + 1) / pulls)


def new_arm_init(estimates: Mapping, rr: RewardRange) -> ArmEstimate:
    """Virtual estimate for a newborn arm: equal-weight mean of past arms' means."""
    total, count = 0.0, 0
    for e in estimates.values():
        if e.pulls and not e.virtual:
            total += e.reward_sum / e.pulls
            count += 1
    mean = total / count if count else rr.midpoint
    return ArmEstimate(pulls=1, reward_sum=mean, virtual=True)


def _argmax(items) -> object:
    best_j, best = None, -math.inf
    for j, v in items:
        if v > best:
            best_j, best = j, v
    return best_j


# ---------------------------------------------------------------- policies


class Policy:
    """Shared bookkeeping for all policies."""

    name = "policy"

    def __init__(self, rr: RewardRange, life: LifeModel | None = None, clock: str = "turn"):
        self.rr = rr
        self.life = life
        self.clock = clock
        self.est: dict = {}

    def _now(self, t, now):
        return t if self.clock == "turn" or now is None else now

    def observe(self, t: int, pool: Sequence, now: float | None = None) -> None:
        self._clock_now = self._now(t, now)
        if self.life is not None:
            self.life.observe(self._clock_now, pool)

    def select(self, t: int, pool: Sequence):
        raise NotImplementedError

    def update(self, t: int, arm, reward: float) -> None:
        e = self.est.get(arm)
        if e is None:
            e = self.est[arm] = ArmEstimate()
        e.add(reward)

    def get_params(self) -> dict:
        return {"policy": self.name}


class AdaptiveGreedy(Policy):
    """AG: explore uniformly over M_t with probability p, else exploit."""

    name = "ag"

    def __init__(self, rr: RewardRange, rng: np.random.Generator, life: LifeModel | None = None,
                 clock: str = "turn"):
        super().__init__(rr, life, clock)
        self.rng = rng
        self.explored = False
        self.last_p = None

    def explore_set(self, t: int, pool: Sequence) -> Sequence:
        return pool

    def select(self, t: int, pool: Sequence):
        a, r = self.rr.a, self.rr.b - self.rr.a
        best_j, best = None, -math.inf
        est = self.est
        for j in pool:
            e = est.get(j)
            if e is not None and e.pulls:
                m = e.reward_sum / e.pulls
                if m > best:
                    best_j, best = j, m
        # with nothing exploitable the only option is to explore
        p = 1.0 if best_j is None else min(1.0, max(0.0, 1.0 - (best - a) / r))
        self.last_p = p
        if self.rng.random() < p:
            cand = self.explore_set(t, pool)
            self.explored = True
            return cand[int(self.rng.integers(len(cand)))]
        self.explored = False
        return best_j


class AdaptiveGreedyL(AdaptiveGreedy):
    """AG-L: exploration restricted to the long-life set M_t(L)."""

    name = "ag-l"

    def __init__(self, rr, rng, life: LifeModel, q: float = DEFAULT_LIFE_QUANTILE, clock: str = "turn"):
        super().__init__(rr, rng, life, clock)
        self.q = AglConfig(q).life_quantile

    def explore_set(self, t: int, pool: Sequence) -> Sequence:
        if self.q >= 1.0:
            return pool
        now = self._clock_now
        life = self.life
        rem = {j: life.remaining(j, now) for j in pool}
        return long_life_set(pool, rem, self.q)

    def get_params(self) -> dict:
        return {"policy": self.name, "q": self.q, "life_mode": self.life.mode}


def agl_select(policy: AdaptiveGreedy, t: int, pool: Sequence) -> tuple[object, bool]:
    """One AG/AG-L decision as ``(arm, explored)``."""
    j = policy.select(t, pool)
    return j, policy.explored


class UCBL(Policy):
    """UCB-L; with ``psi_const=1.0`` it is the mortal UCB baseline.

    Newborn arms get a virtual estimate at first sight (see ``new_arm_init``),
    so every live arm has a finite index.
    """

    name = "ucb-l"

    def __init__(self, rr: RewardRange, life: LifeModel, c: float = DEFAULT_C,
                 psi_const: float | None = None, clock: str = "turn"):
        super().__init__(rr, life, clock)
        self.c = UcblConfig(c, life.mode).c
        self.psi_const = psi_const
        if psi_const is not None:
            self.name = "ucb"
        self.expired_flags = 0

    def observe(self, t, pool, now=None):
        super().observe(t, pool, now)
        est = self.est
        for j in pool:
            if j not in est:
                est[j] = new_arm_init(est, self.rr)

    def psi_value(self, j, t: int) -> float:
        if self.psi_const is not None:
            return self.psi_const
        value, _ = psi(t, self.life.death(j), self.c)
        return value

    def index(self, j, t: int) -> float:
        e = self.est[j]
        return ucbl_index(e.reward_sum / e.pulls, e.pulls, t, self.life.birth(j), self.psi_value(j, t))

    def select(self, t: int, pool: Sequence):
        est, life, c, k = self.est, self.life, self.c, self.psi_const
        log, sqrt = math.log, math.sqrt
        exact = life.mode == "exact"
        mean_life = life.estimator.mean_life
        first = life.tracker.first_seen
        births = life.births if life.births is not None else first
        best_j, best = None, -math.inf
        for j in pool:
            e = est[j]
            n = e.pulls
            m = e.reward_sum / n
            if k is not None:
                w = k
            else:
                if exact:
                    arg = life.deaths[j] - t + 1
                elif mean_life is None:
                    arg = 0.0
                else:
                    arg = first[j] + mean_life - t + 1
                w = c * log(arg) if arg >= 1 else 0.0
            if w != 0.0:
                m += w * sqrt(2.0 * log(t - births[j] + 1) / n)
            if m > best:
                best_j, best = j, m
        return best_j

    def get_params(self) -> dict:
        if self.psi_const is not None:
            return {"policy": "ucb"}
        return {"policy": self.name, "c": self.c, "life_mode": self.life.mode}


def ucbl_select(policy: UCBL, t: int, pool: Sequence):
    return policy.select(t, pool)


# ---------------------------------------------------------------- LinUCB-L

REFACTOR_EVERY = 512


@dataclass
class LinUcblState:
    """Per-arm ridge state; ``A`` starts at the identity and only grows."""

    d: int
    A: np.ndarray = None
    A_inv: np.ndarray = None
    b_vec: np.ndarray = None
    updates: int = 0

    def __post_init__(self):
        if self.A is None:
            self.A = np.eye(self.d)
        if self.A_inv is None:
            self.A_inv = np.eye(self.d)
        if self.b_vec is None:
            self.b_vec = np.zeros(self.d)

    @property
    def theta(self) -> np.ndarray:
        return self.A_inv @ self.b_vec

    def score(self, x: np.ndarray, psi_value: float) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise ValueError(f"context has shape {x.shape}, expected ({self.d},)")
        width = float(x @ self.A_inv @ x)
        if width < 0:
            raise NotSPDError("x^T A^-1 x < 0: design matrix is corrupted")
        return float(self.theta @ x) + psi_value * math.sqrt(width)

    def update(self, x: np.ndarray, reward: float) -> None:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise ValueError(f"context has shape {x.shape}, expected ({self.d},)")
        self.A += np.outer(x, x)
        self.b_vec += reward * x
        self.updates += 1
        if self.updates % REFACTOR_EVERY == 0:
            self.refactor()
        else:
            Ax = self.A_inv @ x
            self.A_inv -= np.outer(Ax, Ax) / (1.0 + x @ Ax)

    def refactor(self) -> None:
        try:
            L = np.linalg.cholesky(self.A)
        except np.linalg.LinAlgError as exc:
            raise NotSPDError("design matrix is not positive definite") from exc
        Linv = np.linalg.inv(L)
        self.A_inv = Linv.T @ Linv


def linucbl_select(contexts: Mapping, states: Mapping, psis: Mapping) -> object:
    """argmax of ``theta_j . x + psi_j * sqrt(x^T A_j^-1 x)``; ties to the smallest id."""
    return _argmax((j, states[j].score(contexts[j], psis[j])) for j in sorted(states))


class LinUCBL(Policy):
    """LinUCB-L over per-arm contexts (a constant context when none is given)."""

    name = "linucb-l"

    def __init__(self, rr: RewardRange, life: LifeModel, c: float = DEFAULT_C, d: int = 1,
                 context_fn: Callable | None = None, clock: str = "turn"):
        super().__init__(rr, life, clock)
        self.c = UcblConfig(c, life.mode).c
        self.d = d
        self.states: dict = {}
        self.context_fn = context_fn
        self._contexts: dict = {}

    def observe(self, t, pool, now=None):
        super().observe(t, pool, now)
        for j in pool:
            if j not in self.states:
                past = [s.theta for s in self.states.values() if s.updates]
                st = LinUcblState(self.d)
                if past:  # A = I, so theta_new = b = mean of past thetas
                    st.b_vec = np.mean(past, axis=0)
                self.states[j] = st

    def contexts(self, t, pool) -> dict:
        if self.context_fn is None:
            x = np.ones(self.d)
            return {j: x for j in pool}
        return {j: np.asarray(self.context_fn(t, j), dtype=float) for j in pool}

    def select(self, t, pool, contexts: Mapping | None = None):
        ctx = dict(contexts) if contexts is not None else self.contexts(t, pool)
        self._contexts = ctx
        best_j, best = None, -math.inf
        for j in pool:
            w, _ = psi(t, self.life.death(j), self.c)
            s = self.states[j].score(ctx[j], w)
            if s > best:
                best_j, best = j, s
        return best_j

    def update(self, t, arm, reward, context=None):
        super().update(t, arm, reward)
        if arm not in self.states:
            self.states[arm] = LinUcblState(self.d)
        x = context if context is not None else self._contexts.get(arm)
        if x is None:
            x = self.contexts(t, [arm])[arm]
        self.states[arm].update(x, reward)

    def get_params(self) -> dict:
        return {"policy": self.name, "c": self.c, "life_mode": self.life.mode, "dim": self.d}


# ---------------------------------------------------------------- factory


def make_policy(cfg: PolicyConfig, rr: RewardRange, rng: np.random.Generator,
                deaths: Mapping | None = None, births: Mapping | None = None,
                clock: str = "turn", context_fn: Callable | None = None) -> Policy:
    """Build a policy; ``deaths``/``births`` feed exact life mode."""
    name = cfg.policy
    if name == "ag":
        return AdaptiveGreedy(rr, rng, clock=clock)
    mode = cfg.life_mode
    life = LifeModel(mode, deaths if mode == "exact" else None, births if mode == "exact" else None)
    if name == "ag-l":
        return AdaptiveGreedyL(rr, rng, life, q=cfg.q, clock=clock)
    if name == "ucb":
        # the baseline never looks at lifetimes, only at first sightings
        return UCBL(rr, LifeModel("estimated", births=births), c=cfg.c, psi_const=1.0, clock=clock)
    if name == "ucb-l":
        return UCBL(rr, life, c=cfg.c, clock=clock)
    return LinUCBL(rr, life, c=cfg.c, d=cfg.dim, context_fn=context_fn, clock=clock)
