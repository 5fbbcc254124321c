"""The mortal bandit game: arms with lifespans, rewards, estimates and regret."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Hashable, Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .errors import (
    AvailabilityError,
    ConfigError,
    NoLiveArmsError,
    RangeViolation,
)

ArmId = Hashable


@dataclass(frozen=True)
class RewardRange:
    """Rewards are bounded in ``[a, b]``; ``r = b - a``."""

    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        if not self.b > self.a:
            raise ConfigError(f"reward range needs b > a, got [{self.a}, {self.b}]")

    @property
    def r(self) -> float:
        return self.b - self.a

    def check(self, x: float) -> float:
        if not (self.a <= x <= self.b):
            raise RangeViolation(f"reward {x} outside [{self.a}, {self.b}]")
        return x

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.a + self.b)


# ---------------------------------------------------------------- distributions


@dataclass(frozen=True)
class Bernoulli:
    """Two-point reward on ``{a, b}`` with mean ``mu``."""

    mu: float

    def mean(self, rr: RewardRange) -> float:
        return self.mu

    def variance(self, rr: RewardRange) -> float:
        return (self.mu - rr.a) * (rr.b - self.mu)

    def success_prob(self, rr: RewardRange) -> float:
        return (self.mu - rr.a) / rr.r

    def sample(self, rng: np.random.Generator, rr: RewardRange) -> float:
        return rr.b if rng.random() < (self.mu - rr.a) / rr.r else rr.a

    def to_json(self) -> dict:
        return {"bernoulli": {"mu": self.mu}}


@dataclass(frozen=True)
class TruncGauss:
    """Gaussian with location ``mu`` and scale ``sigma`` truncated to ``[a, b]``.

    The true mean differs from ``mu`` unless the truncation is symmetric.
    """

    mu: float
    sigma: float

    def _frozen(self, rr: RewardRange):
        lo = (rr.a - self.mu) / self.sigma
        hi = (rr.b - self.mu) / self.sigma
        return stats.truncnorm(lo, hi, loc=self.mu, scale=self.sigma)

    def mean(self, rr: RewardRange) -> float:
        return float(self._frozen(rr).mean())

    def variance(self, rr: RewardRange) -> float:
        return float(self._frozen(rr).var())

    def sample(self, rng: np.random.Generator, rr: RewardRange) -> float:
        # rejection keeps the stream position a function of the seed only
        for _ in range(10_000):
            x = self.mu + self.sigma * rng.standard_normal()
            if rr.a <= x <= rr.b:
                return float(x)
        raise ConfigError("truncated Gaussian has negligible mass inside the range")

    def to_json(self) -> dict:
        return {"trunc_gauss": {"mu": self.mu, "sigma": self.sigma}}


def dist_from_json(obj: Mapping[str, Any]):
    if "bernoulli" in obj:
        return Bernoulli(float(obj["bernoulli"]["mu"]))
    if "trunc_gauss" in obj:
        g = obj["trunc_gauss"]
        return TruncGauss(float(g["mu"]), float(g["sigma"]))
    raise ConfigError(f"unknown reward distribution {obj!r}")


# ---------------------------------------------------------------- arms & env


@dataclass(frozen=True)
class ArmSpec:
    """Ground truth for one arm: available on turns ``birth..death`` inclusive.

    ``death=None`` means the arm outlives the horizon.
    """

    id: ArmId
    birth: int
    death: int | None
    dist: Bernoulli | TruncGauss

    def __post_init__(self):
        if self.birth < 1:
            raise ConfigError(f"arm {self.id}: birth must be >= 1")
        if self.death is not None and self.death < self.birth:
            raise ConfigError(f"arm {self.id}: death {self.death} before birth {self.birth}")

    @classmethod
    def bernoulli(cls, id, mu, birth=1, death=None) -> "ArmSpec":
        return cls(id, birth, death, Bernoulli(mu))

    def last_turn(self, horizon: int) -> int:
        return horizon + 1 if self.death is None else self.death

    def alive(self, t: int) -> bool:
        return self.birth <= t and (self.death is None or t <= self.death)

    def to_json(self) -> dict:
        return {"id": self.id, "birth": self.birth, "death": self.death, "dist": self.dist.to_json()}


@dataclass
class Environment:
    """A full arm schedule: the set M, the reward range, horizon and M_I."""

    arms: list[ArmSpec]
    range: RewardRange = field(default_factory=RewardRange)
    horizon: int = 100
    init_set: list | None = None
    init_cap: int | None = None

    def __post_init__(self):
        self.arms = sorted(self.arms, key=lambda s: s.id)
        ids = [s.id for s in self.arms]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate arm ids in schedule")
        self._by_id = {s.id: s for s in self.arms}
        self.mu = {s.id: s.dist.mean(self.range) for s in self.arms}
        for j, m in self.mu.items():
            if not (self.range.a <= m <= self.range.b):
                raise RangeViolation(f"arm {j}: mean {m} outside the reward range")
        if self.init_set is None:
            first = [s.id for s in self.arms if s.alive(1)]
            if self.init_cap is not None:
                first = first[: self.init_cap]
            self.init_set = first
        self.init_set = list(self.init_set)
        if not self.init_set:
            raise ConfigError("initialization set M_I is empty (no arm alive at turn 1?)")
        for k, j in enumerate(self.init_set, start=1):
            if j not in self._by_id:
                raise ConfigError(f"init arm {j!r} not in schedule")
            if not self._by_id[j].alive(1) or not self._by_id[j].alive(k):
                raise ConfigError(f"init arm {j!r} must be alive at turn 1 and at its init turn {k}")
        if self.horizon < len(self.init_set):
            raise ConfigError("horizon shorter than the initialization phase")

    def __getitem__(self, j) -> ArmSpec:
        return self._by_id[j]

    @property
    def m_init(self) -> int:
        return len(self.init_set)

    def last_turn(self, j) -> int:
        return self._by_id[j].last_turn(self.horizon)

    @cached_property
    def _live_table(self) -> list[tuple]:
        # sweep over births so long schedules with many short lives stay cheap
        order = sorted(range(len(self.arms)), key=lambda k: self.arms[k].birth)
        table: list[tuple] = [()]
        alive: list[int] = []
        nxt = 0
        for t in range(1, self.horizon + 1):
            while nxt < len(order) and self.arms[order[nxt]].birth <= t:
                alive.append(order[nxt])
                nxt += 1
            alive = [k for k in alive if self.arms[k].alive(t)]
            alive.sort()
            table.append(tuple(self.arms[k].id for k in alive))
        return table

    def live(self, t: int) -> tuple:
        if 1 <= t <= self.horizon:
            return self._live_table[t]
        return tuple(s.id for s in self.arms if s.alive(t))

    @cached_property
    def _best_table(self) -> list:
        table: list = [None]
        for t in range(1, self.horizon + 1):
            live = self._live_table[t]
            table.append(_argmax_mu(live, self.mu) if live else None)
        return table

    def best(self, t: int) -> tuple:
        """``(i*_t, mu_{i*_t})``; ties go to the smallest id."""
        hit = self._best_table[t] if 1 <= t <= self.horizon else None
        if hit is None:
            live = self.live(t)
            if not live:
                raise NoLiveArmsError(f"no live arms at turn {t}")
            hit = _argmax_mu(live, self.mu)
        return hit

    def to_json(self) -> dict:
        return {
            "a": self.range.a,
            "b": self.range.b,
            "horizon": self.horizon,
            "init_set": list(self.init_set),
            "arms": [s.to_json() for s in self.arms],
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "Environment":
        try:
            arms = [
                ArmSpec(a["id"], int(a["birth"]), None if a.get("death") is None else int(a["death"]),
                        dist_from_json(a["dist"]))
                for a in obj["arms"]
            ]
            return cls(
                arms=arms,
                range=RewardRange(float(obj.get("a", 0.0)), float(obj.get("b", 1.0))),
                horizon=int(obj["horizon"]),
                init_set=obj.get("init_set"),
                init_cap=obj.get("init_cap"),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed schedule: {exc}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    @classmethod
    def load(cls, path: str | Path) -> "Environment":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps() + "\n")


def _argmax_mu(ids: Iterable, mu: Mapping) -> tuple:
    best_id, best_mu = None, -math.inf
    for j in ids:  # ids are sorted, strict > keeps the smallest id on ties
        if mu[j] > best_mu:
            best_id, best_mu = j, mu[j]
    return best_id, best_mu


# ---------------------------------------------------------------- estimates


@dataclass(slots=True)
class ArmEstimate:
    """Running empirical mean of one arm.

    ``virtual`` marks a placeholder estimate built from other arms' history;
    the first real reward replaces it.
    """

    pulls: int = 0
    reward_sum: float = 0.0
    virtual: bool = False

    @property
    def mean(self) -> float | None:
        return self.reward_sum / self.pulls if self.pulls else None

    @property
    def initialized(self) -> bool:
        return self.pulls > 0

    def add(self, reward: float) -> None:
        if self.virtual:
            self.pulls, self.reward_sum, self.virtual = 1, reward, False
        else:
            self.pulls += 1
            self.reward_sum += reward


def update_estimate(est: ArmEstimate, reward: float, rr: RewardRange = RewardRange()) -> ArmEstimate:
    """Return ``est`` with one more observed reward folded into the mean."""
    rr.check(reward)
    out = ArmEstimate(est.pulls, est.reward_sum, est.virtual)
    out.add(reward)
    return out


# ---------------------------------------------------------------- game state


@dataclass
class GameState:
    t: int
    env: Environment
    estimates: dict = field(default_factory=dict)

    @property
    def range(self) -> RewardRange:
        return self.env.range

    @property
    def live(self) -> tuple:
        return self.env.live(self.t)

    @property
    def m_t(self) -> int:
        return len(self.live)

    @property
    def init_set(self) -> list:
        return self.env.init_set


def available_arms(state: GameState | Environment, t: int) -> set:
    env = state.env if isinstance(state, GameState) else state
    if t < 1:
        raise ValueError("turns are 1-based")
    return set(env.live(t))


def best_available(state: GameState | Environment, t: int) -> tuple:
    env = state.env if isinstance(state, GameState) else state
    return env.best(t)


@dataclass
class RegretLedger:
    per_turn: list = field(default_factory=list)
    total_regret: float = 0.0
    total_reward: float = 0.0
    keep_trace: bool = True

    def add(self, t: int, j, delta: float, reward: float) -> None:
        if self.keep_trace:
            self.per_turn.append((t, j, delta))
        self.total_regret += delta
        self.total_reward += reward


def record_play(ledger: RegretLedger, state: GameState | Environment, t: int, j, reward: float) -> RegretLedger:
    env = state.env if isinstance(state, GameState) else state
    sj = env[j] if j in env._by_id else None
    if sj is None or not sj.alive(t):
        raise AvailabilityError(f"arm {j!r} is not live at turn {t}")
    _, best_mu = env.best(t)
    ledger.add(t, j, best_mu - env.mu[j], reward)
    return ledger


def regret_from_log(env: Environment, plays: Sequence[tuple[int, Any]]) -> tuple[float, float]:
    """Evaluate R_n in both of its forms from a ``(turn, arm)`` play log.

    The first sums per turn over live arms, the second per arm over its life.
    """
    played = {t: j for t, j in plays}
    m_i = env.m_init
    init = sum(env.best(t)[1] - env.mu[played[t]] for t in range(1, m_i + 1) if t in played)
    by_turn = init
    for t in range(m_i + 1, max(played, default=0) + 1):
        for j in env.live(t):
            if played.get(t) == j:
                by_turn += env.best(t)[1] - env.mu[j]
    by_arm = init
    for s in env.arms:
        for t in range(max(s.birth, m_i + 1), min(s.last_turn(env.horizon), env.horizon) + 1):
            if played.get(t) == s.id:
                by_arm += env.best(t)[1] - env.mu[s.id]
    return by_turn, by_arm
