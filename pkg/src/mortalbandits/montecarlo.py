"""Vectorized Monte Carlo estimates of expected regret.

These engines play many independent games at once as numpy arrays. They
follow the same decision rules as the scalar policies (exact life, ties to
the smallest arm id) but draw random numbers in a different order, so they
agree with the scalar runners in distribution only. The bound-validity checks
use them as the empirical side.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Bernoulli, Environment
from .policies import DEFAULT_C, DEFAULT_LIFE_QUANTILE, long_life_set, psi


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    se: float
    games: int

    def upper(self, sigmas: float = 3.0) -> float:
        return self.mean + sigmas * self.se


def _arrays(env: Environment):
    ids = [s.id for s in env.arms]
    for s in env.arms:
        if not isinstance(s.dist, Bernoulli):
            raise TypeError("vectorized engines support Bernoulli arms only")
    rr = env.range
    succ = np.array([s.dist.success_prob(rr) for s in env.arms])
    mu = np.array([env.mu[j] for j in ids])
    index = {j: k for k, j in enumerate(ids)}
    live = np.zeros((env.horizon + 1, len(ids)), dtype=bool)
    for t in range(1, env.horizon + 1):
        for j in env.live(t):
            live[t, index[j]] = True
    return ids, index, succ, mu, live


def _estimate(regret: np.ndarray) -> MCEstimate:
    g = len(regret)
    sd = float(regret.std(ddof=1)) if g > 1 else 0.0
    return MCEstimate(float(regret.mean()), sd / math.sqrt(g), g)


def agl_regret(env: Environment, q: float = DEFAULT_LIFE_QUANTILE, games: int = 100_000,
               seed: int = 0, chunk: int = 100_000) -> MCEstimate:
    """Expected regret of AG-L (``q=1``: AG) with exact lives."""
    ids, index, succ, mu, live = _arrays(env)
    K = len(ids)
    rr = env.range
    rng = np.random.default_rng(seed)
    elig = {}
    for t in range(env.m_init + 1, env.horizon + 1):
        pool = env.live(t)
        rem = {j: env.last_turn(j) - t for j in pool}
        elig[t] = np.array([index[j] for j in long_life_set(pool, rem, q)])
    out = []
    for start in range(0, games, chunk):
        G = min(chunk, games - start)
        sums = np.zeros((G, K))
        pulls = np.zeros((G, K))
        regret = np.zeros(G)
        rows = np.arange(G)
        for t in range(1, env.horizon + 1):
            best_mu = env.best(t)[1]
            if t <= env.m_init:
                j = np.full(G, index[env.init_set[t - 1]])
            else:
                ok = live[t] & (pulls > 0)
                with np.errstate(invalid="ignore", divide="ignore"):
                    means = np.where(ok, sums / np.where(pulls > 0, pulls, 1), -np.inf)
                top = means.max(axis=1)
                has = np.isfinite(top)
                p = np.where(has, np.clip(1.0 - (top - rr.a) / rr.r, 0.0, 1.0), 1.0)
                explore = rng.random(G) < p
                e = elig[t][rng.integers(len(elig[t]), size=G)]
                j = np.where(explore, e, means.argmax(axis=1))
            reward = rr.a + rr.r * (rng.random(G) < succ[j])
            sums[rows, j] += reward
            pulls[rows, j] += 1
            regret += best_mu - mu[j]
        out.append(regret)
    return _estimate(np.concatenate(out))


def ucbl_regret(env: Environment, c: float = DEFAULT_C, games: int = 10_000, seed: int = 0,
                psi_const: float | None = None, chunk: int = 10_000) -> MCEstimate:
    """Expected regret of UCB-L with exact lives (``psi_const=1``: mortal UCB)."""
    ids, index, succ, mu, live = _arrays(env)
    K = len(ids)
    rr = env.range
    rng = np.random.default_rng(seed)
    births = np.array([s.birth for s in env.arms], dtype=float)
    n = env.horizon
    W = np.zeros((n + 1, K))
    for t in range(1, n + 1):
        for k, j in enumerate(ids):
            W[t, k] = psi_const if psi_const is not None else psi(t, env.last_turn(j), c)[0]
    first_turn = live.argmax(axis=0)
    out = []
    for start in range(0, games, chunk):
        G = min(chunk, games - start)
        sums = np.zeros((G, K))
        pulls = np.zeros((G, K))
        real = np.zeros((G, K), dtype=bool)
        regret = np.zeros(G)
        rows = np.arange(G)
        for t in range(1, n + 1):
            born = np.flatnonzero(live[t] & (first_turn == t))
            if born.size:
                cnt = real.sum(axis=1)
                with np.errstate(invalid="ignore", divide="ignore"):
                    past = np.where(real, sums / np.where(pulls > 0, pulls, 1), 0.0).sum(axis=1)
                v = np.where(cnt > 0, past / np.maximum(cnt, 1), rr.midpoint)
                # arms born together all see the same past, like the scalar policy
                for k in born:
                    sums[:, k] = v
                    pulls[:, k] = 1
            best_mu = env.best(t)[1]
            if t <= env.m_init:
                j = np.full(G, index[env.init_set[t - 1]])
            else:
                with np.errstate(invalid="ignore", divide="ignore"):
                    bonus = np.where(W[t] != 0.0,
                                     W[t] * np.sqrt(2.0 * np.log(t - births + 1) / pulls), 0.0)
                    idx = np.where(live[t], sums / pulls + bonus, -np.inf)
                j = idx.argmax(axis=1)
            reward = rr.a + rr.r * (rng.random(G) < succ[j])
            was_real = real[rows, j]
            sums[rows, j] = np.where(was_real, sums[rows, j] + reward, reward)
            pulls[rows, j] = np.where(was_real, pulls[rows, j] + 1, 1)
            real[rows, j] = True
            regret += best_mu - mu[j]
        out.append(regret)
    return _estimate(np.concatenate(out))
