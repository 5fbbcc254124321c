"""Lifespan bookkeeping: pool-membership tracking and lifespan estimation.

Clock values are opaque numbers: turn indices in simulation, timestamps (or
turn indices) in replay. A lifespan is ``last_seen - first_seen`` in clock
units, so an arm's estimated last clock value is ``first_seen + mean_life``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping


@dataclass
class LifespanEstimator:
    expired_count: int = 0
    mean_life: float | None = None

    def update(self, observed_life: float) -> "LifespanEstimator":
        if observed_life < 0:
            raise ValueError(f"negative lifespan {observed_life}")
        self.expired_count += 1
        if self.mean_life is None:
            self.mean_life = float(observed_life)
        else:
            self.mean_life += (observed_life - self.mean_life) / self.expired_count
        return self


def lifespan_update(est: LifespanEstimator, observed_life: float) -> LifespanEstimator:
    """Functional form: a new estimator with one more expired arm folded in."""
    return LifespanEstimator(est.expired_count, est.mean_life).update(observed_life)


@dataclass
class ArmLifeTracker:
    """First/last sighting of each arm in the candidate pool.

    An arm is declared expired the first time it is missing from a pool after
    having been present.
    """

    first_seen: dict = field(default_factory=dict)
    last_seen: dict = field(default_factory=dict)
    expired: set = field(default_factory=set)
    _present: frozenset = frozenset()
    _last_pool: object = None

    def observe(self, now: float, pool: Iterable) -> list[tuple[object, float]]:
        """Record one pool sighting; returns ``(arm, lifespan)`` for new expiries."""
        if pool is self._last_pool:
            for j in self._present:
                self.last_seen[j] = now
            return []
        self._last_pool = pool
        pool = frozenset(pool)
        gone = []
        for j in self._present - pool:
            if j not in self.expired:
                self.expired.add(j)
                gone.append((j, self.last_seen[j] - self.first_seen[j]))
        for j in pool:
            if j not in self.first_seen:
                self.first_seen[j] = now
            self.last_seen[j] = now
        self._present = pool
        # sort so the estimator sees expiries in a deterministic order
        gone.sort(key=lambda item: (self.first_seen[item[0]], repr(item[0])))
        return gone


class LifeModel:
    """What a policy knows about arm lifetimes.

    ``mode="exact"`` reads the supplied ``deaths`` (and ``births``) mapping;
    ``mode="estimated"`` predicts each arm's end as ``first_seen + mean_life``
    and knows nothing until the first expiry.
    """

    def __init__(self, mode: str = "exact", deaths: Mapping | None = None, births: Mapping | None = None):
        if mode not in ("exact", "estimated"):
            raise ValueError(f"life mode must be 'exact' or 'estimated', got {mode!r}")
        if mode == "exact" and deaths is None:
            raise ValueError("exact life mode needs the arms' end times")
        self.mode = mode
        self.deaths = dict(deaths) if deaths is not None else None
        self.births = dict(births) if births is not None else None
        self.tracker = ArmLifeTracker()
        self.estimator = LifespanEstimator()

    def observe(self, now: float, pool) -> None:
        for _, life in self.tracker.observe(now, pool):
            self.estimator.update(life)

    def birth(self, j) -> float:
        if self.births is not None and j in self.births:
            return self.births[j]
        return self.tracker.first_seen[j]

    def death(self, j) -> float | None:
        """Known (exact) or predicted last clock value; ``None`` when unknown."""
        if self.mode == "exact":
            return self.deaths[j]
        if self.estimator.mean_life is None:
            return None
        return self.tracker.first_seen[j] + self.estimator.mean_life

    def remaining(self, j, now: float) -> float | None:
        d = self.death(j)
        return None if d is None else d - now
