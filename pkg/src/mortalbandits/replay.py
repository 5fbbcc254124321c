"""Offline evaluation of bandit policies on logged recommendation streams.

A log line is ``timestamp displayed clicked | pool...``, one event per line,
optionally gzip-compressed. The logging policy is assumed to have displayed a
uniformly random pool member, which makes the match-only replay estimator
unbiased: at every event the policy chooses from the pool, and only events
where its choice equals the displayed article reveal a reward. Each match is
one turn (one evaluation); the policy is asked again on every event, so its
choice always comes from the pool it currently sees.
"""
from __future__ import annotations

import gzip
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .core import RewardRange
from .errors import ConfigError, LogFormatError, StreamExhausted
from .life import ArmLifeTracker, LifeModel, LifespanEstimator
from .policies import Policy, PolicyConfig, make_policy

log = logging.getLogger(__name__)

MAX_MALFORMED_FRACTION = 0.01


@dataclass(frozen=True)
class ReplayEvent:
    timestamp: int
    displayed: str
    clicked: int
    pool: tuple

    def to_line(self) -> str:
        return f"{self.timestamp} {self.displayed} {self.clicked} | {' '.join(self.pool)}"


def parse_line(line: str) -> ReplayEvent:
    head, sep, tail = line.partition("|")
    if not sep:
        raise ValueError("missing '|' separator")
    parts = head.split()
    pool = tuple(tail.split())
    if len(parts) != 3 or not pool:
        raise ValueError("expected 'timestamp displayed clicked | pool...'")
    ts, shown, click = parts
    clicked = int(click)
    if clicked not in (0, 1):
        raise ValueError(f"clicked must be 0 or 1, got {click}")
    if shown not in pool:
        raise ValueError(f"displayed article {shown} not in its pool")
    return ReplayEvent(int(ts), shown, clicked, pool)


def _open_text(source) -> io.TextIOBase:
    if isinstance(source, (str, Path)):
        path = Path(source)
        try:
            with open(path, "rb") as fh:
                magic = fh.read(2)
        except OSError as exc:
            raise OSError(f"cannot read log {path}: {exc}") from exc
        if magic == b"\x1f\x8b":
            return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
        return open(path, encoding="utf-8")
    return source


class LogReader:
    """Iterate events of a log, counting and skipping malformed lines.

    After a full pass, more than 1% malformed lines is a ``LogFormatError``.
    """

    def __init__(self, source, strict_fraction: float = MAX_MALFORMED_FRACTION):
        self.source = source
        self.strict_fraction = strict_fraction
        self.lines = 0
        self.events = 0
        self.malformed = 0
        self.warnings: list[str] = []

    def __iter__(self) -> Iterator[ReplayEvent]:
        fh = _open_text(self.source)
        try:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line:
                    continue
                self.lines += 1
                try:
                    ev = parse_line(line)
                except ValueError as exc:
                    self.malformed += 1
                    if len(self.warnings) < 20:
                        self.warnings.append(f"line {lineno}: {exc}")
                    continue
                self.events += 1
                yield ev
        finally:
            if fh is not self.source:
                fh.close()
        if self.malformed:
            log.warning("skipped %d malformed of %d lines", self.malformed, self.lines)
        if self.lines and self.malformed / self.lines > self.strict_fraction:
            raise LogFormatError(
                f"{self.malformed} of {self.lines} lines malformed (> {self.strict_fraction:.0%}); "
                f"first: {self.warnings[:3]}"
            )


def parse_log(source) -> list[ReplayEvent]:
    """All well-formed events of ``source`` (a path, or an open text stream)."""
    return list(LogReader(source))


def write_log(events: Iterable[ReplayEvent], path: str | Path) -> int:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    n = 0
    with opener(path, "wt", encoding="utf-8") as fh:
        for ev in events:
            fh.write(ev.to_line() + "\n")
            n += 1
    return n


def scan_lives(events: Iterable[ReplayEvent]) -> tuple[dict, dict]:
    """``(first, last)`` timestamps at which each article appears in any pool."""
    first, last = {}, {}
    for ev in events:
        for j in ev.pool:
            if j not in first:
                first[j] = ev.timestamp
            last[j] = ev.timestamp
    return first, last


def remaining_life_rank(tracker: ArmLifeTracker, estimator: LifespanEstimator, now: float,
                        pool: Sequence, deaths: Mapping | None = None) -> list[tuple]:
    """Pool members as ``(arm, remaining life)``, longest remaining first.

    With ``deaths`` the remaining life is exact; otherwise it is predicted as
    ``first_seen + mean_life - now``. Before the first expiry every remaining
    life is ``None`` (unknown) and the pool order is kept.
    """
    if not pool:
        raise ValueError("empty pool")
    if deaths is not None:
        rem = [(j, deaths[j] - now) for j in pool]
    elif estimator.mean_life is None:
        return [(j, None) for j in pool]
    else:
        rem = [(j, tracker.first_seen[j] + estimator.mean_life - now) for j in pool]
    return sorted(rem, key=lambda item: -item[1])


@dataclass
class ReplayResult:
    turns_played: int = 0
    evaluations: int = 0
    total_reward: float = 0.0
    events_consumed: int = 0
    init_events: int = 0
    partial: bool = False
    per_turn_log: list = field(default_factory=list)

    @property
    def ctr(self) -> float:
        return self.total_reward / self.evaluations if self.evaluations else 0.0

    def to_json(self) -> dict:
        return {
            "turns_played": self.turns_played,
            "evaluations": self.evaluations,
            "total_reward": self.total_reward,
            "ctr": self.ctr,
            "events_consumed": self.events_consumed,
            "init_events": self.init_events,
            "partial": self.partial,
        }


def replay_initialize(stream: Iterator[ReplayEvent], m: int, policy: Policy) -> int:
    """Feed the logged click of the first ``m`` distinct articles to ``policy``.

    Returns the number of events consumed.
    """
    seen: set = set()
    consumed = 0
    for ev in stream:
        consumed += 1
        policy.observe(len(seen) + 1, ev.pool, now=ev.timestamp)
        if ev.displayed not in seen:
            policy.update(len(seen) + 1, ev.displayed, float(ev.clicked))
            seen.add(ev.displayed)
            if len(seen) == m:
                return consumed
    raise StreamExhausted(f"stream ended after {consumed} events with {len(seen)} of {m} articles seen")


def replay_run(stream: Iterator[ReplayEvent], policy: Policy, horizon: int, start_turn: int = 1,
               trace: bool = False) -> ReplayResult:
    """Match-only replay of ``policy`` for ``horizon`` turns (matched events)."""
    res = ReplayResult()
    t = start_turn
    if horizon <= 0:
        return res
    for ev in stream:
        res.events_consumed += 1
        policy.observe(t, ev.pool, now=ev.timestamp)
        j = policy.select(t, ev.pool)
        if j != ev.displayed:
            continue
        reward = float(ev.clicked)
        policy.update(t, j, reward)
        res.evaluations += 1
        res.turns_played += 1
        res.total_reward += reward
        if trace:
            res.per_turn_log.append((t, ev.timestamp, j, ev.clicked))
        t += 1
        if res.turns_played >= horizon:
            return res
    res.partial = True
    return res


def build_replay_policy(cfg: PolicyConfig, events: Sequence[ReplayEvent] | None = None,
                        rng: np.random.Generator | None = None) -> Policy:
    """Policy wired for replay: AG-L on the timestamp clock, UCB-L on the turn clock."""
    rr = RewardRange(0.0, 1.0)
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    if cfg.policy in ("ucb-l", "linucb-l") and cfg.life_mode == "exact":
        raise ConfigError(f"{cfg.policy} on replay supports only life_mode='estimated'")
    deaths = births = None
    if cfg.life_mode == "exact" and cfg.policy == "ag-l":
        if events is None:
            raise ConfigError("exact life on replay needs the full log to find end times")
        births, deaths = scan_lives(events)
    clock = "time" if cfg.policy in ("ag", "ag-l") else "turn"
    return make_policy(cfg, rr, rng, deaths=deaths, births=births, clock=clock)


def replay_evaluate(events: Sequence[ReplayEvent], cfg: PolicyConfig, turns: int,
                    init_m: int = 25, window_start: int = 0, trace: bool = False) -> ReplayResult:
    """Initialization plus replay, starting ``window_start`` events into the log."""
    if not 0 <= window_start < max(len(events), 1):
        raise ConfigError(f"window start {window_start} outside a log of {len(events)} events")
    window = events[window_start:]
    policy = build_replay_policy(cfg, window)
    stream = iter(window)
    consumed = replay_initialize(stream, init_m, policy) if init_m else 0
    res = replay_run(stream, policy, turns, start_turn=init_m + 1, trace=trace)
    res.init_events = consumed
    return res


__all__ = [
    "ArmLifeTracker", "LifeModel", "LogReader", "ReplayEvent", "ReplayResult", "build_replay_policy",
    "parse_line", "parse_log", "remaining_life_rank", "replay_evaluate", "replay_initialize",
    "replay_run", "scan_lives", "write_log",
]
