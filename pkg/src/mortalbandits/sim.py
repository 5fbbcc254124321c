"""Synthetic mortal environments and seeded Monte Carlo experiments.

Seeding: a base seed is split with ``numpy.random.SeedSequence.spawn`` into
one child per game; each child spawns independent streams for the policy,
the rewards and (for templates) the environment draw. Results depend only
on the base seed and the game index, never on how games are distributed
over worker processes.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import ArmSpec, Bernoulli, Environment, RegretLedger, RewardRange
from .errors import ConfigError
from .policies import PolicyConfig, make_policy
from .replay import ReplayEvent, replay_evaluate, write_log

QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)
DATA_DIR = Path(__file__).parent / "data"


# ---------------------------------------------------------------- templates


@dataclass
class Cohort:
    """A group of arms sharing a birth process, lifespan law and mean mixture.

    Births: ``count`` arms at turn ``start``, or Poisson(``rate``) arrivals on
    every turn of ``[start, end]``. Lifespans: ``("fixed", n)``,
    ``("uniform", lo, hi)``, ``("geometric", p)`` or ``("forever",)``.
    Means: list of ``(weight, mu)`` pairs.
    """

    count: int | None = None
    rate: float | None = None
    start: int = 1
    end: int | None = None
    lifespan: tuple = ("forever",)
    means: list = field(default_factory=lambda: [(1.0, 0.5)])
    label: str = ""

    def __post_init__(self):
        if (self.count is None) == (self.rate is None):
            raise ConfigError("a cohort needs exactly one of count or rate")
        if self.rate is not None and self.rate < 0:
            raise ConfigError("arrival rate must be non-negative")
        self.lifespan = tuple(self.lifespan)
        self.means = [tuple(m) for m in self.means]
        w = sum(x for x, _ in self.means)
        if not self.means or w <= 0:
            raise ConfigError("cohort mean mixture is empty")

    def draw_lifespans(self, rng: np.random.Generator, n: int) -> list:
        kind, *args = self.lifespan
        if kind == "forever":
            return [None] * n
        if kind == "fixed":
            return [int(args[0])] * n
        if kind == "uniform":
            return [int(v) for v in rng.integers(int(args[0]), int(args[1]) + 1, size=n)]
        if kind == "geometric":
            return [int(v) for v in rng.geometric(float(args[0]), size=n)]
        raise ConfigError(f"unknown lifespan law {kind!r}")

    def draw_means(self, rng: np.random.Generator, n: int) -> list:
        w = np.array([x for x, _ in self.means], dtype=float)
        mus = np.array([m for _, m in self.means], dtype=float)
        return [float(v) for v in mus[rng.choice(len(mus), size=n, p=w / w.sum())]]


@dataclass
class EnvTemplate:
    horizon: int = 10_000
    cohorts: list = field(default_factory=list)
    a: float = 0.0
    b: float = 1.0
    seed: int = 0
    init_cap: int | None = None
    fixed: dict | None = None  # a full schedule JSON, passed through unchanged

    def __post_init__(self):
        self.cohorts = [c if isinstance(c, Cohort) else Cohort(**c) for c in self.cohorts]
        if self.fixed is None and not self.cohorts:
            raise ConfigError("template has neither cohorts nor a fixed schedule")

    @property
    def range(self) -> RewardRange:
        return RewardRange(self.a, self.b)

    def to_json(self) -> dict:
        return {
            "horizon": self.horizon, "a": self.a, "b": self.b, "seed": self.seed,
            "init_cap": self.init_cap, "fixed": self.fixed,
            "cohorts": [asdict(c) for c in self.cohorts],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "EnvTemplate":
        try:
            return cls(**{k: obj[k] for k in ("horizon", "cohorts", "a", "b", "seed", "init_cap", "fixed") if k in obj})
        except TypeError as exc:
            raise ConfigError(f"malformed template: {exc}") from exc

    @classmethod
    def load(cls, path) -> "EnvTemplate":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def load_template(name: str) -> EnvTemplate:
    """A bundled template: ``"mortal-decoy"`` or ``"adversarial"``."""
    return EnvTemplate.load(DATA_DIR / f"{name.replace('-', '_')}.json")


def generate_env(template: EnvTemplate, rng: np.random.Generator | None = None,
                 horizon: int | None = None) -> Environment:
    """Draw a schedule from ``template`` (seeded by ``template.seed`` unless ``rng`` is given)."""
    if template.fixed is not None:
        obj = dict(template.fixed)
        if horizon is not None:
            obj["horizon"] = horizon
        return Environment.from_json(obj)
    rng = rng if rng is not None else np.random.default_rng(template.seed)
    n = horizon if horizon is not None else template.horizon
    rr = template.range
    arms = []
    for c in template.cohorts:
        if c.count is not None:
            births = [c.start] * c.count
        else:
            end = min(c.end or n, n)
            per_turn = rng.poisson(c.rate, size=max(0, end - c.start + 1))
            births = list(np.repeat(np.arange(c.start, end + 1), per_turn))
        lives = c.draw_lifespans(rng, len(births))
        mus = c.draw_means(rng, len(births))
        for s, life, mu in zip(births, lives, mus):
            if life is not None and life < 1:
                raise ConfigError("lifespans must be >= 1")
            if not rr.a <= mu <= rr.b:
                raise ConfigError(f"cohort mean {mu} outside the reward range")
            death = None if life is None else int(s) + life - 1
            arms.append(ArmSpec(len(arms), int(s), death, Bernoulli(mu)))
    if not any(s.alive(1) for s in arms):
        raise ConfigError("infeasible template: no arm alive at turn 1")
    env = Environment(arms, rr, n, init_cap=template.init_cap)
    for t in range(1, n + 1):
        if not env.live(t):
            raise ConfigError(f"infeasible template: no arm alive at turn {t}")
    return env


def with_horizon(env: Environment, turns: int | None) -> Environment:
    if turns is None or turns == env.horizon:
        return env
    obj = env.to_json()
    obj["horizon"] = turns
    return Environment.from_json(obj)


# ---------------------------------------------------------------- games


@dataclass
class GameResult:
    reward: float
    regret: float
    evaluations: int
    plays: list = field(default_factory=list)


def play_game(env: Environment, cfg: PolicyConfig, policy_rng: np.random.Generator,
              reward_rng: np.random.Generator, keep_trace: bool = False,
              keep_flags: bool = False) -> GameResult:
    """One game: ``M_I`` in order, then the policy on every later turn.

    ``keep_trace`` records ``(turn, arm)`` plays; ``keep_flags`` adds the
    AG explore flag ``b_t`` (``None`` on init turns and for UCB policies).
    """
    rr = env.range
    deaths = {s.id: env.last_turn(s.id) for s in env.arms}
    births = {s.id: s.birth for s in env.arms}
    policy = make_policy(cfg, rr, policy_rng, deaths=deaths, births=births, clock="turn")
    ledger = RegretLedger(keep_trace=False)
    mu = env.mu
    n = env.horizon
    init = env.init_set
    bern = all(isinstance(s.dist, Bernoulli) for s in env.arms)
    if bern:
        u = reward_rng.random(n)
        succ = {s.id: s.dist.success_prob(rr) for s in env.arms}
    plays = []
    for t in range(1, n + 1):
        pool = env.live(t)
        policy.observe(t, pool)
        j = init[t - 1] if t <= len(init) else policy.select(t, pool)
        if j not in pool:
            raise ConfigError(f"policy chose arm {j!r} which is not live at turn {t}")
        reward = (rr.b if u[t - 1] < succ[j] else rr.a) if bern else env[j].dist.sample(reward_rng, rr)
        ledger.add(t, j, env.best(t)[1] - mu[j], reward)
        policy.update(t, j, reward)
        if keep_flags:
            flag = getattr(policy, "explored", None) if t > len(init) else None
            plays.append((t, j, flag))
        elif keep_trace:
            plays.append((t, j))
    return GameResult(ledger.total_reward, ledger.total_regret, n, plays)


def game_seeds(base_seed: int, games: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(base_seed).spawn(games)


def seed_label(ss: np.random.SeedSequence) -> int:
    """A 64-bit integer identifying one game's seed sequence."""
    hi, lo = ss.generate_state(2, dtype=np.uint32)
    return int(hi) << 32 | int(lo)


def _one_game(args) -> tuple:
    k, ss, source, cfg, turns = args
    env_ss, pol_ss, rew_ss = ss.spawn(3)
    if isinstance(source, EnvTemplate):
        env = generate_env(source, np.random.default_rng(env_ss), horizon=turns)
    else:
        env = with_horizon(source, turns)
    g = play_game(env, cfg, np.random.default_rng(pol_ss), np.random.default_rng(rew_ss))
    return k, seed_label(ss), g.reward, g.regret, g.evaluations


@dataclass
class ExperimentResult:
    rewards: list = field(default_factory=list)
    regrets: list = field(default_factory=list)
    evaluations: list = field(default_factory=list)
    seeds: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def games(self) -> int:
        return len(self.rewards)

    def summary(self) -> dict:
        out = {"games": self.games, "total_reward": math.fsum(self.rewards),
               "total_regret": math.fsum(self.regrets)}
        for name, vals in (("reward", self.rewards), ("regret", self.regrets)):
            x = np.asarray(vals, dtype=float)
            if x.size == 0:
                out[name] = None
                continue
            out[name] = {
                "mean": float(x.mean()),
                "std": float(x.std(ddof=1)) if x.size > 1 else 0.0,
                "se": float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0,
                "quantiles": {str(q): float(v) for q, v in zip(QUANTILES, np.quantile(x, QUANTILES))},
            }
        return out

    def to_json(self) -> dict:
        return {"config": self.config, "summary": self.summary(), "seeds": list(self.seeds)}


def run_games(source: Environment | EnvTemplate, cfg: PolicyConfig, games: int, seed: int,
              turns: int | None = None, threads: int = 1) -> ExperimentResult:
    """``games`` independent games; row ``k`` depends only on ``(seed, k)``."""
    if games < 0:
        raise ConfigError("games must be non-negative")
    tasks = [(k, ss, source, cfg, turns) for k, ss in enumerate(game_seeds(seed, games))]
    if threads > 1 and games > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_one_game, tasks, chunksize=max(1, games // (4 * threads))))
    else:
        rows = [_one_game(t) for t in tasks]
    rows.sort(key=lambda r: r[0])
    src = source.to_json() if isinstance(source, EnvTemplate) else {"env": source.to_json()}
    config = {"policy": cfg.to_dict(), "games": games, "seed": seed, "turns": turns,
              "source": src}
    return ExperimentResult([r[2] for r in rows], [r[3] for r in rows], [r[4] for r in rows],
                            [r[1] for r in rows], config)


# ---------------------------------------------------------------- windows


def shift_env(env: Environment, offset: int, turns: int | None = None) -> Environment:
    """The schedule seen by a game that starts ``offset`` turns late."""
    arms = []
    for s in env.arms:
        if s.death is not None and s.death <= offset:
            continue
        birth = max(1, s.birth - offset)
        death = None if s.death is None else s.death - offset
        arms.append(ArmSpec(s.id, birth, death, s.dist))
    n = turns if turns is not None else env.horizon - offset
    return Environment(arms, env.range, n)


def sliding_window_eval(source, cfg: PolicyConfig, windows: Sequence[int], turns: int,
                        seed: int = 0, init_m: int = 25) -> ExperimentResult:
    """One deterministic run per start offset over a log (event list) or a schedule."""
    res = ExperimentResult(config={"policy": cfg.to_dict(), "windows": list(windows),
                                   "turns": turns, "seed": seed})
    for w in windows:
        if isinstance(source, Environment):
            if not 0 <= w < source.horizon:
                raise ConfigError(f"window start {w} outside horizon {source.horizon}")
            env = shift_env(source, w, min(turns, source.horizon - w))
            pol_ss, rew_ss = np.random.SeedSequence([seed, w]).spawn(2)
            g = play_game(env, cfg, np.random.default_rng(pol_ss), np.random.default_rng(rew_ss))
            res.rewards.append(g.reward)
            res.regrets.append(g.regret)
            res.evaluations.append(g.evaluations)
        else:
            r = replay_evaluate(source, cfg, turns, init_m=init_m, window_start=w)
            res.rewards.append(r.total_reward)
            res.regrets.append(float("nan"))
            res.evaluations.append(r.evaluations)
        res.seeds.append(seed)
    return res


# ---------------------------------------------------------------- export

CSV_FIELDS = ("game", "seed", "reward", "regret", "evaluations")


def export_results(result: ExperimentResult, prefix: str | Path) -> tuple[Path, Path]:
    """Write ``prefix.csv`` (one row per game) and ``prefix.json`` (summary + config)."""
    prefix = Path(prefix)
    csv_path = prefix.with_name(prefix.name + ".csv")
    json_path = prefix.with_name(prefix.name + ".json")
    prefix.parent.mkdir(parents=True, exist_ok=True)
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for k in range(result.games):
            w.writerow([k, result.seeds[k], repr(float(result.rewards[k])),
                        repr(float(result.regrets[k])), result.evaluations[k]])
    json_path.write_text(json.dumps(result.to_json(), indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def load_results(prefix: str | Path) -> ExperimentResult:
    prefix = Path(prefix)
    res = ExperimentResult()
    with open(prefix.with_name(prefix.name + ".csv"), newline="") as fh:
        for row in csv.DictReader(fh):
            res.seeds.append(int(row["seed"]))
            res.rewards.append(float(row["reward"]))
            res.regrets.append(float(row["regret"]))
            res.evaluations.append(int(row["evaluations"]))
    meta = json.loads(prefix.with_name(prefix.name + ".json").read_text())
    res.config = meta["config"]
    return res


# ---------------------------------------------------------------- logs


def generate_log(env: Environment, path: str | Path, seed: int = 0, t0: int = 1_300_000_000,
                 step: int = 1) -> dict:
    """Uniform-random logging policy over ``env``'s live pool, one event per turn.

    Writes the log and a ``<path>.truth.json`` sidecar with every arm's true
    mean and first/last timestamp; returns the sidecar content.
    """
    rng = np.random.default_rng(seed)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    rr = env.range
    name = {s.id: (s.id if isinstance(s.id, str) else f"id-{s.id}") for s in env.arms}
    n = env.horizon
    pick = rng.random(n)
    click = rng.random(n)
    truth = {}

    def events():
        for t in range(1, n + 1):
            pool = env.live(t)
            j = pool[min(int(pick[t - 1] * len(pool)), len(pool) - 1)]
            p = env[j].dist.success_prob(rr) if isinstance(env[j].dist, Bernoulli) else env.mu[j]
            ts = t0 + (t - 1) * step
            for i in pool:
                rec = truth.setdefault(name[i], {"mu": env.mu[i], "first_ts": ts})
                rec["last_ts"] = ts
            yield ReplayEvent(ts, name[j], int(click[t - 1] < p), tuple(name[i] for i in pool))

    write_log(events(), path)
    side = {"seed": seed, "events": n, "arms": truth}
    Path(str(path) + ".truth.json").write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")
    return side
