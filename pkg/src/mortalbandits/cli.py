"""Command-line entry point: simulate, replay, bound and generate-log."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bounds import theorem1_bound, theorem3_bound
from .core import Environment
from .errors import (ConfigError, EnumerationGuardError, LogFormatError, MortalBanditError,
                     StreamExhausted)
from .policies import DEFAULT_C, DEFAULT_LIFE_QUANTILE, POLICY_NAMES, PolicyConfig, UcblConfig
from .replay import parse_log, replay_evaluate
from .sim import DATA_DIR, EnvTemplate, export_results, generate_env, generate_log, run_games

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_IO, EXIT_RUNTIME = 0, 2, 3, 4, 5

EPILOG = """exit codes:
  0  success
  2  usage error (unknown flag, bad flag value)
  3  invalid configuration (missing input, bad schedule/template/config file)
  4  I/O error (file missing or unreadable, malformed log)
  5  runtime failure (enumeration guard, exhausted stream, numerical error)
errors are reported on stderr as one JSON object: {"error", "message", "exit_code"}
"""

# flags that never change results and are left out of the config echo
NON_RESULT_KEYS = {"threads", "config", "out", "verbose", "func", "command"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail("UsageError", message, EXIT_USAGE)


def _fail(kind: str, message: str, code: int):
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    raise SystemExit(code)


def _policy_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--policy", choices=POLICY_NAMES, default=None)
    p.add_argument("--q", type=float, default=None, help=f"AG-L life quantile (default {DEFAULT_LIFE_QUANTILE})")
    p.add_argument("--c", type=float, default=None, help=f"UCB-L life constant (default {DEFAULT_C})")
    p.add_argument("--life-mode", choices=("exact", "estimated"), default=None)
    p.add_argument("--seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mortalbandits", description="Mortal multi-armed bandit experiments.",
                     epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, help_):
        p = sub.add_parser(name, help=help_, epilog=EPILOG,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", help="JSON file; flags override its fields")
        p.add_argument("--out", default=None)
        p.add_argument("-v", "--verbose", action="store_true")
        return p

    s = add("simulate", "run seeded games on a schedule or template")
    s.add_argument("--env", default=None)
    s.add_argument("--template", default=None, help="template JSON path or a bundled name")
    _policy_flags(s)
    s.add_argument("--games", type=int, default=None)
    s.add_argument("--turns", type=int, default=None)
    s.add_argument("--threads", type=int, default=None)

    r = add("replay", "match-only replay of a policy on a click log")
    r.add_argument("--log", default=None)
    _policy_flags(r)
    r.add_argument("--turns", type=int, default=None)
    r.add_argument("--init-m", type=int, default=None)
    r.add_argument("--window-start", type=int, default=None)

    b = add("bound", "evaluate a finite-time regret bound for a schedule")
    b.add_argument("--env", default=None)
    b.add_argument("--theorem", type=int, choices=(1, 3), default=None)
    b.add_argument("--q", type=float, default=None)
    b.add_argument("--c", type=float, default=None)
    b.add_argument("--method", choices=("dp", "enumerate"), default=None)

    g = add("generate-log", "write a synthetic uniform-random click log with ground truth")
    g.add_argument("--env", default=None)
    g.add_argument("--template", default=None)
    g.add_argument("--seed", type=int, default=None)
    return parser


DEFAULTS = {
    "simulate": {"policy": "ag-l", "q": DEFAULT_LIFE_QUANTILE, "c": DEFAULT_C, "life_mode": "exact",
                 "seed": 0, "games": 100, "turns": None, "threads": 1, "env": None, "template": None},
    "replay": {"policy": "ag-l", "q": DEFAULT_LIFE_QUANTILE, "c": DEFAULT_C, "life_mode": "estimated",
               "seed": 0, "turns": 1000, "init_m": 25, "window_start": 0, "log": None},
    "bound": {"theorem": 1, "q": DEFAULT_LIFE_QUANTILE, "c": DEFAULT_C, "method": "dp", "env": None},
    "generate-log": {"seed": 0, "env": None, "template": None},
}


def resolve(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    cfg = dict(DEFAULTS[args.command])
    if args.config:
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except OSError as exc:
            raise FileNotFoundError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        for k, v in file_cfg.items():
            key = k.replace("-", "_")
            if key not in cfg and key != "out":
                raise ConfigError(f"unknown config field {k!r} for {args.command}")
            cfg[key] = v
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "command", "verbose"):
            cfg[k] = v
    return cfg


def _echo(cfg: dict, command: str) -> dict:
    out = {k: v for k, v in sorted(cfg.items()) if k not in NON_RESULT_KEYS}
    out["command"] = command
    return out


def _load_env(path) -> Environment:
    if path is None:
        raise ConfigError("--env is required")
    p = Path(path)
    if not p.exists() and (DATA_DIR / f"{path}.json").exists():
        p = DATA_DIR / f"{path}.json"
    if not p.exists():
        raise FileNotFoundError(f"schedule {path} not found")
    try:
        return Environment.load(p)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"schedule {path} is not valid JSON: {exc}") from exc


def _load_template(path) -> EnvTemplate:
    p = Path(path)
    if not p.exists() and (DATA_DIR / f"{str(path).replace('-', '_')}.json").exists():
        p = DATA_DIR / f"{str(path).replace('-', '_')}.json"
    if not p.exists():
        raise FileNotFoundError(f"template {path} not found")
    try:
        return EnvTemplate.load(p)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"template {path} is not valid JSON: {exc}") from exc


def _policy_cfg(cfg: dict) -> PolicyConfig:
    return PolicyConfig(policy=cfg["policy"], q=cfg["q"], c=cfg["c"], life_mode=cfg["life_mode"],
                        seed=cfg["seed"])


def _emit(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_simulate(cfg: dict) -> dict:
    if (cfg["env"] is None) == (cfg["template"] is None):
        raise ConfigError("simulate needs exactly one of --env or --template")
    source = _load_env(cfg["env"]) if cfg["env"] is not None else _load_template(cfg["template"])
    threads = cfg.get("threads") or 1
    if threads < 1 or cfg["games"] < 0:
        raise ConfigError("--threads must be >= 1 and --games >= 0")
    res = run_games(source, _policy_cfg(cfg), cfg["games"], cfg["seed"], cfg["turns"], threads)
    doc = {"config": _echo(cfg, "simulate"), "summary": res.summary(), "seeds": res.seeds,
           "rewards": res.rewards, "regrets": res.regrets}
    if cfg.get("out"):
        res.config = doc["config"]
        export_results(res, cfg["out"])
        return doc
    _emit(doc, None)
    return doc


def cmd_replay(cfg: dict) -> dict:
    if cfg["log"] is None:
        raise ConfigError("--log is required")
    if not Path(cfg["log"]).exists():
        raise FileNotFoundError(f"log {cfg['log']} not found")
    events = parse_log(cfg["log"])
    res = replay_evaluate(events, _policy_cfg(cfg), cfg["turns"], init_m=cfg["init_m"],
                          window_start=cfg["window_start"])
    doc = {"config": _echo(cfg, "replay"), "result": res.to_json()}
    _emit(doc, cfg.get("out"))
    return doc


def cmd_bound(cfg: dict) -> dict:
    env = _load_env(cfg["env"])
    if cfg["theorem"] == 1:
        rep = theorem1_bound(env, cfg["q"], method=cfg["method"])
    else:
        rep = theorem3_bound(env, UcblConfig(cfg["c"]))
    doc = rep.to_json()
    doc["config"] = _echo(cfg, "bound")
    _emit(doc, cfg.get("out"))
    return doc


def cmd_generate_log(cfg: dict) -> dict:
    if not cfg.get("out"):
        raise ConfigError("generate-log needs --out PATH")
    if (cfg["env"] is None) == (cfg["template"] is None):
        raise ConfigError("generate-log needs exactly one of --env or --template")
    if cfg["env"] is not None:
        env = _load_env(cfg["env"])
    else:
        t = _load_template(cfg["template"])
        env = generate_env(t)
    side = generate_log(env, cfg["out"], seed=cfg["seed"])
    return {"config": _echo(cfg, "generate-log"), "events": side["events"]}


COMMANDS = {"simulate": cmd_simulate, "replay": cmd_replay, "bound": cmd_bound,
            "generate-log": cmd_generate_log}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return EXIT_USAGE
        cfg = resolve(args)
        COMMANDS[args.command](cfg)
        return EXIT_OK
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ConfigError,) as exc:
        return _code(exc, "ConfigError", EXIT_CONFIG)
    except (FileNotFoundError, PermissionError, IsADirectoryError, LogFormatError) as exc:
        return _code(exc, type(exc).__name__, EXIT_IO)
    except OSError as exc:
        return _code(exc, type(exc).__name__, EXIT_IO)
    except (EnumerationGuardError, StreamExhausted, MortalBanditError) as exc:
        return _code(exc, type(exc).__name__, EXIT_RUNTIME)


def _code(exc: Exception, kind: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": str(exc), "exit_code": code}) + "\n")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
