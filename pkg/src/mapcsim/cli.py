"""Command-line entry point: ``mapcsim <command> ...``.

Commands::

    serve            run one match on a TCP endpoint for remote agents
    match            run one match with in-process reference teams (no network)
    tournament       run the round-robin schedule of a team manifest
    agent run        connect one team of reference agents to a server
    replay render    print ASCII frames of a replay
    replay verify    re-simulate a replay and compare every frame

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error,
3 replay verification failure.
"""

from __future__ import annotations

import argparse
import asyncio
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

from . import __version__
from .agents.behaviors import BEHAVIORS, make_team
from .config import ConfigError, Roster, SimConfig, load_config, load_credentials, shipped_config
from .config import convert_value

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_VERIFY = 3

_OVERRIDABLE = [f.name for f in fields(SimConfig)]


def _add_config_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration",
                             "a config file or shipped setting, then per-field overrides")
    src = g.add_mutually_exclusive_group()
    src.add_argument("--config", metavar="FILE", help="key = value config file")
    src.add_argument("--setting", type=int, choices=(1, 2, 3),
                     help="use a shipped tournament setting")
    for name in _OVERRIDABLE:
        g.add_argument("--" + name.replace("_", "-"), dest=name, metavar="V", default=None,
                       help=argparse.SUPPRESS if name not in ("seed", "steps", "deadline_ms") else
                       f"override {name}")


def build_config(args: argparse.Namespace) -> SimConfig:
    """Config file (or shipped setting, or defaults) with command-line overrides applied."""
    if getattr(args, "config", None):
        base = load_config(args.config)
    elif getattr(args, "setting", None):
        base = shipped_config(args.setting)
    else:
        base = SimConfig()
    overrides = {}
    for name in _OVERRIDABLE:
        raw = getattr(args, name, None)
        if raw is None:
            continue
        try:
            overrides[name] = convert_value(name, raw)
        except ValueError:
            raise ConfigError(f"bad value for --{name.replace('_', '-')}: {raw!r}") from None
    return replace(base, **overrides) if overrides else base


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# commands ------------------------------------------------------------------------


def cmd_match(args) -> int:
    from .server import run_local_match

    cfg = build_config(args)
    teams = {}
    for team, behavior in zip(cfg.teams, (args.team_a, args.team_b)):
        members = [f"agent{team}{i}" for i in range(1, cfg.agents_per_team + 1)]
        teams[team] = make_team(behavior, team, members, cfg.seed)
    sim_id = args.sim_id or f"match-{cfg.seed}"
    report = run_local_match(cfg, teams, sim_id=sim_id)
    replay_path, stats_path = report.write(_out_dir(args))
    scores = " ".join(f"{t}={report.scores[t]}" for t in report.teams)
    print(f"{sim_id}: {scores} steps={report.steps}")
    print(f"final {report.final_hash}")
    print(f"wrote {replay_path} {stats_path}")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .server import serve_match

    cfg = build_config(args)
    roster = load_credentials(args.credentials) if args.credentials else Roster.default(cfg)
    roster.matches(cfg)
    report = asyncio.run(serve_match(cfg, roster, args.host, args.port,
                                     args.sim_id or f"serve-{cfg.seed}", _out_dir(args)))
    scores = " ".join(f"{t}={report.scores[t]}" for t in report.teams)
    print(f"{report.sim_id}: {scores} steps={report.steps}")
    print(f"final {report.final_hash}")
    return EXIT_OK


def cmd_tournament(args) -> int:
    from .tournament import parse_manifest, run_tournament

    cfg = build_config(args)
    try:
        text = Path(args.manifest).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read manifest: {exc}", path=args.manifest) from None
    entries = parse_manifest(text, args.manifest)
    standings, results = run_tournament(entries, cfg, _out_dir(args), jobs=args.jobs)
    for res in results:
        print(f"{res.sim_id}: {res.team_a}={res.score_a} {res.team_b}={res.score_b}")
    print()
    print(standings.to_csv(), end="")
    return EXIT_OK


def cmd_agent_run(args) -> int:
    from .agents.client import run_team

    roster = load_credentials(args.team)
    creds = roster.credentials
    if args.team_name:
        creds = [c for c in creds if c.team == args.team_name]
    if not creds:
        raise ConfigError("no credentials selected", path=args.team)
    if len({c.team for c in creds}) != 1:
        raise ConfigError("credentials span several teams; pick one with --team-name",
                          path=args.team)
    logs = asyncio.run(run_team(args.host, args.port, creds, args.behavior, args.seed,
                                retries=args.retries))
    ok = True
    for name, slog in logs.items():
        result = slog.ends[-1].score if slog.ends else "-"
        print(f"{name}: replies={slog.replies} late={slog.late_replies} score={result}"
              f"{'' if slog.bye else ' (no bye)'}")
        ok = ok and slog.bye
    return EXIT_OK if ok else EXIT_FAILURE


def _read_replay(path: str):
    from .replay import Replay

    try:
        return Replay.load(path)
    except OSError as exc:
        raise ConfigError(f"cannot read replay: {exc}", path=path) from None


def cmd_replay_render(args) -> int:
    from .replay import render

    try:
        replay = _read_replay(args.replay)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    steps = args.step or None
    if args.last and replay.frames:
        steps = [replay.frames[-1]["step"]]
    print(render(replay, steps), end="")
    if replay.truncated:
        print("warning: replay is truncated or damaged", file=sys.stderr)
    return EXIT_OK


def cmd_replay_verify(args) -> int:
    from .replay import verify_file

    try:
        result = verify_file(args.replay)
    except OSError as exc:
        raise ConfigError(f"cannot read replay: {exc}", path=args.replay) from None
    if result.ok:
        print("OK")
        return EXIT_OK
    print(f"FAILED at step {result.step}: {result.message}")
    return EXIT_VERIFY


# parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mapcsim", description="Agents Assemble simulation platform")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    behaviors = sorted(BEHAVIORS)

    p = sub.add_parser("match", help="one match with in-process reference teams")
    _add_config_options(p)
    p.add_argument("--team-a", default="assembler_pair", choices=behaviors)
    p.add_argument("--team-b", default="random_walker", choices=behaviors)
    p.add_argument("--sim-id")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("serve", help="one match for remote agents over TCP")
    _add_config_options(p)
    p.add_argument("--credentials", metavar="FILE", help="'team agent password' lines")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=12300)
    p.add_argument("--sim-id")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("tournament", help="round robin over a team manifest")
    _add_config_options(p)
    p.add_argument("manifest", help="'team behavior' lines")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_tournament)

    p = sub.add_parser("agent", help="agent client tools")
    asub = p.add_subparsers(dest="agent_command", required=True)
    p = asub.add_parser("run", help="connect one team to a server")
    p.add_argument("--team", required=True, metavar="FILE", help="credentials file")
    p.add_argument("--team-name", help="use only this team's credentials from the file")
    p.add_argument("--behavior", default="assembler_pair", choices=behaviors)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=12300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--retries", type=int, default=5)
    p.set_defaults(func=cmd_agent_run)

    p = sub.add_parser("replay", help="replay tools")
    rsub = p.add_subparsers(dest="replay_command", required=True)
    p = rsub.add_parser("render", help="print ASCII frames")
    p.add_argument("replay")
    p.add_argument("--step", type=int, action="append", help="only this step (repeatable)")
    p.add_argument("--last", action="store_true", help="only the last recorded step")
    p.set_defaults(func=cmd_replay_render)
    p = rsub.add_parser("verify", help="re-simulate and compare")
    p.add_argument("replay")
    p.set_defaults(func=cmd_replay_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
