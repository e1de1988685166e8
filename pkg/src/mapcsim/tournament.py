"""Round-robin tournaments, standings and per-step statistics."""

from __future__ import annotations

import csv
import io
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .config import ConfigError, SimConfig, parameter_sets
from .replay import Replay

SIMS_PER_MATCH = 3


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class Fixture:
    team_a: str
    team_b: str
    setting: int  # 1..3, index into parameter_sets()

    @property
    def sim_id(self) -> str:
        return f"{self.team_a}-vs-{self.team_b}-{self.setting}"


def schedule(teams: list[str]) -> list[Fixture]:
    """Every unordered pair meets once; a match is one simulation per setting."""
    if len(teams) < 2:
        raise ScheduleError("a tournament needs at least two teams")
    if len(set(teams)) != len(teams):
        raise ScheduleError("team names must be unique")
    return [
        Fixture(a, b, setting)
        for a, b in itertools.combinations(teams, 2)
        for setting in range(1, SIMS_PER_MATCH + 1)
    ]


@dataclass(frozen=True)
class SimResult:
    team_a: str
    team_b: str
    score_a: int
    score_b: int
    sim_id: str = ""


@dataclass
class StandingRow:
    team: str
    wins: int = 0
    draws: int = 0
    losses: int = 0
    score: int = 0

    @property
    def played(self) -> int:
        return self.wins + self.draws + self.losses

    @property
    def points(self) -> int:
        return 3 * self.wins + self.draws


@dataclass
class Standings:
    rows: dict[str, StandingRow] = field(default_factory=dict)

    def ranking(self) -> list[StandingRow]:
        """Points, then total simulation score, then team name."""
        return sorted(self.rows.values(), key=lambda r: (-r.points, -r.score, r.team))

    def __getitem__(self, team: str) -> StandingRow:
        return self.rows[team]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rank", "team", "played", "wins", "draws", "losses", "points", "score"])
        for rank, r in enumerate(self.ranking(), start=1):
            w.writerow([rank, r.team, r.played, r.wins, r.draws, r.losses, r.points, r.score])
        return buf.getvalue()


def compute_standings(results: list[SimResult], teams: list[str] | None = None) -> Standings:
    standings = Standings({t: StandingRow(t) for t in teams or ()})
    for res in results:
        a = standings.rows.setdefault(res.team_a, StandingRow(res.team_a))
        b = standings.rows.setdefault(res.team_b, StandingRow(res.team_b))
        a.score += res.score_a
        b.score += res.score_b
        if res.score_a > res.score_b:
            a.wins += 1
            b.losses += 1
        elif res.score_b > res.score_a:
            b.wins += 1
            a.losses += 1
        else:
            a.draws += 1
            b.draws += 1
    return standings


# statistics ---------------------------------------------------------------------

STATS_COLUMNS = [
    "step", "score_a", "score_b", "tasks_completed_a", "tasks_completed_b",
    "active_tasks", "disabled_a", "disabled_b", "clear_events", "flag",
]


@dataclass
class StatsTable:
    teams: list[str]
    rows: list[list] = field(default_factory=list)
    summary: list = field(default_factory=list)
    partial: bool = False

    def column(self, name: str) -> list:
        i = STATS_COLUMNS.index(name)
        return [row[i] for row in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        buf.write(f"# team_a={self.teams[0]} team_b={self.teams[1]}\n")
        w.writerow(STATS_COLUMNS)
        w.writerows(self.rows)
        w.writerow(self.summary)
        return buf.getvalue()


def record_stats(replay: Replay) -> StatsTable:
    """One row per recorded step (step 0 included) plus a summary row.

    A truncated replay yields the rows that could be read and a summary
    flagged ``partial``.
    """
    teams = replay.header["teams"]
    a, b = teams
    table = StatsTable(teams, partial=replay.truncated)
    total_events = 0
    try:
        for frame, doc in replay.documents():
            step = doc["step"]
            disabled = {a: 0, b: 0}
            for row in doc["things"]:
                if row[1] == "agent" and row[6] > step:
                    disabled[row[5]] += 1
            events = len(frame["events"])
            total_events += events
            table.rows.append([
                step, doc["scores"][a], doc["scores"][b], doc["completed"][a],
                doc["completed"][b], len(doc["tasks"]), disabled[a], disabled[b], events, "",
            ])
    except (KeyError, IndexError, TypeError, ValueError):
        table.partial = True
    last = table.rows[-1] if table.rows else [0] * len(STATS_COLUMNS)
    table.summary = [
        "summary", last[1], last[2], last[3], last[4], last[5],
        sum(r[6] for r in table.rows), sum(r[7] for r in table.rows), total_events,
        "partial" if table.partial else "complete",
    ]
    return table


def write_stats(table: StatsTable, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(table.to_csv())
    return path


# running ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TeamEntry:
    name: str
    behavior: str


def parse_manifest(text: str, path: str | None = None) -> list[TeamEntry]:
    """``team-name behavior`` per line; ``#`` comments allowed."""
    from .agents.behaviors import BEHAVIORS

    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ConfigError("expected 'team behavior'", lineno, path)
        if parts[1] not in BEHAVIORS:
            raise ConfigError(f"unknown behavior {parts[1]!r}", lineno, path)
        entries.append(TeamEntry(*parts))
    return entries


def fixture_config(base: SimConfig, fixture: Fixture, index: int) -> SimConfig:
    cfg = parameter_sets(base)[fixture.setting - 1]
    return replace(cfg, teams=(fixture.team_a, fixture.team_b), seed=base.seed + index)


def run_fixture(base: SimConfig, fixture: Fixture, index: int, behaviors: dict[str, str],
                out_dir: str | Path | None) -> SimResult:
    from .agents.behaviors import make_team
    from .server import run_local_match

    cfg = fixture_config(base, fixture, index)
    teams = {}
    for team in cfg.teams:
        members = [f"agent{team}{i}" for i in range(1, cfg.agents_per_team + 1)]
        teams[team] = make_team(behaviors[team], team, members, cfg.seed)
    report = run_local_match(cfg, teams, sim_id=fixture.sim_id)
    if out_dir is not None:
        report.write(out_dir)
    return SimResult(fixture.team_a, fixture.team_b, report.scores[fixture.team_a],
                     report.scores[fixture.team_b], fixture.sim_id)


def _run_fixture_args(args) -> SimResult:
    return run_fixture(*args)


def run_tournament(entries: list[TeamEntry], base: SimConfig, out_dir: str | Path | None = None,
                   jobs: int = 1) -> tuple[Standings, list[SimResult]]:
    behaviors = {e.name: e.behavior for e in entries}
    fixtures = schedule([e.name for e in entries])
    work = [(base, fx, i, behaviors, out_dir) for i, fx in enumerate(fixtures)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_fixture_args, work))
    else:
        results = [_run_fixture_args(w) for w in work]
    standings = compute_standings(results, [e.name for e in entries])
    if out_dir is not None:
        Path(out_dir, "standings.csv").write_text(standings.to_csv())
    return standings, results
