"""Simulation configuration, config files and team credentials."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path


class ConfigError(ValueError):
    """Raised for malformed or infeasible configuration.

    ``line`` is the 1-based line number in the offending file, when known.
    """

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)


@dataclass(frozen=True)
class SimConfig:
    steps: int = 500
    agents_per_team: int = 10
    width: int = 40
    height: int = 40
    vision: int = 5
    max_blocks: int = 3
    event_probability: float = 0.04
    clear_charge: int = 3
    disable_duration: int = 4
    deadline_ms: int = 4000
    connect_timeout_ms: int = 30000
    seed: int = 0
    teams: tuple[str, ...] = ("A", "B")

    # map generation
    obstacle_density: float = 0.1
    goal_zones: int = 2
    goal_radius: int = 2
    dispensers_per_type: int = 2
    block_types: int = 3
    max_attached: int = 10

    # clear events
    event_radius: int = 3
    event_regen_min: int = 5
    event_regen_max: int = 10

    # tasks
    task_cap: int = 2
    task_probability: float = 0.05
    task_duration_min: int = 100
    task_duration_max: int = 200

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.deadline_ms <= 0:
            raise ConfigError("deadline_ms must be > 0")
        if self.agents_per_team < 1:
            raise ConfigError("agents_per_team must be >= 1")
        if self.width < 10 or self.height < 10:
            raise ConfigError("grid must be at least 10x10")
        for name in ("event_probability", "task_probability", "obstacle_density"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.max_blocks < 2:
            raise ConfigError("max_blocks must be >= 2")
        if len(self.teams) != 2 or len(set(self.teams)) != 2:
            raise ConfigError("exactly two distinct team names are required")
        if self.event_regen_min > self.event_regen_max:
            raise ConfigError("event_regen_min exceeds event_regen_max")
        if self.task_duration_min > self.task_duration_max:
            raise ConfigError("task_duration_min exceeds task_duration_max")
        if self.block_types < 1 or self.clear_charge < 1 or self.vision < 0:
            raise ConfigError("block_types, clear_charge must be >= 1 and vision >= 0")

    @property
    def block_type_names(self) -> list[str]:
        return [f"b{i}" for i in range(self.block_types)]

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> SimConfig:
        known = {f.name for f in fields(cls)}
        kwargs = {k: v for k, v in data.items() if k in known}
        if "teams" in kwargs:
            kwargs["teams"] = tuple(kwargs["teams"])
        return cls(**kwargs)

    def dumps(self) -> str:
        """Render as the key-value text format read by :func:`parse_config`."""
        lines = []
        for key, value in self.to_dict().items():
            if isinstance(value, list):
                value = ",".join(value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


_FIELD_TYPES = {f.name: f for f in fields(SimConfig)}


def convert_value(key: str, raw: str):
    default = _FIELD_TYPES[key].default
    if isinstance(default, tuple):
        items = tuple(s.strip() for s in raw.split(",") if s.strip())
        return items
    if isinstance(default, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def parse_config(text: str, base: SimConfig | None = None, path: str | None = None) -> SimConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Unknown keys, bad values and invalid combinations raise :class:`ConfigError`
    carrying the line number.
    """
    values: dict = {}
    lines_of: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno, path)
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown key {key!r}", lineno, path)
        try:
            values[key] = convert_value(key, raw)
        except ValueError:
            raise ConfigError(f"bad value for {key}: {raw!r}", lineno, path) from None
        lines_of[key] = lineno
    try:
        return replace(base or SimConfig(), **values)
    except ConfigError as exc:
        # attribute to the last line that touched one of the named keys
        msg = str(exc)
        line = max((ln for k, ln in lines_of.items() if k in msg), default=None)
        raise ConfigError(msg, line, path) from None


def load_config(path: str | Path, base: SimConfig | None = None) -> SimConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", path=str(path)) from None
    return parse_config(text, base, str(path))


def parameter_sets(base: SimConfig | None = None) -> list[SimConfig]:
    """The three tournament settings: baseline, bigger tasks, more clear events."""
    base = base or SimConfig()
    return [
        base,
        replace(base, max_blocks=5),
        replace(base, event_probability=0.08),
    ]


def shipped_config(index: int) -> SimConfig:
    """Load one of the bundled ``sim1.cfg``..``sim3.cfg`` files (1-based)."""
    text = resources.files("mapcsim").joinpath(f"configs/sim{index}.cfg").read_text()
    return parse_config(text, path=f"sim{index}.cfg")


@dataclass(frozen=True)
class Credential:
    team: str
    name: str
    password: str


@dataclass
class Roster:
    """Agent slots of a match, in team order."""

    credentials: list[Credential] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for cred in self.credentials:
            if cred.name in seen:
                raise ConfigError(f"duplicate agent name {cred.name!r}")
            seen.add(cred.name)

    @classmethod
    def default(cls, config: SimConfig) -> Roster:
        creds = [
            Credential(team, f"agent{team}{i}", "1")
            for team in config.teams
            for i in range(1, config.agents_per_team + 1)
        ]
        return cls(creds)

    def team_of(self, name: str) -> str:
        return self.by_name()[name].team

    def by_name(self) -> dict[str, Credential]:
        return {c.name: c for c in self.credentials}

    def team_members(self, team: str) -> list[str]:
        return [c.name for c in self.credentials if c.team == team]

    def check(self, name: str, password: str) -> bool:
        cred = self.by_name().get(name)
        return cred is not None and cred.password == password

    def matches(self, config: SimConfig) -> None:
        for team in config.teams:
            n = len(self.team_members(team))
            if n != config.agents_per_team:
                raise ConfigError(
                    f"team {team!r} has {n} credentials, expected {config.agents_per_team}"
                )
        extra = {c.team for c in self.credentials} - set(config.teams)
        if extra:
            raise ConfigError(f"credentials for unknown teams: {sorted(extra)}")


def parse_credentials(text: str, path: str | None = None) -> Roster:
    """One ``team agent-name password`` triple per line; ``#`` comments allowed."""
    creds = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ConfigError("expected 'team agent password'", lineno, path)
        creds.append(Credential(*parts))
    try:
        return Roster(creds)
    except ConfigError as exc:
        raise ConfigError(str(exc), path=path) from None


def load_credentials(path: str | Path) -> Roster:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read credentials: {exc}", path=str(path)) from None
    return parse_credentials(text, str(path))


def dump_credentials(roster: Roster) -> str:
    return "".join(f"{c.team} {c.name} {c.password}\n" for c in roster.credentials)


__all__ = [
    "ConfigError",
    "SimConfig",
    "Credential",
    "Roster",
    "parse_config",
    "load_config",
    "convert_value",
    "parameter_sets",
    "shipped_config",
    "parse_credentials",
    "load_credentials",
    "dump_credentials",
]
