"""Grid world state and attachment geometry.

Coordinates: x grows east, y grows south. Positions are plain ``(x, y)``
tuples; percepts use the same axes centred on the perceiving agent.
"""

from __future__ import annotations

import enum
import hashlib
import json
import random
from dataclasses import dataclass, field

from .config import ConfigError, Roster, SimConfig

Position = tuple[int, int]

EMPTY = 0
OBSTACLE = 1
GOAL = 2

_TERRAIN_GLYPH = {EMPTY: ".", OBSTACLE: "#", GOAL: "G"}
_GLYPH_TERRAIN = {v: k for k, v in _TERRAIN_GLYPH.items()}

DOCUMENT_VERSION = 1


class WorldError(Exception):
    """Infeasible world construction or lookup of a missing thing."""


class Direction(enum.Enum):
    NORTH = "n"
    SOUTH = "s"
    EAST = "e"
    WEST = "w"

    @property
    def offset(self) -> Position:
        return _OFFSETS[self]

    @classmethod
    def from_offset(cls, offset: Position) -> Direction:
        for d, off in _OFFSETS.items():
            if off == offset:
                return d
        raise ValueError(f"not a unit offset: {offset}")


_OFFSETS = {
    Direction.NORTH: (0, -1),
    Direction.SOUTH: (0, 1),
    Direction.EAST: (1, 0),
    Direction.WEST: (-1, 0),
}


class Rotation(enum.Enum):
    CLOCKWISE = "cw"
    COUNTERCLOCKWISE = "ccw"

    def apply(self, offset: Position) -> Position:
        x, y = offset
        if self is Rotation.CLOCKWISE:
            return (-y, x)
        return (y, -x)


def manhattan(a: Position, b: Position) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def add(a: Position, b: Position) -> Position:
    return (a[0] + b[0], a[1] + b[1])


def sub(a: Position, b: Position) -> Position:
    return (a[0] - b[0], a[1] - b[1])


def diamond(radius: int) -> list[Position]:
    """Offsets with Manhattan norm <= radius, row-major order."""
    return [
        (dx, dy)
        for dy in range(-radius, radius + 1)
        for dx in range(-radius + abs(dy), radius - abs(dy) + 1)
    ]


@dataclass(slots=True)
class Thing:
    id: int
    kind: str  # "agent" | "block"
    pos: Position
    name: str = ""
    team: str = ""
    block_type: str = ""
    disabled_until: int = 0
    charge_target: Position | None = None
    charge_count: int = 0

    @property
    def is_agent(self) -> bool:
        return self.kind == "agent"

    def to_row(self) -> list:
        if self.kind == "agent":
            cx, cy = self.charge_target if self.charge_target is not None else (None, None)
            return [self.id, "agent", self.pos[0], self.pos[1], self.name, self.team,
                    self.disabled_until, cx, cy, self.charge_count]
        return [self.id, "block", self.pos[0], self.pos[1], self.block_type]


@dataclass
class Motion:
    """Outcome of a translate or rotate attempt; ``blocked`` is set on failure."""

    positions: dict[int, Position] = field(default_factory=dict)
    blocked: Position | None = None

    @property
    def ok(self) -> bool:
        return self.blocked is None


@dataclass
class WorldState:
    config: SimConfig
    width: int
    height: int
    terrain: bytearray
    rng: random.Random
    dispensers: dict[Position, str] = field(default_factory=dict)
    things: dict[int, Thing] = field(default_factory=dict)
    occupancy: dict[Position, int] = field(default_factory=dict)
    edges: dict[int, set[int]] = field(default_factory=dict)
    tasks: dict = field(default_factory=dict)
    scores: dict[str, int] = field(default_factory=dict)
    markers: dict[Position, int] = field(default_factory=dict)
    agents: dict[str, int] = field(default_factory=dict)
    step: int = 0
    next_id: int = 1
    task_counter: int = 0
    tasks_completed: dict[str, int] = field(default_factory=dict)

    # terrain ------------------------------------------------------------

    def in_bounds(self, pos: Position) -> bool:
        return 0 <= pos[0] < self.width and 0 <= pos[1] < self.height

    def is_border(self, pos: Position) -> bool:
        x, y = pos
        return x == 0 or y == 0 or x == self.width - 1 or y == self.height - 1

    def terrain_at(self, pos: Position) -> int:
        if not self.in_bounds(pos):
            return OBSTACLE
        return self.terrain[pos[1] * self.width + pos[0]]

    def set_terrain(self, pos: Position, value: int) -> None:
        self.terrain[pos[1] * self.width + pos[0]] = value

    def is_obstacle(self, pos: Position) -> bool:
        return self.terrain_at(pos) == OBSTACLE

    def is_goal(self, pos: Position) -> bool:
        return self.terrain_at(pos) == GOAL

    def is_free(self, pos: Position) -> bool:
        return not self.is_obstacle(pos) and pos not in self.occupancy

    # things -------------------------------------------------------------

    def thing(self, thing_id: int) -> Thing:
        try:
            return self.things[thing_id]
        except KeyError:
            raise WorldError(f"unknown thing id {thing_id}") from None

    def thing_at(self, pos: Position) -> Thing | None:
        tid = self.occupancy.get(pos)
        return None if tid is None else self.things[tid]

    def agent(self, name: str) -> Thing:
        try:
            return self.things[self.agents[name]]
        except KeyError:
            raise WorldError(f"unknown agent {name!r}") from None

    def agent_names(self) -> list[str]:
        return list(self.agents)

    def is_disabled(self, agent: Thing) -> bool:
        return agent.disabled_until > self.step

    def _new_id(self) -> int:
        tid = self.next_id
        self.next_id += 1
        return tid

    def add_agent(self, name: str, team: str, pos: Position) -> Thing:
        if pos in self.occupancy:
            raise WorldError(f"cell {pos} occupied")
        agent = Thing(self._new_id(), "agent", pos, name=name, team=team)
        self.things[agent.id] = agent
        self.occupancy[pos] = agent.id
        self.agents[name] = agent.id
        return agent

    def add_block(self, block_type: str, pos: Position) -> Thing:
        if pos in self.occupancy:
            raise WorldError(f"cell {pos} occupied")
        block = Thing(self._new_id(), "block", pos, block_type=block_type)
        self.things[block.id] = block
        self.occupancy[pos] = block.id
        return block

    def remove_block(self, block_id: int) -> None:
        """Delete a block, severing its edges and freeing orphaned blocks."""
        block = self.thing(block_id)
        neighbours = list(self.edges.get(block_id, ()))
        for other in neighbours:
            self.remove_edge(block_id, other)
        del self.things[block_id]
        del self.occupancy[block.pos]
        self.prune_orphans(neighbours)

    # attachments --------------------------------------------------------

    def attached(self, thing_id: int) -> set[int]:
        return self.edges.get(thing_id, set())

    def add_edge(self, a: int, b: int) -> None:
        self.edges.setdefault(a, set()).add(b)
        self.edges.setdefault(b, set()).add(a)

    def remove_edge(self, a: int, b: int) -> None:
        self.edges.get(a, set()).discard(b)
        self.edges.get(b, set()).discard(a)
        for tid in (a, b):
            if tid in self.edges and not self.edges[tid]:
                del self.edges[tid]

    def has_edge(self, a: int, b: int) -> bool:
        return b in self.edges.get(a, ())

    def component_of(self, thing_id: int) -> set[int]:
        self.thing(thing_id)
        seen = {thing_id}
        stack = [thing_id]
        while stack:
            for nxt in self.edges.get(stack.pop(), ()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen

    def prune_orphans(self, seeds) -> None:
        """Dissolve every agent-less component reachable from ``seeds``."""
        for seed in seeds:
            if seed not in self.things or seed not in self.edges:
                continue
            comp = self.component_of(seed)
            if any(self.things[t].is_agent for t in comp):
                continue
            for t in comp:
                self.edges.pop(t, None)

    def detach_all(self, agent_id: int) -> None:
        neighbours = list(self.edges.get(agent_id, ()))
        for other in neighbours:
            self.remove_edge(agent_id, other)
        self.prune_orphans(neighbours)

    def disable_agent(self, agent: Thing) -> None:
        agent.disabled_until = self.step + 1 + self.config.disable_duration
        agent.charge_target = None
        agent.charge_count = 0
        self.detach_all(agent.id)

    # motion -------------------------------------------------------------

    def _check_targets(self, ids: set[int], targets: dict[int, Position]) -> Position | None:
        # iterate in id order so the reported cell is deterministic
        for tid in sorted(ids):
            pos = targets[tid]
            if self.is_obstacle(pos):
                return pos
            occupant = self.occupancy.get(pos)
            if occupant is not None and occupant not in ids:
                return pos
        return None

    def _apply(self, targets: dict[int, Position]) -> None:
        for tid in targets:
            del self.occupancy[self.things[tid].pos]
        for tid, pos in targets.items():
            self.things[tid].pos = pos
            self.occupancy[pos] = tid

    def translate_component(self, ids: set[int], direction: Direction) -> Motion:
        off = direction.offset
        targets = {tid: add(self.things[tid].pos, off) for tid in ids}
        blocked = self._check_targets(ids, targets)
        if blocked is not None:
            return Motion(blocked=blocked)
        self._apply(targets)
        return Motion(targets)

    def rotate_component(self, agent_id: int, rotation: Rotation) -> Motion:
        """Rotate the agent's component by 90 degrees about the agent's cell."""
        pivot = self.thing(agent_id).pos
        ids = self.component_of(agent_id)
        targets = {
            tid: add(pivot, rotation.apply(sub(self.things[tid].pos, pivot))) for tid in ids
        }
        blocked = self._check_targets(ids, targets)
        if blocked is not None:
            return Motion(blocked=blocked)
        self._apply(targets)
        return Motion(targets)

    # serialization ------------------------------------------------------

    def terrain_rows(self) -> list[str]:
        w = self.width
        return [
            "".join(_TERRAIN_GLYPH[v] for v in self.terrain[y * w:(y + 1) * w])
            for y in range(self.height)
        ]

    def to_document(self) -> dict:
        """Self-describing, fixed-order snapshot; byte-stable under :func:`canonical`."""
        return {
            "version": DOCUMENT_VERSION,
            "step": self.step,
            "width": self.width,
            "height": self.height,
            "terrain": self.terrain_rows(),
            "dispensers": [[x, y, t] for (x, y), t in sorted(self.dispensers.items())],
            "things": [self.things[tid].to_row() for tid in sorted(self.things)],
            "edges": sorted([a, b] for a, nbrs in self.edges.items() for b in nbrs if a < b),
            "tasks": [self.tasks[name].to_dict() for name in sorted(self.tasks)],
            "scores": {team: self.scores[team] for team in self.config.teams},
            "completed": {team: self.tasks_completed.get(team, 0) for team in self.config.teams},
            "markers": [[x, y, e] for (x, y), e in sorted(self.markers.items())],
            "counters": [self.next_id, self.task_counter],
            "rng": hashlib.sha256(repr(self.rng.getstate()).encode()).hexdigest()[:16],
        }

    def state_hash(self) -> str:
        return hashlib.sha256(canonical(self.to_document()).encode()).hexdigest()


def canonical(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=True)


def terrain_from_rows(rows: list[str]) -> bytearray:
    return bytearray(_GLYPH_TERRAIN[c] for row in rows for c in row)


def create_world(config: SimConfig, seed: int | None = None, roster: Roster | None = None) -> WorldState:
    """Generate a world: obstacle border, random interior, goal zones, dispensers, agents.

    Identical ``(config, seed)`` yields identical worlds. Raises ``ConfigError``
    when the agents do not fit on the free cells.
    """
    seed = config.seed if seed is None else seed
    roster = roster or Roster.default(config)
    rng = random.Random(seed)
    w, h = config.width, config.height
    world = WorldState(config, w, h, bytearray(w * h), rng)
    world.scores = {team: 0 for team in config.teams}
    world.tasks_completed = {team: 0 for team in config.teams}

    for y in range(h):
        for x in range(w):
            if world.is_border((x, y)) or rng.random() < config.obstacle_density:
                world.set_terrain((x, y), OBSTACLE)

    interior = [(x, y) for y in range(1, h - 1) for x in range(1, w - 1)]
    for _ in range(config.goal_zones):
        cx, cy = rng.choice(interior)
        for dx, dy in diamond(config.goal_radius):
            pos = (cx + dx, cy + dy)
            if 0 < pos[0] < w - 1 and 0 < pos[1] < h - 1:
                world.set_terrain(pos, GOAL)

    for block_type in config.block_type_names:
        for _ in range(config.dispensers_per_type):
            free = [p for p in interior
                    if world.terrain_at(p) == EMPTY and p not in world.dispensers]
            if not free:
                raise ConfigError("no room for dispensers")
            world.dispensers[rng.choice(free)] = block_type

    free = [p for p in interior if not world.is_obstacle(p)]
    roster.matches(config)
    needed = len(roster.credentials)
    if needed > len(free):
        raise ConfigError(f"{needed} agents do not fit on {len(free)} free cells")
    for cred, pos in zip(roster.credentials, rng.sample(free, needed)):
        world.add_agent(cred.name, cred.team, pos)
    return world


def check_invariants(world: WorldState) -> list[str]:
    """Return a list of violated structural invariants (empty when sound)."""
    problems = []
    occupied = {}
    for tid, t in world.things.items():
        if t.pos in occupied:
            problems.append(f"cell {t.pos} shared by {occupied[t.pos]} and {tid}")
        occupied[t.pos] = tid
        if world.occupancy.get(t.pos) != tid:
            problems.append(f"occupancy index out of sync for {tid}")
        if world.is_obstacle(t.pos):
            problems.append(f"thing {tid} inside obstacle {t.pos}")
    if len(world.occupancy) != len(world.things):
        problems.append("stale occupancy entries")
    for a, nbrs in world.edges.items():
        for b in nbrs:
            if a not in world.edges.get(b, ()):
                problems.append(f"asymmetric edge {a}-{b}")
            if manhattan(world.things[a].pos, world.things[b].pos) != 1:
                problems.append(f"edge {a}-{b} not between adjacent cells")
            if world.things[a].is_agent and world.things[b].is_agent:
                problems.append(f"agent-agent edge {a}-{b}")
    seen: set[int] = set()
    for tid in world.edges:
        if tid in seen:
            continue
        comp = world.component_of(tid)
        seen |= comp
        n_edges = sum(len(world.edges.get(t, ())) for t in comp) // 2
        if n_edges != len(comp) - 1:
            problems.append(f"component of {tid} is not a tree")
        if not any(world.things[t].is_agent for t in comp):
            problems.append(f"component of {tid} has no agent")
        if len(comp) > world.config.max_attached:
            problems.append(f"component of {tid} exceeds size limit")
    for t in world.things.values():
        if t.is_agent and world.is_disabled(t) and world.edges.get(t.id):
            problems.append(f"disabled agent {t.name} still attached")
    for x in range(world.width):
        for y in (0, world.height - 1):
            if not world.is_obstacle((x, y)):
                problems.append(f"border cell {(x, y)} open")
    for y in range(world.height):
        for x in (0, world.width - 1):
            if not world.is_obstacle((x, y)):
                problems.append(f"border cell {(x, y)} open")
    return problems
