"""One simulation tick: validate actions, resolve them, roll clear events."""

from __future__ import annotations

from dataclasses import dataclass, field

from . import tasks
from .world import (
    EMPTY,
    OBSTACLE,
    Direction,
    Position,
    Rotation,
    Thing,
    WorldState,
    add,
    diamond,
    manhattan,
)

SUCCESS = "success"
FAILED_PATH = "failed_path"
FAILED_PARAMETER = "failed_parameter"
FAILED_TARGET = "failed_target"
FAILED_PARTNER = "failed_partner"
FAILED_BLOCKED = "failed_blocked"
FAILED_STATUS = "failed_status"
FAILED_RESOURCES = "failed_resources"
NO_OP = "no_op"

OUTCOMES = (
    SUCCESS, FAILED_PATH, FAILED_PARAMETER, FAILED_TARGET, FAILED_PARTNER,
    FAILED_BLOCKED, FAILED_STATUS, FAILED_RESOURCES, NO_OP,
)

ACTION_KINDS = (
    "move", "rotate", "attach", "detach", "connect", "disconnect",
    "request", "clear", "submit", "skip", "no_op",
)


@dataclass(frozen=True)
class Action:
    """An action as submitted; parameters stay raw until :func:`validate`."""

    kind: str
    params: tuple = ()

    def to_list(self) -> list:
        return [self.kind, list(self.params)]

    @classmethod
    def from_list(cls, data) -> Action:
        kind, params = data
        return cls(str(kind), tuple(params))


NO_OP_ACTION = Action("no_op")


@dataclass(frozen=True)
class ActionResult:
    agent: str
    action: Action
    outcome: str


@dataclass
class ClearEvent:
    center: Position
    radius: int
    regenerated: list[Position] = field(default_factory=list)

    @property
    def regenerated_count(self) -> int:
        return len(self.regenerated)

    def to_list(self) -> list:
        return [self.center[0], self.center[1], self.radius, self.regenerated_count]


def _as_int(value) -> int:
    if isinstance(value, bool):
        raise ValueError("bool is not an integer parameter")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        return int(value.strip())
    raise ValueError(f"not an integer: {value!r}")


def validate(action: Action):
    """Return typed parameters for ``action`` or raise ``ValueError``.

    ``no_op`` is reserved for the server and never validates.
    """
    kind, p = action.kind, action.params
    if kind in ("move", "attach", "detach", "request"):
        if len(p) != 1:
            raise ValueError("expected one direction")
        return Direction(p[0])
    if kind == "rotate":
        if len(p) != 1:
            raise ValueError("expected one rotation")
        return Rotation(p[0])
    if kind == "connect":
        if len(p) != 3 or not isinstance(p[0], str):
            raise ValueError("expected partner, x, y")
        return p[0], (_as_int(p[1]), _as_int(p[2]))
    if kind == "disconnect":
        if len(p) != 4:
            raise ValueError("expected x1, y1, x2, y2")
        x1, y1, x2, y2 = map(_as_int, p)
        return (x1, y1), (x2, y2)
    if kind == "clear":
        if len(p) != 2:
            raise ValueError("expected x, y")
        return _as_int(p[0]), _as_int(p[1])
    if kind == "submit":
        if len(p) != 1 or not isinstance(p[0], str):
            raise ValueError("expected task name")
        return p[0]
    if kind == "skip":
        if p:
            raise ValueError("skip takes no parameters")
        return None
    raise ValueError(f"unknown action {kind!r}")


def is_valid(action: Action) -> bool:
    try:
        validate(action)
    except ValueError:
        return False
    return True


# individual resolvers -------------------------------------------------------


def resolve_move(world: WorldState, agent: Thing, direction: Direction) -> str:
    motion = world.translate_component(world.component_of(agent.id), direction)
    return SUCCESS if motion.ok else FAILED_PATH


def resolve_rotate(world: WorldState, agent: Thing, rotation: Rotation) -> str:
    motion = world.rotate_component(agent.id, rotation)
    return SUCCESS if motion.ok else FAILED_BLOCKED


def resolve_request(world: WorldState, agent: Thing, direction: Direction) -> str:
    cell = add(agent.pos, direction.offset)
    block_type = world.dispensers.get(cell)
    if block_type is None:
        return FAILED_TARGET
    if cell in world.occupancy:
        return FAILED_BLOCKED
    world.add_block(block_type, cell)
    return SUCCESS


def resolve_attach(world: WorldState, agent: Thing, direction: Direction) -> str:
    target = world.thing_at(add(agent.pos, direction.offset))
    if target is None or target.kind != "block":
        return FAILED_TARGET
    mine = world.component_of(agent.id)
    if target.id in mine:
        return FAILED_TARGET
    if len(mine | world.component_of(target.id)) > world.config.max_attached:
        return FAILED_RESOURCES
    world.add_edge(agent.id, target.id)
    return SUCCESS


def resolve_detach(world: WorldState, agent: Thing, direction: Direction) -> str:
    target = world.thing_at(add(agent.pos, direction.offset))
    if target is None or not world.has_edge(agent.id, target.id):
        return FAILED_TARGET
    world.remove_edge(agent.id, target.id)
    world.prune_orphans([target.id])
    return SUCCESS


def resolve_disconnect(world: WorldState, agent: Thing, rel_a: Position, rel_b: Position) -> str:
    a = world.thing_at(add(agent.pos, rel_a))
    b = world.thing_at(add(agent.pos, rel_b))
    if a is None or b is None or a.kind != "block" or b.kind != "block":
        return FAILED_TARGET
    if not world.has_edge(a.id, b.id) or a.id not in world.component_of(agent.id):
        return FAILED_TARGET
    world.remove_edge(a.id, b.id)
    world.prune_orphans([a.id, b.id])
    return SUCCESS


def resolve_connect(
    world: WorldState, agent_a: Thing, agent_b: Thing, rel_a: Position, rel_b: Position
) -> tuple[str, str]:
    """Join a block held by ``agent_a`` to one held by ``agent_b``.

    Both callers must already have named each other; the outcome is shared.
    """
    if agent_a.team != agent_b.team:
        return FAILED_PARTNER, FAILED_PARTNER
    block_a = world.thing_at(add(agent_a.pos, rel_a))
    block_b = world.thing_at(add(agent_b.pos, rel_b))
    if block_a is None or block_b is None or block_a.kind != "block" or block_b.kind != "block":
        return FAILED_TARGET, FAILED_TARGET
    comp_a = world.component_of(agent_a.id)
    comp_b = world.component_of(agent_b.id)
    if block_a.id not in comp_a or block_b.id not in comp_b:
        return FAILED_TARGET, FAILED_TARGET
    if manhattan(block_a.pos, block_b.pos) != 1 or block_b.id in comp_a:
        return FAILED_TARGET, FAILED_TARGET
    if len(comp_a | comp_b) > world.config.max_attached:
        return FAILED_RESOURCES, FAILED_RESOURCES
    world.add_edge(block_a.id, block_b.id)
    return SUCCESS, SUCCESS


def _clear_cell(world: WorldState, pos: Position) -> None:
    """Remove whatever a resolved clear hits at ``pos``."""
    thing = world.thing_at(pos)
    if thing is not None:
        if thing.is_agent:
            world.disable_agent(thing)
        else:
            world.remove_block(thing.id)
    if world.terrain_at(pos) == OBSTACLE and not world.is_border(pos):
        world.set_terrain(pos, EMPTY)


def resolve_clear(world: WorldState, agent: Thing, rel_target: Position) -> str:
    if manhattan(rel_target, (0, 0)) > world.config.vision:
        return FAILED_TARGET
    target = add(agent.pos, rel_target)
    if not world.in_bounds(target) or world.is_border(target):
        return FAILED_TARGET
    if agent.charge_target == target:
        agent.charge_count += 1
    else:
        agent.charge_target = target
        agent.charge_count = 1
    world.markers[target] = world.step + 1
    if agent.charge_count >= world.config.clear_charge:
        agent.charge_target = None
        agent.charge_count = 0
        _clear_cell(world, target)
    return SUCCESS


def resolve_submit(world: WorldState, agent: Thing, task_name: str) -> str:
    return tasks.submit(world, agent.id, task_name)


_SIMPLE = {
    "move": resolve_move,
    "rotate": resolve_rotate,
    "request": resolve_request,
    "attach": resolve_attach,
    "detach": resolve_detach,
    "clear": resolve_clear,
    "submit": resolve_submit,
}


# events ----------------------------------------------------------------------


def apply_clear_event(world: WorldState, center: Position | None = None) -> ClearEvent:
    """Clear a diamond around a random interior cell, then scatter new obstacles."""
    cfg = world.config
    rng = world.rng
    if center is None:
        center = (rng.randint(1, world.width - 2), rng.randint(1, world.height - 2))
    radius = cfg.event_radius
    for off in diamond(radius):
        pos = add(center, off)
        if not world.in_bounds(pos) or world.is_border(pos):
            continue
        _clear_cell(world, pos)
        world.markers[pos] = world.step + 1
    count = rng.randint(cfg.event_regen_min, cfg.event_regen_max)
    candidates = [
        pos for pos in (add(center, off) for off in diamond(radius + 2))
        if world.in_bounds(pos) and not world.is_border(pos)
        and world.terrain_at(pos) == EMPTY
        and pos not in world.occupancy and pos not in world.dispensers
    ]
    placed = rng.sample(candidates, min(count, len(candidates)))
    for pos in placed:
        world.set_terrain(pos, OBSTACLE)
    return ClearEvent(center, radius, placed)


# the tick ---------------------------------------------------------------------


def step(
    world: WorldState, actions: dict[str, Action | None]
) -> tuple[WorldState, list[ActionResult], list[ClearEvent]]:
    """Advance ``world`` by one tick in place.

    Missing agents (or ``None`` entries) get ``no_op``. Actions resolve one
    agent at a time in a seeded shuffle of the agent list; a mutually agreed
    connect resolves both partners at the earlier partner's turn.
    """
    world.markers = {p: e for p, e in world.markers.items() if e > world.step}

    names = world.agent_names()
    outcome: dict[str, str] = {}
    submitted: dict[str, Action] = {}
    params: dict[str, object] = {}
    for name in names:
        act = actions.get(name)
        if act is None or act is NO_OP_ACTION:
            submitted[name] = NO_OP_ACTION
            outcome[name] = NO_OP
            continue
        submitted[name] = act
        try:
            params[name] = validate(act)
        except ValueError:
            outcome[name] = FAILED_PARAMETER

    order = list(names)
    world.rng.shuffle(order)
    for name in order:
        if name in outcome:
            continue
        agent = world.agent(name)
        act = submitted[name]
        if act.kind == "skip":
            outcome[name] = SUCCESS
        elif world.is_disabled(agent):
            outcome[name] = FAILED_STATUS
        elif act.kind == "connect":
            _resolve_connect_slot(world, name, submitted, params, outcome)
        elif act.kind == "disconnect":
            rel_a, rel_b = params[name]
            outcome[name] = resolve_disconnect(world, agent, rel_a, rel_b)
        else:
            outcome[name] = _SIMPLE[act.kind](world, agent, params[name])

    events = []
    if world.rng.random() < world.config.event_probability:
        events.append(apply_clear_event(world))

    world.step += 1
    tasks.retire_expired(world)
    tasks.maybe_spawn_task(world)

    results = [ActionResult(name, submitted[name], outcome[name]) for name in names]
    return world, results, events


def _resolve_connect_slot(world, name, submitted, params, outcome) -> None:
    partner_name, rel_a = params[name]
    agent = world.agent(name)
    partner_id = world.agents.get(partner_name)
    partner_params = params.get(partner_name)
    if (
        partner_id is None
        or partner_name == name
        or partner_name in outcome
        or submitted[partner_name].kind != "connect"
        or partner_params is None
        or partner_params[0] != name
    ):
        outcome[name] = FAILED_PARTNER
        return
    partner = world.things[partner_id]
    if world.is_disabled(partner):
        outcome[name] = FAILED_PARTNER
        outcome[partner_name] = FAILED_STATUS
        return
    outcome[name], outcome[partner_name] = resolve_connect(
        world, agent, partner, rel_a, partner_params[1]
    )
