"""Local, relative-coordinate percepts."""

from __future__ import annotations

from dataclasses import dataclass, field

from .world import GOAL, OBSTACLE, Position, WorldState, diamond

_TERRAIN_NAME = {OBSTACLE: "obstacle", GOAL: "goal"}


@dataclass
class Percept:
    step: int
    score: int
    last_action: str = "no_op"
    last_action_params: list = field(default_factory=list)
    last_action_result: str = "no_op"  # nothing has happened before step 0
    disabled: bool = False
    things: list[list] = field(default_factory=list)  # [x, y, kind, team-or-type]
    terrain: list[list] = field(default_factory=list)  # [x, y, "obstacle" | "goal"]
    dispensers: list[list] = field(default_factory=list)  # [x, y, type]
    markers: list[list] = field(default_factory=list)  # [x, y]
    attached: list[list] = field(default_factory=list)  # [x, y]
    tasks: list[dict] = field(default_factory=list)
    deadline: int = 0

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "score": self.score,
            "lastAction": self.last_action,
            "lastActionParams": self.last_action_params,
            "lastActionResult": self.last_action_result,
            "disabled": self.disabled,
            "things": self.things,
            "terrain": self.terrain,
            "dispensers": self.dispensers,
            "markers": self.markers,
            "attached": self.attached,
            "tasks": self.tasks,
            "deadline": self.deadline,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Percept:
        return cls(
            step=d["step"],
            score=d["score"],
            last_action=d["lastAction"],
            last_action_params=list(d["lastActionParams"]),
            last_action_result=d["lastActionResult"],
            disabled=d["disabled"],
            things=[list(t) for t in d["things"]],
            terrain=[list(t) for t in d["terrain"]],
            dispensers=[list(t) for t in d["dispensers"]],
            markers=[list(t) for t in d["markers"]],
            attached=[list(t) for t in d["attached"]],
            tasks=list(d["tasks"]),
            deadline=d["deadline"],
        )

    # convenience lookups used by agent behaviors

    def thing_at(self, pos: Position) -> list | None:
        for t in self.things:
            if (t[0], t[1]) == pos:
                return t
        return None

    def obstacle_cells(self) -> set[Position]:
        return {(x, y) for x, y, kind in self.terrain if kind == "obstacle"}

    def goal_cells(self) -> set[Position]:
        return {(x, y) for x, y, kind in self.terrain if kind == "goal"}


def visible_cells(world: WorldState, agent_id: int) -> list[Position]:
    """Relative offsets of in-bounds cells within the agent's vision diamond."""
    ax, ay = world.thing(agent_id).pos
    return [(dx, dy) for dx, dy in diamond(world.config.vision)
            if world.in_bounds((ax + dx, ay + dy))]


def compute_percept(world: WorldState, agent_id: int, last=None) -> Percept:
    """Observation for one agent. ``last`` is its previous ActionResult, if any."""
    agent = world.thing(agent_id)
    ax, ay = agent.pos
    things, terrain, dispensers, markers, attached = [], [], [], [], []
    for dx, dy in visible_cells(world, agent_id):
        pos = (ax + dx, ay + dy)
        kind = world.terrain_at(pos)
        if kind in _TERRAIN_NAME:
            terrain.append([dx, dy, _TERRAIN_NAME[kind]])
        tid = world.occupancy.get(pos)
        if tid is not None:
            t = world.things[tid]
            things.append([dx, dy, t.kind, t.team if t.is_agent else t.block_type])
            if world.edges.get(tid):
                attached.append([dx, dy])
        if pos in world.dispensers:
            dispensers.append([dx, dy, world.dispensers[pos]])
        if pos in world.markers:
            markers.append([dx, dy])
    percept = Percept(
        step=world.step,
        score=world.scores[agent.team],
        disabled=world.is_disabled(agent),
        things=sorted(things),
        terrain=sorted(terrain),
        dispensers=sorted(dispensers),
        markers=sorted(markers),
        attached=sorted(attached),
        tasks=[world.tasks[n].to_dict() for n in sorted(world.tasks)],
    )
    if last is not None:
        percept.last_action = last.action.kind
        percept.last_action_params = list(last.action.params)
        percept.last_action_result = last.outcome
    return percept
