"""Reference team behaviors.

Each team object exposes ``act(agent_name, percept) -> Action`` and keeps its
members' memory in-process, so one object must serve a whole team.
"""

from __future__ import annotations

import hashlib
import random
import threading
from collections import deque
from dataclasses import dataclass, field

from ..engine import Action
from ..perception import Percept
from ..world import Direction, Position, Rotation, add, manhattan, sub
from .localmap import Cell, LocalMap, MergeConflict, merge_maps

DIRS = [Direction.NORTH, Direction.EAST, Direction.SOUTH, Direction.WEST]
SKIP = Action("skip")


def _seed(*parts) -> int:
    digest = hashlib.sha256("/".join(map(str, parts)).encode()).digest()
    return int.from_bytes(digest[:8], "big")


def move(d: Direction) -> Action:
    return Action("move", (d.value,))


@dataclass
class Mind:
    """What one agent believes about itself."""

    name: str
    rng: random.Random
    vision: int = 5
    lmap: LocalMap = field(default_factory=LocalMap)
    attached: set[Position] = field(default_factory=set)  # own blocks, relative
    heading: Direction = Direction.NORTH
    step: int = -1

    def update(self, p: Percept) -> list[Position]:
        """Fold the previous action's outcome and the new observation into memory."""
        ok = p.last_action_result == "success"
        params = p.last_action_params
        if ok and p.last_action == "move":
            self.lmap.position = add(self.lmap.position, Direction(params[0]).offset)
        elif ok and p.last_action == "rotate":
            rot = Rotation(params[0])
            self.attached = {rot.apply(a) for a in self.attached}
        elif ok and p.last_action == "attach":
            self.attached.add(Direction(params[0]).offset)
        elif ok and p.last_action == "detach":
            self.attached.discard(Direction(params[0]).offset)
        if p.disabled:
            self.attached.clear()
        # keep only blocks the percept still shows as attached
        marked = {(x, y) for x, y in p.attached}
        self.attached = {a for a in self.attached
                         if a in marked and (t := p.thing_at(a)) is not None and t[2] == "block"}
        self.step = p.step
        return self.lmap.observe(p, self.vision)


def _free_dirs(p: Percept) -> list[Direction]:
    blocked = p.obstacle_cells() | {(t[0], t[1]) for t in p.things}
    return [d for d in DIRS if d.offset not in blocked]


class RandomWalker:
    """Moves to a random free neighbour, or skips."""

    name = "random_walker"

    def __init__(self, team: str, members: list[str], seed: int = 0):
        self.team = team
        self.rngs = {m: random.Random(_seed(seed, team, m)) for m in members}

    def act(self, agent: str, percept: Percept) -> Action:
        rng = self.rngs[agent]
        options = _free_dirs(percept)
        if not options or rng.random() < 0.1:
            return SKIP
        return move(rng.choice(options))


class ExplorerDigger:
    """Walks straight lines and clears obstacles in its way."""

    name = "explorer_digger"

    def __init__(self, team: str, members: list[str], seed: int = 0, vision: int = 5):
        self.team = team
        self.minds = {m: Mind(m, random.Random(_seed(seed, team, m)), vision) for m in members}
        for mind in self.minds.values():
            mind.heading = mind.rng.choice(DIRS)

    def act(self, agent: str, percept: Percept) -> Action:
        mind = self.minds[agent]
        mind.update(percept)
        return explore_step(mind, percept, dig=True)


def explore_step(mind: Mind, p: Percept, dig: bool) -> Action:
    if p.disabled:
        return SKIP
    failed_move = p.last_action == "move" and p.last_action_result != "success"
    failed_clear = p.last_action == "clear" and p.last_action_result != "success"
    if failed_move or failed_clear or mind.rng.random() < 0.05:
        mind.heading = mind.rng.choice(DIRS)
    ahead = mind.heading.offset
    if ahead in p.obstacle_cells():
        if dig:
            return Action("clear", ahead)
        options = _free_dirs(p)
        if not options:
            return SKIP
        mind.heading = mind.rng.choice(options)
        return move(mind.heading)
    if p.thing_at(ahead) is not None:
        options = [d for d in _free_dirs(p) if d != mind.heading]
        if not options:
            return SKIP
        mind.heading = mind.rng.choice(options)
    return move(mind.heading)


# team memory -------------------------------------------------------------------


@dataclass
class Sighting:
    pos: Position  # agent's own-frame position at that step
    seen: list[Position]  # relative positions of visible teammates


class Blackboard:
    """Shared team memory: sightings, frame groups and their merged maps.

    Every agent starts in its own frame (anchored at its spawn cell). When two
    agents see each other in the same step, and the match is unambiguous, their
    frames are joined and their maps merged.
    """

    def __init__(self, members: list[str]):
        self.lock = threading.RLock()
        self.sightings: dict[int, dict[str, Sighting]] = {}
        self.root = {m: m for m in members}
        self.offset: dict[str, Position] = {m: (0, 0) for m in members}  # anchor in root frame
        self.maps: dict[str, LocalMap] = {m: LocalMap() for m in members}  # keyed by root
        self.positions: dict[str, Position] = {m: (0, 0) for m in members}  # own frame
        self._synced = -1
        self.merge_conflicts = 0

    def members_of(self, root: str) -> list[str]:
        return sorted(m for m, r in self.root.items() if r == root)

    def to_root(self, agent: str, pos: Position) -> Position:
        return add(self.offset[agent], pos)

    def root_position(self, agent: str) -> Position:
        return self.to_root(agent, self.positions[agent])

    def group_map(self, agent: str) -> LocalMap:
        return self.maps[self.root[agent]]

    def post(self, agent: str, step: int, pos: Position, seen: list[Position],
             lmap: LocalMap, updated: list[Position]) -> None:
        with self.lock:
            self.positions[agent] = pos
            self.sightings.setdefault(step, {})[agent] = Sighting(pos, seen)
            gmap = self.maps[self.root[agent]]
            off = self.offset[agent]
            for p in updated:
                cell = lmap.cells[p]
                try:
                    gmap.put(add(p, off), cell)
                except MergeConflict:
                    self.merge_conflicts += 1
                    gmap.cells[add(p, off)] = cell

    def sync(self, step: int) -> None:
        """Resolve the previous step's sightings once per step."""
        with self.lock:
            if step <= self._synced:
                return
            self._synced = step
            for s in [s for s in self.sightings if s < step - 1]:
                del self.sightings[s]
            prev = self.sightings.get(step - 1, {})
            for x in sorted(prev):
                for r in prev[x].seen:
                    back = (-r[0], -r[1])
                    ys = [y for y in sorted(prev) if y != x and back in prev[y].seen]
                    xs = [z for z in sorted(prev) if z != ys[0] and r in prev[z].seen] if len(ys) == 1 else []
                    if len(ys) == 1 and xs == [x]:
                        y = ys[0]
                        self._join(x, y, sub(add(prev[x].pos, r), prev[y].pos))

    def _join(self, x: str, y: str, y_anchor_in_x: Position) -> None:
        rx, ry = self.root[x], self.root[y]
        if rx == ry:
            return
        # anchor of ry's frame, expressed in rx's frame
        ry_in_rx = sub(add(self.offset[x], y_anchor_in_x), self.offset[y])
        if ry < rx:
            rx, ry = ry, rx
            ry_in_rx = (-ry_in_rx[0], -ry_in_rx[1])
        try:
            merged = merge_maps(self.maps[rx], self.maps[ry], ry_in_rx)
        except MergeConflict:
            self.merge_conflicts += 1
            return
        self.maps[rx] = merged
        del self.maps[ry]
        for m, r in self.root.items():
            if r == ry:
                self.root[m] = rx
                self.offset[m] = add(self.offset[m], ry_in_rx)


# assembly -------------------------------------------------------------------------


@dataclass
class Plan:
    task: str
    requirements: list[tuple[Position, str]]  # ordered: (0, 1) first, then by adjacency
    deadline: int
    waiter: str
    helpers: dict[int, str] = field(default_factory=dict)  # requirement index -> agent
    placed: int = 1  # requirements already in the waiter's structure (after fetching)
    waiter_ready: bool = False
    ready: dict[str, set[int]] = field(default_factory=dict)  # agent -> steps spent in position
    submitted: bool = False
    connecting: int = 0  # requirement index of the waiter's last connect

    def mark_ready(self, agent: str, step: int) -> None:
        steps = self.ready.setdefault(agent, set())
        steps.add(step)
        steps.discard(step - 3)

    def both_ready(self, helper: str, step: int) -> bool:
        """Both partners were in position during the previous step."""
        return (step - 1 in self.ready.get(helper, ())
                and step - 1 in self.ready.get(self.waiter, ()))

    def helper_cell(self, index: int) -> tuple[Position, Position]:
        """Where helper ``index`` stands, relative to the waiter, and its block side."""
        cell = self.requirements[index][0]
        shape = {p for p, _ in self.requirements} | {(0, 0)}
        for d in DIRS:
            stand = sub(cell, d.offset)
            if stand not in shape:
                return stand, d.offset
        return sub(cell, (0, 1)), (0, 1)

    def anchor_of(self, index: int) -> Position:
        """An already placed requirement cell adjacent to requirement ``index``."""
        cell = self.requirements[index][0]
        for p, _ in self.requirements[:index]:
            if manhattan(p, cell) == 1:
                return p
        return self.requirements[0][0]


def order_requirements(reqs: list) -> list[tuple[Position, str]]:
    cells = {(x, y): t for x, y, t in reqs}
    order = [(0, 1)]
    while len(order) < len(cells):
        for p in sorted(cells):
            if p not in order and any(manhattan(p, q) == 1 for q in order):
                order.append(p)
                break
        else:
            break
    return [(p, cells[p]) for p in order]


class AssemblerPair:
    """One agent waits in a goal zone; teammates bring one block each and connect.

    Agents explore until a frame group knows a goal cell and dispensers for a
    task's block types. Dispensers are picked greedily by distance; there is no
    planner, so congested maps can stall a plan until the task expires.
    """

    name = "assembler_pair"
    MIN_TIME_LEFT = 60

    def __init__(self, team: str, members: list[str], seed: int = 0, vision: int = 5):
        self.team = team
        self.members = list(members)
        self.minds = {m: Mind(m, random.Random(_seed(seed, team, m)), vision) for m in members}
        for mind in self.minds.values():
            mind.heading = mind.rng.choice(DIRS)
        self.board = Blackboard(self.members)
        self.plan: Plan | None = None
        self.lock = threading.RLock()
        self.disabled: set[str] = set()
        self.completed: list[str] = []

    # bookkeeping ---------------------------------------------------------------

    def act(self, agent: str, percept: Percept) -> Action:
        with self.lock:
            mind = self.minds[agent]
            updated = mind.update(percept)
            seen = [(t[0], t[1]) for t in percept.things
                    if t[2] == "agent" and t[3] == self.team and (t[0], t[1]) != (0, 0)]
            self.board.post(agent, percept.step, mind.lmap.position, seen, mind.lmap, updated)
            self.board.sync(percept.step)
            if percept.disabled:
                self.disabled.add(agent)
            else:
                self.disabled.discard(agent)
            self._review_plan(agent, percept)
            try:
                return self._decide(mind, percept)
            except (KeyError, ValueError):
                return SKIP

    def _release(self) -> None:
        self.plan = None

    def _review_plan(self, agent: str, p: Percept) -> None:
        plan = self.plan
        active = {t["name"]: t for t in p.tasks}
        if plan is not None:
            waiter_lost = plan.waiter in self.disabled
            if plan.task not in active or p.step >= plan.deadline or waiter_lost:
                if plan.submitted and plan.task not in active:
                    self.completed.append(plan.task)
                self._release()
                return
            for idx, helper in list(plan.helpers.items()):
                if helper in self.disabled:
                    del plan.helpers[idx]
            self._staff(plan)
            return
        candidates = sorted(
            (t for t in p.tasks if t["deadline"] - p.step >= self.MIN_TIME_LEFT),
            key=lambda t: (len(t["requirements"]), -t["deadline"], t["name"]),
        )
        for task in candidates:
            plan = self._make_plan(task)
            if plan is not None:
                self.plan = plan
                return

    def _knowledge(self, root: str):
        gmap = self.board.maps[root]
        return gmap.goals(), gmap.dispensers()

    def _make_plan(self, task: dict) -> Plan | None:
        reqs = order_requirements(task["requirements"])
        if len(reqs) != len(task["requirements"]):
            return None
        groups: dict[str, list[str]] = {}
        for m in self.members:
            if m not in self.disabled:
                groups.setdefault(self.board.root[m], []).append(m)
        for root, members in sorted(groups.items(), key=lambda kv: (-len(kv[1]), kv[0])):
            if len(members) < len(reqs):
                continue
            goals, dispensers = self._knowledge(root)
            if not goals or not {t for _, t in reqs} <= set(dispensers.values()):
                continue
            some_goal = min(goals)
            waiter = min(members, key=lambda m: (
                manhattan(self.board.root_position(m), some_goal), m))
            plan = Plan(task["name"], reqs, task["deadline"], waiter)
            self._staff(plan)
            return plan
        return None

    def _staff(self, plan: Plan) -> None:
        root = self.board.root[plan.waiter]
        busy = {plan.waiter} | set(plan.helpers.values())
        free = [m for m in self.board.members_of(root) if m not in busy and m not in self.disabled]
        wpos = self.board.root_position(plan.waiter)
        free.sort(key=lambda m: (manhattan(self.board.root_position(m), wpos), m))
        for idx in range(plan.placed, len(plan.requirements)):
            if idx not in plan.helpers and free:
                plan.helpers[idx] = free.pop(0)

    # decisions -----------------------------------------------------------------

    def _decide(self, mind: Mind, p: Percept) -> Action:
        if p.disabled:
            return SKIP
        plan = self.plan
        if plan is not None and mind.name == plan.waiter:
            return self._waiter(mind, p, plan)
        if plan is not None and mind.name in plan.helpers.values():
            idx = next(i for i, h in plan.helpers.items() if h == mind.name)
            return self._helper(mind, p, plan, idx)
        if mind.attached:
            return Action("detach", (Direction.from_offset(min(mind.attached)).value,))
        return explore_step(mind, p, dig=False)

    def _root_pos(self, mind: Mind) -> Position:
        return self.board.to_root(mind.name, mind.lmap.position)

    def _to_rel(self, mind: Mind, root_pos: Position) -> Position:
        return sub(root_pos, self._root_pos(mind))

    def _fetch(self, mind: Mind, p: Percept, block_type: str, side: Position) -> Action | None:
        """Get one block of ``block_type`` attached on ``side``; None once that holds."""
        held = [a for a in mind.attached if (t := p.thing_at(a)) and t[3] == block_type]
        for extra in sorted(mind.attached - set(held[:1])):
            return Action("detach", (Direction.from_offset(extra).value,))
        if held:
            cur = held[0]
            if cur == side:
                return None
            rot = Rotation.CLOCKWISE if Rotation.CLOCKWISE.apply(cur) == side else Rotation.COUNTERCLOCKWISE
            if p.last_action == "rotate" and p.last_action_result != "success":
                return self._wiggle(mind, p)
            return Action("rotate", (rot.value,))
        # adjacent dispenser or free block of the right type
        for d in DIRS:
            off = d.offset
            thing = p.thing_at(off)
            if thing is not None and thing[2] == "block" and thing[3] == block_type \
                    and [off[0], off[1]] not in p.attached:
                return Action("attach", (d.value,))
        for d in DIRS:
            off = d.offset
            if [off[0], off[1], block_type] in p.dispensers and p.thing_at(off) is None:
                return Action("request", (d.value,))
        gmap = self.board.group_map(mind.name)
        here = self._root_pos(mind)
        spots = [p_ for p_, t in gmap.dispensers().items() if t == block_type]
        if not spots:
            return explore_step(mind, p, dig=False)
        targets = set()
        for spot in spots:
            for d in DIRS:
                targets.add(add(spot, d.offset))
        return self._navigate(mind, p, targets, here, set()) or self._wiggle(mind, p)

    def _wiggle(self, mind: Mind, p: Percept) -> Action:
        """Step somewhere the agent and its blocks fit; dig when boxed in."""
        obstacles = p.obstacle_cells()
        own = set(mind.attached) | {(0, 0)}
        occupied = {(t[0], t[1]) for t in p.things} - own
        options = []
        for d in DIRS:
            cells = [add(o, d.offset) for o in own]
            if not any(c in obstacles or c in occupied for c in cells):
                options.append(d)
        if options:
            return move(mind.rng.choice(options))
        walls = sorted(c for d in DIRS for o in own
                       if (c := add(o, d.offset)) in obstacles and c not in own)
        if walls:
            return Action("clear", mind.rng.choice(walls))
        return SKIP

    def _navigate(self, mind: Mind, p: Percept, targets: set[Position], here: Position,
                  avoid: set[Position]) -> Action | None:
        """One BFS step in the group frame toward any of ``targets``, carrying own blocks."""
        if here in targets:
            return SKIP
        gmap = self.board.group_map(mind.name)
        carried = list(mind.attached)
        recent = p.step - 1

        def passable(cell: Position) -> bool:
            if cell in avoid:
                return False
            c = gmap.get(cell)
            if c is None:
                return True
            if c.terrain == "obstacle":
                return False
            return c.thing is None or c.step < recent

        own = {add(here, a) for a in carried} | {here}

        def fits(pos: Position) -> bool:
            for off in [(0, 0)] + carried:
                cell = add(pos, off)
                if cell not in own and not passable(cell):
                    return False
            return True

        xs = [c[0] for c in gmap.cells] + [here[0]]
        ys = [c[1] for c in gmap.cells] + [here[1]]
        lo_x, hi_x, lo_y, hi_y = min(xs) - 1, max(xs) + 1, min(ys) - 1, max(ys) + 1

        first: dict[Position, Direction | None] = {here: None}
        queue = deque([here])
        while queue:
            cur = queue.popleft()
            for d in DIRS:
                nxt = add(cur, d.offset)
                if nxt in first or not (lo_x <= nxt[0] <= hi_x and lo_y <= nxt[1] <= hi_y):
                    continue
                if not fits(nxt):
                    continue
                first[nxt] = first[cur] or d
                if nxt in targets:
                    step_dir = first[nxt]
                    if p.last_action == "move" and p.last_action_result != "success" \
                            and mind.rng.random() < 0.3:
                        return None
                    return move(step_dir)
                queue.append(nxt)
        return None

    def _waiter(self, mind: Mind, p: Percept, plan: Plan) -> Action:
        first_pos, first_type = plan.requirements[0]
        if p.last_action == "connect" and p.last_action_result == "success":
            plan.placed = max(plan.placed, plan.connecting + 1)
        if not plan.waiter_ready:
            act = self._fetch(mind, p, first_type, first_pos)
            if act is not None:
                return act
            goals, _ = self._knowledge(self.board.root[mind.name])
            here = self._root_pos(mind)
            if here not in goals:
                gmap = self.board.group_map(mind.name)
                targets = {g for g in goals
                           if (c := gmap.get(add(g, first_pos))) is None or c.terrain != "obstacle"}
                return self._navigate(mind, p, targets or goals, here, set()) or self._wiggle(mind, p)
            plan.waiter_ready = True
        if first_pos not in mind.attached:
            plan.waiter_ready = False
            plan.placed = 1
            return SKIP
        if plan.placed >= len(plan.requirements):
            plan.submitted = True
            return Action("submit", (plan.task,))
        idx = plan.placed
        helper = plan.helpers.get(idx)
        ready = helper is not None and plan.both_ready(helper, p.step)
        plan.mark_ready(mind.name, p.step)
        if ready:
            plan.connecting = idx
            anchor = plan.anchor_of(idx)
            return Action("connect", (helper, anchor[0], anchor[1]))
        return SKIP

    def _helper(self, mind: Mind, p: Percept, plan: Plan, idx: int) -> Action:
        cell, req_type = plan.requirements[idx]
        stand, side = plan.helper_cell(idx)
        if p.last_action == "connect" and p.last_action_result == "success":
            plan.placed = max(plan.placed, idx + 1)
            del plan.helpers[idx]
            plan.ready.pop(mind.name, None)
            mind.attached.discard(side)
            return Action("detach", (Direction.from_offset(side).value,))
        act = self._fetch(mind, p, req_type, side)
        if act is not None:
            return act
        if not plan.waiter_ready:
            return SKIP
        wpos = self.board.root_position(plan.waiter)
        target = add(wpos, stand)
        here = self._root_pos(mind)
        if here == target:
            ready = plan.placed == idx and plan.both_ready(mind.name, p.step)
            plan.mark_ready(mind.name, p.step)
            if ready:
                return Action("connect", (plan.waiter, side[0], side[1]))
            return SKIP
        # keep clear of the structure and of other helpers' stands
        # (the helper's own block ends up on its requirement cell, so that one stays open)
        avoid = {add(wpos, pos) for pos, _ in plan.requirements if pos != cell} | {wpos}
        return self._navigate(mind, p, {target}, here, avoid) or self._wiggle(mind, p)


BEHAVIORS = {
    RandomWalker.name: RandomWalker,
    ExplorerDigger.name: ExplorerDigger,
    AssemblerPair.name: AssemblerPair,
}


def make_team(behavior: str, team: str, members: list[str], seed: int = 0):
    try:
        cls = BEHAVIORS[behavior]
    except KeyError:
        raise ValueError(f"unknown behavior {behavior!r}; choose from {sorted(BEHAVIORS)}") from None
    return cls(team, members, seed)


__all__ = [
    "BEHAVIORS",
    "AssemblerPair",
    "Blackboard",
    "Cell",
    "ExplorerDigger",
    "Mind",
    "Plan",
    "RandomWalker",
    "make_team",
]
