"""Task generation, submission checks and rewards."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .config import SimConfig
from .world import Position, WorldState, add

Requirement = tuple[int, int, str]


@dataclass(frozen=True)
class Task:
    name: str
    requirements: tuple[Requirement, ...]
    reward: int
    deadline: int
    spawned: int

    @property
    def size(self) -> int:
        return len(self.requirements)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "deadline": self.deadline,
            "reward": self.reward,
            "requirements": [[x, y, t] for x, y, t in self.requirements],
            "spawned": self.spawned,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Task:
        return cls(
            d["name"],
            tuple((int(x), int(y), str(t)) for x, y, t in d["requirements"]),
            int(d["reward"]),
            int(d["deadline"]),
            int(d.get("spawned", 0)),
        )


def reward(block_count: int) -> int:
    """Points for delivering a shape of ``block_count`` blocks: 10 * n^2."""
    if block_count < 2:
        raise ValueError(f"a task needs at least 2 blocks, got {block_count}")
    return 10 * block_count * block_count


_STEPS = ((0, -1), (0, 1), (1, 0), (-1, 0))


def random_shape(rng: random.Random, size: int) -> list[Position]:
    """Connected cell set grown by a random walk from (0, 1), never touching (0, 0)."""
    cells = [(0, 1)]
    current = (0, 1)
    while len(cells) < size:
        nxt = add(current, rng.choice(_STEPS))
        if nxt == (0, 0):
            continue
        current = nxt
        if nxt not in cells:
            cells.append(nxt)
    return cells


def generate_task(rng: random.Random, config: SimConfig, current_step: int, name: str) -> Task:
    size = rng.randint(2, config.max_blocks)
    shape = random_shape(rng, size)
    types = config.block_type_names
    reqs = tuple((x, y, rng.choice(types)) for x, y in shape)
    deadline = current_step + rng.randint(config.task_duration_min, config.task_duration_max)
    return Task(name, reqs, reward(size), deadline, current_step)


def maybe_spawn_task(world: WorldState) -> Task | None:
    """Roll for a new task; called once per tick by the engine."""
    cfg = world.config
    roll = world.rng.random()
    if len(world.tasks) >= cfg.task_cap or roll >= cfg.task_probability:
        return None
    world.task_counter += 1
    task = generate_task(world.rng, cfg, world.step, f"task{world.task_counter}")
    world.tasks[task.name] = task
    return task


def retire_expired(world: WorldState) -> list[str]:
    gone = [name for name, t in world.tasks.items() if t.deadline <= world.step]
    for name in gone:
        del world.tasks[name]
    return gone


def check_submission(world: WorldState, agent_id: int, task_name: str) -> list[int] | str:
    """Return the block ids a submission would consume, or ``"failed_target"``."""
    task = world.tasks.get(task_name)
    if task is None or world.step >= task.deadline:
        return "failed_target"
    agent = world.thing(agent_id)
    if not world.is_goal(agent.pos):
        return "failed_target"
    component = world.component_of(agent_id)
    consumed = []
    for x, y, block_type in task.requirements:
        thing = world.thing_at(add(agent.pos, (x, y)))
        if (thing is None or thing.kind != "block" or thing.block_type != block_type
                or thing.id not in component):
            return "failed_target"
        consumed.append(thing.id)
    return consumed


def submit(world: WorldState, agent_id: int, task_name: str) -> str:
    """Check and apply a submission; first successful team takes the task."""
    consumed = check_submission(world, agent_id, task_name)
    if isinstance(consumed, str):
        return consumed
    task = world.tasks.pop(task_name)
    for block_id in consumed:
        world.remove_block(block_id)
    team = world.thing(agent_id).team
    world.scores[team] += task.reward
    world.tasks_completed[team] = world.tasks_completed.get(team, 0) + 1
    return "success"
