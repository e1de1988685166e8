import random

import pytest

from mapcsim.config import SimConfig
from mapcsim.world import OBSTACLE, WorldState


def blank_world(width=10, height=10, seed=0, **overrides) -> WorldState:
    """Empty interior, obstacle border, no agents, no tasks; nothing random happens by itself."""
    defaults = dict(width=width, height=height, event_probability=0.0, task_probability=0.0,
                    agents_per_team=1)
    defaults.update(overrides)
    cfg = SimConfig(**defaults)
    world = WorldState(cfg, width, height, bytearray(width * height), random.Random(seed))
    for x in range(width):
        for y in range(height):
            if world.is_border((x, y)):
                world.set_terrain((x, y), OBSTACLE)
    world.scores = {t: 0 for t in cfg.teams}
    world.tasks_completed = {t: 0 for t in cfg.teams}
    return world


@pytest.fixture
def world():
    return blank_world()
