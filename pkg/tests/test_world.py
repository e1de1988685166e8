"""Grid model, attachment graph and world generation."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import blank_world
from mapcsim.config import ConfigError, SimConfig
from mapcsim.world import (
    GOAL,
    OBSTACLE,
    Direction,
    Rotation,
    WorldError,
    canonical,
    check_invariants,
    create_world,
    diamond,
    manhattan,
)


def brute_diamond(r):
    return {(x, y) for x in range(-r, r + 1) for y in range(-r, r + 1) if abs(x) + abs(y) <= r}


@pytest.mark.parametrize("r", range(0, 8))
def test_diamond_matches_enumeration(r):
    cells = diamond(r)
    assert set(cells) == brute_diamond(r)
    assert len(cells) == len(set(cells)) == 2 * r * r + 2 * r + 1


def test_vision_five_diamond_has_61_cells():
    assert len(diamond(5)) == 61


def test_direction_offsets_follow_screen_axes():
    assert Direction.NORTH.offset == (0, -1)
    assert Direction.SOUTH.offset == (0, 1)
    assert Direction.EAST.offset == (1, 0)
    assert Direction.from_offset((-1, 0)) is Direction.WEST
    with pytest.raises(ValueError):
        Direction.from_offset((1, 1))


@given(st.integers(-20, 20), st.integers(-20, 20))
def test_rotations_are_inverse_and_norm_preserving(x, y):
    cw, ccw = Rotation.CLOCKWISE, Rotation.COUNTERCLOCKWISE
    assert ccw.apply(cw.apply((x, y))) == (x, y)
    assert cw.apply(cw.apply(cw.apply(cw.apply((x, y))))) == (x, y)
    assert manhattan(cw.apply((x, y)), (0, 0)) == abs(x) + abs(y)


def test_clockwise_turns_north_into_east():
    # y grows south, so clockwise on screen maps "above" to "right of"
    assert Rotation.CLOCKWISE.apply((0, -1)) == (1, 0)
    assert Rotation.CLOCKWISE.apply((1, 0)) == (0, 1)


class TestAttachments:
    def test_component_and_pruning(self, world):
        a = world.add_agent("a", "A", (3, 3))
        b1 = world.add_block("b0", (4, 3))
        b2 = world.add_block("b0", (5, 3))
        world.add_edge(a.id, b1.id)
        world.add_edge(b1.id, b2.id)
        assert world.component_of(a.id) == {a.id, b1.id, b2.id}
        world.detach_all(a.id)
        # the orphaned pair dissolves into free blocks that stay in place
        assert world.edges == {}
        assert world.thing_at((4, 3)) is b1 and world.thing_at((5, 3)) is b2

    def test_remove_block_frees_orphans(self, world):
        a = world.add_agent("a", "A", (3, 3))
        b1 = world.add_block("b0", (4, 3))
        b2 = world.add_block("b1", (5, 3))
        world.add_edge(a.id, b1.id)
        world.add_edge(b1.id, b2.id)
        world.remove_block(b1.id)
        assert b2.id not in world.edges
        assert world.thing_at((4, 3)) is None
        assert check_invariants(world) == []

    def test_disable_severs_only_incident_edges(self, world):
        a = world.add_agent("a", "A", (3, 3))
        c = world.add_agent("c", "A", (6, 3))
        b1 = world.add_block("b0", (4, 3))
        b2 = world.add_block("b0", (5, 3))
        world.add_edge(a.id, b1.id)
        world.add_edge(b1.id, b2.id)
        world.add_edge(b2.id, c.id)
        world.disable_agent(a)
        assert not world.has_edge(a.id, b1.id)
        assert world.has_edge(b1.id, b2.id) and world.has_edge(b2.id, c.id)
        assert world.is_disabled(a)
        assert a.disabled_until == world.step + 1 + world.config.disable_duration

    def test_occupied_cell_rejected(self, world):
        world.add_agent("a", "A", (3, 3))
        with pytest.raises(WorldError):
            world.add_block("b0", (3, 3))


class TestRigidMotion:
    def test_translate_moves_whole_component(self, world):
        a = world.add_agent("a", "A", (3, 3))
        b = world.add_block("b0", (3, 4))
        world.add_edge(a.id, b.id)
        assert world.translate_component(world.component_of(a.id), Direction.EAST).ok
        assert (a.pos, b.pos) == ((4, 3), (4, 4))

    def test_translate_blocked_by_obstacle_changes_nothing(self, world):
        a = world.add_agent("a", "A", (3, 3))
        b = world.add_block("b0", (3, 4))
        world.add_edge(a.id, b.id)
        world.set_terrain((4, 4), OBSTACLE)
        motion = world.translate_component(world.component_of(a.id), Direction.EAST)
        assert motion.blocked == (4, 4)
        assert (a.pos, b.pos) == ((3, 3), (3, 4))

    def test_rotate_about_agent(self, world):
        a = world.add_agent("a", "A", (4, 4))
        b1 = world.add_block("b0", (4, 3))
        b2 = world.add_block("b0", (4, 2))
        world.add_edge(a.id, b1.id)
        world.add_edge(b1.id, b2.id)
        assert world.rotate_component(a.id, Rotation.CLOCKWISE).ok
        assert (b1.pos, b2.pos) == ((5, 4), (6, 4))
        assert check_invariants(world) == []

    def test_rotate_into_border_blocked(self, world):
        a = world.add_agent("a", "A", (1, 4))
        b = world.add_block("b0", (1, 3))
        world.add_edge(a.id, b.id)
        motion = world.rotate_component(a.id, Rotation.COUNTERCLOCKWISE)
        assert motion.blocked == (0, 4)
        assert b.pos == (1, 3)


class TestGeneration:
    def test_border_is_solid(self):
        w = create_world(SimConfig(seed=3))
        assert check_invariants(w) == []
        assert all(w.is_obstacle((x, 0)) and w.is_obstacle((x, w.height - 1)) for x in range(w.width))

    def test_goal_zones_and_dispensers(self):
        cfg = SimConfig(seed=5, obstacle_density=0.0)
        w = create_world(cfg)
        goals = [i for i, v in enumerate(w.terrain) if v == GOAL]
        assert 0 < len(goals) <= cfg.goal_zones * len(diamond(cfg.goal_radius))
        assert len(w.dispensers) == cfg.block_types * cfg.dispensers_per_type
        assert sorted(set(w.dispensers.values())) == cfg.block_type_names
        for pos in w.dispensers:
            assert not w.is_obstacle(pos) and not w.is_goal(pos)

    def test_agents_placed_per_roster(self):
        cfg = SimConfig(seed=1)
        w = create_world(cfg)
        assert len(w.agents) == 2 * cfg.agents_per_team
        for name, tid in w.agents.items():
            t = w.things[tid]
            assert t.name == name and not w.is_obstacle(t.pos)

    def test_same_seed_same_world(self):
        a = create_world(SimConfig(seed=11))
        b = create_world(SimConfig(seed=11))
        c = create_world(SimConfig(seed=12))
        assert a.state_hash() == b.state_hash()
        assert a.state_hash() != c.state_hash()

    def test_too_many_agents(self):
        with pytest.raises(ConfigError):
            create_world(SimConfig(width=10, height=10, agents_per_team=40, obstacle_density=0.0))


def test_document_is_byte_stable():
    w = create_world(SimConfig(seed=2))
    text = canonical(w.to_document())
    assert text == canonical(create_world(SimConfig(seed=2)).to_document())
    keys = list(w.to_document())
    assert keys[:3] == ["version", "step", "width"]


def test_check_invariants_reports_violations():
    w = blank_world()
    a = w.add_agent("a", "A", (3, 3))
    b = w.add_block("b0", (5, 5))
    w.add_edge(a.id, b.id)  # not adjacent
    problems = check_invariants(w)
    assert any("not between adjacent" in p for p in problems)
    w.set_terrain((0, 4), 0)
    assert any("border" in p for p in check_invariants(w))
