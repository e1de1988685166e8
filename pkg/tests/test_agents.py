"""Local maps, merging, and the reference behaviors."""

import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mapcsim.agents import BEHAVIORS, Cell, LocalMap, MergeConflict, make_team, merge_maps
from mapcsim.agents.behaviors import AssemblerPair, Mind, Plan, explore_step
from mapcsim.config import SimConfig
from mapcsim.engine import is_valid
from mapcsim.perception import Percept
from mapcsim.server import MatchRunner, run_local_match
from mapcsim.world import Direction, diamond

# merging -------------------------------------------------------------------------


def test_merge_disjoint_maps_is_union():
    a = LocalMap({(0, 0): Cell("empty", 1), (1, 0): Cell("obstacle", 1)})
    b = LocalMap({(0, 0): Cell("goal", 2)})
    m = merge_maps(a, b, (5, 5))
    assert m.cells == {(0, 0): Cell("empty", 1), (1, 0): Cell("obstacle", 1), (5, 5): Cell("goal", 2)}


def test_merge_identical_is_idempotent():
    a = LocalMap({(0, 0): Cell("empty", 3, "agent:A"), (0, 1): Cell("goal", 3)})
    assert merge_maps(a, a, (0, 0)).cells == a.cells
    m = merge_maps(a, a, (0, 0))
    assert merge_maps(m, a, (0, 0)).cells == m.cells


def test_merge_newer_step_wins():
    a = LocalMap({(2, 2): Cell("empty", 10, "block:b0")})
    b = LocalMap({(0, 0): Cell("empty", 20, "agent:B")})
    assert merge_maps(a, b, (2, 2)).get((2, 2)) == Cell("empty", 20, "agent:B")
    assert merge_maps(b, a, (-2, -2)).get((0, 0)) == Cell("empty", 20, "agent:B")


def test_merge_conflict_same_step_different_terrain():
    a = LocalMap({(1, 1): Cell("obstacle", 7)})
    b = LocalMap({(0, 0): Cell("empty", 7)})
    with pytest.raises(MergeConflict):
        merge_maps(a, b, (1, 1))
    assert a.get((1, 1)) == Cell("obstacle", 7)  # inputs untouched


cells = st.builds(Cell, st.sampled_from(["empty", "obstacle", "goal"]), st.integers(0, 30),
                  st.sampled_from([None, "agent:A", "block:b1"]))
coords = st.tuples(st.integers(-6, 6), st.integers(-6, 6))


@given(st.dictionaries(coords, cells, max_size=30), st.dictionaries(coords, cells, max_size=30),
       coords)
def test_merge_is_consistent_with_both_inputs(ca, cb, offset):
    a, b = LocalMap(dict(ca)), LocalMap(dict(cb))
    try:
        m = merge_maps(a, b, offset)
    except MergeConflict:
        return
    shifted = {(p[0] + offset[0], p[1] + offset[1]): c for p, c in cb.items()}
    assert set(m.cells) == set(ca) | set(shifted)
    for pos, cell in m.cells.items():
        candidates = [c for c in (ca.get(pos), shifted.get(pos)) if c is not None]
        assert cell.step == max(c.step for c in candidates)
        assert cell in candidates


def test_observe_records_whole_diamond():
    p = Percept(4, 0, things=[[0, 0, "agent", "A"], [1, 0, "block", "b0"]],
                terrain=[[0, 2, "obstacle"]], dispensers=[[-1, 0, "b1"]])
    lmap = LocalMap(position=(10, 10))
    updated = lmap.observe(p, 2)
    assert len(updated) == len(diamond(2)) == len(lmap)
    assert lmap.get((11, 10)) == Cell("empty", 4, "block:b0")
    assert lmap.get((10, 12)) == Cell("obstacle", 4)
    assert lmap.get((9, 10)).dispenser == "b1"
    assert lmap.get((10, 8)) == Cell("empty", 4)


# behaviors -----------------------------------------------------------------------------


def test_explorer_digger_clears_obstacle_ahead():
    mind = Mind("d", random.Random(1))
    mind.heading = Direction.EAST
    assert mind.rng.random() >= 0.05  # this seed keeps its heading on the first draw
    mind.rng = random.Random(1)
    p = Percept(3, 0, things=[[0, 0, "agent", "A"]], terrain=[[1, 0, "obstacle"]])
    act = explore_step(mind, p, dig=True)
    assert act.kind == "clear" and tuple(act.params) == (1, 0)


def test_assembler_waiter_with_complete_shape_submits():
    team = AssemblerPair("A", ["w", "h"], seed=0)
    mind = team.minds["w"]
    mind.attached = {(0, 1), (0, 2)}
    plan = Plan("t", [((0, 1), "b0"), ((0, 2), "b0")], 200, "w")
    plan.waiter_ready = True
    plan.placed = 2
    p = Percept(50, 0, things=[[0, 0, "agent", "A"], [0, 1, "block", "b0"], [0, 2, "block", "b0"]],
                terrain=[[0, 0, "goal"]], attached=[[0, 1], [0, 2]],
                tasks=[{"name": "t", "deadline": 200, "reward": 40,
                        "requirements": [[0, 1, "b0"], [0, 2, "b0"]], "spawned": 0}])
    act = team._waiter(mind, p, plan)
    assert act.kind == "submit" and act.params == ("t",)


def test_random_walker_actions():
    team = make_team("random_walker", "A", ["a"], 3)
    p = Percept(0, 0, things=[[0, 0, "agent", "A"], [0, 1, "block", "b0"]],
                terrain=[[1, 0, "obstacle"]])
    kinds = Counter()
    for _ in range(300):
        act = team.act("a", p)
        kinds[act.kind] += 1
        assert act.kind in ("move", "skip")
        if act.kind == "move":
            assert act.params[0] in ("n", "w")


def test_unknown_behavior():
    with pytest.raises(ValueError):
        make_team("teleporter", "A", ["a"])


# whole matches --------------------------------------------------------------------------


def _play(cfg, behaviors):
    """Run a match and keep the world document of every step."""
    runner = MatchRunner(cfg)
    teams = {t: make_team(b, t, runner.roster.team_members(t), cfg.seed)
             for t, b in behaviors.items()}
    docs = []
    while not runner.done:
        docs.append(runner.world.to_document())
        acts = {}
        for c in runner.roster.credentials:
            if c.team in teams:
                act = teams[c.team].act(c.name, runner.percept(c.name))
                assert is_valid(act), (c.name, act)
                acts[c.name] = act
        runner.tick(acts)
    return runner, teams, docs


def _truth(doc, pos):
    """(terrain, thing, dispenser) of an absolute cell in a world document."""
    x, y = pos
    if not (0 <= y < doc["height"] and 0 <= x < doc["width"]):
        return "empty", None, None
    glyph = doc["terrain"][y][x]
    terrain = {".": "empty", "#": "obstacle", "G": "goal"}[glyph]
    thing = None
    for row in doc["things"]:
        if (row[2], row[3]) == pos:
            thing = f"agent:{row[5]}" if row[1] == "agent" else f"block:{row[4]}"
    disp = next((t for dx, dy, t in doc["dispensers"] if (dx, dy) == pos), None)
    return terrain, thing, disp


def _check_map(lmap, spawn, docs):
    for rel, cell in lmap.cells.items():
        pos = (spawn[0] + rel[0], spawn[1] + rel[1])
        assert (cell.terrain, cell.thing, cell.dispenser) == _truth(docs[cell.step], pos), (rel, cell)


@pytest.fixture(scope="module")
def fuzzed():
    cfg = SimConfig(seed=17, steps=150, event_probability=0.08, task_probability=0.1)
    return _play(cfg, {"A": "assembler_pair", "B": "explorer_digger"})


def test_reference_agents_never_send_bad_parameters(fuzzed):
    runner, _, _ = fuzzed
    for name, counts in runner.outcomes.items():
        assert counts["failed_parameter"] == 0, name


def test_local_maps_are_sound(fuzzed):
    runner, teams, docs = fuzzed
    spawn = {name: tuple(docs[0]["things"][tid - 1][2:4]) for name, tid in runner.world.agents.items()}
    for team in teams.values():
        for name, mind in team.minds.items():
            _check_map(mind.lmap, spawn[name], docs)


def test_blackboard_frames_match_true_offsets(fuzzed):
    runner, teams, docs = fuzzed
    spawn = {name: tuple(docs[0]["things"][tid - 1][2:4]) for name, tid in runner.world.agents.items()}
    board = teams["A"].board
    assert board.merge_conflicts == 0
    assert len(set(board.root.values())) < len(board.root)  # some frames were joined
    for name, root in board.root.items():
        truth = (spawn[name][0] - spawn[root][0], spawn[name][1] - spawn[root][1])
        assert board.offset[name] == truth
    for root, gmap in board.maps.items():
        _check_map(gmap, spawn[root], docs)


@given(st.integers(0, 10_000), st.sampled_from(sorted(BEHAVIORS)))
@settings(max_examples=10, deadline=None)
def test_legality_over_random_matches(seed, behavior):
    cfg = SimConfig(seed=seed, steps=40, width=20, height=20, agents_per_team=4,
                    event_probability=0.1, task_probability=0.2)
    runner, _, _ = _play(cfg, {"A": behavior, "B": "explorer_digger"})
    assert all(c["failed_parameter"] == 0 for c in runner.outcomes.values())


# frozen integration values: assembler team against a team that never answers
ASSEMBLER_SCORES = {7: 510, 8: 420}


@pytest.mark.parametrize("seed", sorted(ASSEMBLER_SCORES))
def test_assembler_beats_idle_team(seed):
    cfg = SimConfig(seed=seed)
    team = make_team("assembler_pair", "A", [f"agentA{i}" for i in range(1, 11)], seed)
    report = run_local_match(cfg, {"A": team})
    assert report.scores["A"] > 0
    assert report.scores == {"A": ASSEMBLER_SCORES[seed], "B": 0}
