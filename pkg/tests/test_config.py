"""Config files, shipped settings and credentials."""

from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mapcsim.config import (
    ConfigError,
    Roster,
    SimConfig,
    dump_credentials,
    load_config,
    parameter_sets,
    parse_config,
    parse_credentials,
    shipped_config,
)


def test_defaults_match_the_baseline_setting():
    cfg = SimConfig()
    assert (cfg.steps, cfg.agents_per_team, cfg.vision) == (500, 10, 5)
    assert (cfg.max_blocks, cfg.event_probability, cfg.deadline_ms) == (3, 0.04, 4000)


def test_shipped_settings():
    one, two, three = (shipped_config(i) for i in (1, 2, 3))
    assert (one.steps, one.agents_per_team) == (500, 10)
    assert two.max_blocks == 5
    assert three.event_probability == 0.08
    assert [one, two, three] == parameter_sets()


def test_parse_with_comments_and_base():
    text = "# comment\nsteps = 50  # inline\n\nteams = red, blue\nevent_probability=0.5\n"
    cfg = parse_config(text, base=SimConfig(seed=9))
    assert cfg.steps == 50 and cfg.teams == ("red", "blue") and cfg.event_probability == 0.5
    assert cfg.seed == 9


@pytest.mark.parametrize("text, line", [
    ("steps = 5\nwidht = 3\n", 2),
    ("steps = 5\nvision = far\n", 2),
    ("\n\njust words\n", 3),
    ("steps = 5\nevent_probability = 1.5\n", 2),
    ("task_duration_min = 300\n", 1),
])
def test_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text, path="x.cfg")
    assert info.value.line == line
    assert str(info.value).startswith(f"x.cfg:{line}:")


def test_invalid_combinations():
    with pytest.raises(ConfigError):
        SimConfig(teams=("A", "A"))
    with pytest.raises(ConfigError):
        SimConfig(max_blocks=1)
    with pytest.raises(ConfigError):
        SimConfig(deadline_ms=0)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")


@given(st.integers(1, 2000), st.integers(1, 20), st.floats(0, 1), st.integers(2, 6),
       st.integers(0, 2**31))
def test_text_round_trip(steps, agents, p, max_blocks, seed):
    cfg = replace(SimConfig(), steps=steps, agents_per_team=agents, event_probability=p,
                  max_blocks=max_blocks, seed=seed)
    assert parse_config(cfg.dumps()) == cfg
    assert SimConfig.from_dict(cfg.to_dict()) == cfg


def test_file_round_trip(tmp_path):
    for i in (1, 2, 3):
        cfg = shipped_config(i)
        path = tmp_path / f"s{i}.cfg"
        path.write_text(cfg.dumps())
        assert load_config(path) == cfg


def test_credentials_round_trip():
    roster = Roster.default(SimConfig(agents_per_team=3))
    assert parse_credentials(dump_credentials(roster)) == roster
    assert roster.team_members("B") == ["agentB1", "agentB2", "agentB3"]
    assert roster.check("agentA2", "1") and not roster.check("agentA2", "2")
    assert not roster.check("ghost", "1")


def test_credentials_errors():
    with pytest.raises(ConfigError) as info:
        parse_credentials("A a1 pw\nA a2\n", "teams.txt")
    assert info.value.line == 2
    with pytest.raises(ConfigError):
        parse_credentials("A a1 pw\nB a1 pw\n")
    roster = parse_credentials("A a1 p\nB b1 p\n")
    with pytest.raises(ConfigError):
        roster.matches(SimConfig(agents_per_team=2))
