"""Replay documents: recording, loading, re-simulation and ASCII rendering.

File layout (one JSON document, one frame per line so a damaged line can be
pinned to its step)::

    {"header":{...},
    "frames":[
    {frame 0},
    ...
    {frame N}
    ],
    "final":"<hash>"}

Frames carry a full world snapshot every ``SNAPSHOT_EVERY`` steps and a delta
otherwise. ``hash`` chains every frame to its predecessor, seeded by the header.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import engine
from .config import Credential, Roster, SimConfig
from .engine import Action, ActionResult, ClearEvent
from .world import WorldState, canonical, create_world

SNAPSHOT_EVERY = 50
FORMAT = "mapcsim-replay"
VERSION = 1


def _sha(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def make_header(config: SimConfig, roster: Roster, sim_id: str) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "simId": sim_id,
        "seed": config.seed,
        "teams": list(config.teams),
        "roster": [[c.team, c.name] for c in roster.credentials],
        "config": config.to_dict(),
    }


def header_config(header: dict) -> tuple[SimConfig, Roster]:
    config = SimConfig.from_dict(header["config"])
    roster = Roster([Credential(team, name, "") for team, name in header["roster"]])
    return config, roster


# document deltas --------------------------------------------------------------


def diff_documents(old: dict, new: dict) -> dict:
    delta: dict = {}
    for key, value in new.items():
        if key == "terrain":
            rows = [[i, row] for i, (a, row) in enumerate(zip(old[key], value)) if a != row]
            if rows:
                delta[key] = rows
        elif key == "things":
            before = {row[0]: row for row in old[key]}
            after = {row[0]: row for row in value}
            changed = [row for tid, row in after.items() if before.get(tid) != row]
            removed = sorted(tid for tid in before if tid not in after)
            if changed or removed:
                delta[key] = {"set": changed, "del": removed}
        elif old.get(key) != value:
            delta[key] = value
    return delta


def apply_delta(doc: dict, delta: dict) -> dict:
    out = copy.deepcopy(doc)
    for key, value in delta.items():
        if key == "terrain":
            for i, row in value:
                out["terrain"][i] = row
        elif key == "things":
            by_id = {row[0]: row for row in out["things"]}
            for tid in value["del"]:
                by_id.pop(tid, None)
            for row in value["set"]:
                by_id[row[0]] = row
            out["things"] = [by_id[tid] for tid in sorted(by_id)]
        else:
            out[key] = value
    return out


# frames -----------------------------------------------------------------------


def build_frame(
    step: int,
    prev_hash: str,
    prev_doc: dict | None,
    doc: dict,
    state_hash: str,
    actions: dict | None = None,
    results: list[ActionResult] | None = None,
    events: list[ClearEvent] | None = None,
) -> dict:
    body: dict = {"step": step}
    body["actions"] = {
        name: (None if act is None else act.to_list()) for name, act in (actions or {}).items()
    }
    body["results"] = {r.agent: r.outcome for r in results or ()}
    body["events"] = [e.to_list() for e in events or ()]
    if prev_doc is None or step % SNAPSHOT_EVERY == 0:
        body["snapshot"] = doc
    else:
        body["delta"] = diff_documents(prev_doc, doc)
    body["state"] = state_hash
    body["hash"] = _sha(prev_hash + canonical(body))
    return body


class ReplayRecorder:
    """Accumulates frames as a match runs."""

    def __init__(self, header: dict, world: WorldState):
        self.header = header
        self.lines: list[str] = []
        self._prev_hash = _sha(canonical(header))
        self._prev_doc: dict | None = None
        self._push(world)

    def _push(self, world, actions=None, results=None, events=None) -> dict:
        doc = world.to_document()
        frame = build_frame(world.step, self._prev_hash, self._prev_doc, doc,
                            _sha(canonical(doc)), actions, results, events)
        self.lines.append(canonical(frame))
        self._prev_hash = frame["hash"]
        self._prev_doc = doc
        return frame

    def record(self, world: WorldState, actions: dict, results, events) -> dict:
        return self._push(world, actions, results, events)

    @property
    def final_hash(self) -> str:
        return self._prev_hash

    def text(self) -> str:
        parts = ['{"header":' + canonical(self.header) + ",", '"frames":[']
        for i, line in enumerate(self.lines):
            parts.append(line + ("," if i < len(self.lines) - 1 else ""))
        parts.append("],")
        parts.append('"final":' + json.dumps(self.final_hash) + "}")
        return "\n".join(parts) + "\n"

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.text())
        return path

    def replay(self) -> Replay:
        return Replay.from_text(self.text())


# loading ----------------------------------------------------------------------


@dataclass
class Replay:
    header: dict
    frames: list[dict] = field(default_factory=list)
    final_hash: str | None = None
    truncated: bool = False

    @classmethod
    def from_text(cls, text: str) -> Replay:
        """Parse leniently: frames are read until the first damaged line."""
        lines = text.split("\n")
        try:
            head = lines[0]
            if not head.startswith('{"header":') or not head.endswith(","):
                raise ValueError
            header = json.loads(head[len('{"header":'):-1])
        except (ValueError, IndexError):
            raise ValueError("replay header is unreadable") from None
        replay = cls(header)
        for line in lines[2:]:
            if line == "],":
                break
            try:
                replay.frames.append(json.loads(line.rstrip(",")))
            except ValueError:
                replay.truncated = True
                return replay
        else:
            replay.truncated = True
            return replay
        tail = lines[lines.index("],") + 1] if "]," in lines else ""
        if tail.startswith('"final":'):
            try:
                replay.final_hash = json.loads(tail[len('"final":'):-1])
            except ValueError:
                replay.truncated = True
        else:
            replay.truncated = True
        expected = header["config"]["steps"] + 1
        if len(replay.frames) != expected:
            replay.truncated = True
        return replay

    @classmethod
    def load(cls, path: str | Path) -> Replay:
        return cls.from_text(Path(path).read_text(encoding="utf-8", errors="replace"))

    def documents(self):
        """Yield ``(frame, world document)`` for every frame in order."""
        doc = None
        for frame in self.frames:
            if "snapshot" in frame:
                doc = frame["snapshot"]
            elif doc is None:
                raise ValueError("replay starts with a delta frame")
            else:
                doc = apply_delta(doc, frame["delta"])
            yield frame, doc

    def document_at(self, step: int) -> dict:
        for frame, doc in self.documents():
            if frame["step"] == step:
                return doc
        raise KeyError(step)


# verification -----------------------------------------------------------------


@dataclass
class Verification:
    ok: bool
    step: int | None = None
    message: str = "OK"
    final_hash: str | None = None


def verify_text(text: str | bytes) -> Verification:
    """Re-simulate from the header and compare every frame byte for byte."""
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    lines = text.split("\n")
    prefix = '{"header":'
    try:
        header = json.loads(lines[0][len(prefix):-1])
        if not lines[0].startswith(prefix) or not lines[0].endswith(","):
            raise ValueError
        config, roster = header_config(header)
    except Exception:
        return Verification(False, 0, "header is damaged")
    if len(lines) < 2 or lines[1] != '"frames":[':
        return Verification(False, 0, "frame list marker is damaged")

    world = create_world(config, config.seed, roster)
    recorder = ReplayRecorder(header, world)
    n_frames = config.steps + 1
    for k in range(n_frames):
        idx = 2 + k
        if idx >= len(lines):
            return Verification(False, k, f"replay truncated before step {k}")
        stored = lines[idx]
        sep = "," if k < n_frames - 1 else ""
        if k == 0:
            expected = recorder.lines[0]
        else:
            try:
                frame = json.loads(stored[:-1] if sep and stored.endswith(sep) else stored)
                actions = {
                    name: None if raw is None else Action.from_list(raw)
                    for name, raw in frame["actions"].items()
                }
            except Exception:
                return Verification(False, k, "frame is unreadable")
            if set(actions) != set(world.agents):
                return Verification(False, k, "action set does not match agents")
            _, results, events = engine.step(world, actions)
            recorder.record(world, actions, results, events)
            expected = recorder.lines[-1]
        if stored != expected + sep:
            return Verification(False, k, "frame differs from re-simulation")
    tail = lines[2 + n_frames:2 + n_frames + 2]
    expected_tail = ["],", '"final":' + json.dumps(recorder.final_hash) + "}"]
    if tail != expected_tail:
        return Verification(False, config.steps, "final hash differs")
    rest = [ln for ln in lines[2 + n_frames + 2:] if ln]
    if rest:
        return Verification(False, config.steps, "trailing data after replay")
    return Verification(True, None, "OK", recorder.final_hash)


def verify_file(path: str | Path) -> Verification:
    return verify_text(Path(path).read_bytes())


# rendering --------------------------------------------------------------------


def render_document(doc: dict, teams: list[str]) -> list[str]:
    """ASCII grid: team letter per agent, type digit per block, ``#`` ``G`` ``D``."""
    grid = [list(row) for row in doc["terrain"]]
    for x, y, _ in doc["dispensers"]:
        grid[y][x] = "D"
    letters = {team: chr(ord("A") + i) for i, team in enumerate(teams)}
    for row in doc["things"]:
        x, y = row[2], row[3]
        if row[1] == "agent":
            grid[y][x] = letters.get(row[5], "?")
        else:
            digits = "".join(ch for ch in row[4] if ch.isdigit())
            grid[y][x] = digits[-1:] or "B"
    return ["".join(r) for r in grid]


def render(replay: Replay, steps: list[int] | None = None) -> str:
    teams = replay.header["teams"]
    wanted = None if steps is None else set(steps)
    out = []
    for frame, doc in replay.documents():
        if wanted is not None and frame["step"] not in wanted:
            continue
        scores = "  ".join(f"{t}={doc['scores'].get(t, 0)}" for t in teams)
        out.append(f"step {frame['step']}  {scores}")
        out.extend(render_document(doc, teams))
        out.append("")
    return "\n".join(out)
