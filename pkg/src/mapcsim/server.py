"""Match loop: in-process runner and the TCP server that drives remote agents."""

from __future__ import annotations

import asyncio
import logging
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from . import engine
from .config import Roster, SimConfig
from .engine import Action, ActionResult
from .perception import Percept, compute_percept
from .protocol import (
    MAX_FRAME,
    ActionMessage,
    AuthRequest,
    AuthResponse,
    Bye,
    ProtocolError,
    RequestAction,
    SimEnd,
    SimStart,
    encode,
    read_message,
)
from .replay import ReplayRecorder, make_header
from .world import create_world

log = logging.getLogger(__name__)


@dataclass
class MatchReport:
    sim_id: str
    teams: tuple[str, ...]
    scores: dict[str, int]
    steps: int
    final_hash: str
    recorder: ReplayRecorder
    outcomes: dict[str, Counter] = field(default_factory=dict)
    completed: bool = True

    @property
    def winner(self) -> str | None:
        a, b = self.teams
        if self.scores[a] == self.scores[b]:
            return None
        return a if self.scores[a] > self.scores[b] else b

    @property
    def draw(self) -> bool:
        return self.winner is None

    def ranking(self, team: str) -> int:
        other = max(self.scores[t] for t in self.teams if t != team)
        return 1 if self.scores[team] >= other else 2

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        """Write ``replay.<simid>.json`` and ``stats.<simid>.csv`` into ``out_dir``."""
        from .tournament import record_stats, write_stats

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        replay_path = self.recorder.write(out / f"replay.{self.sim_id}.json")
        stats_path = out / f"stats.{self.sim_id}.csv"
        write_stats(record_stats(self.recorder.replay()), stats_path)
        return replay_path, stats_path


class MatchRunner:
    """Owns the world of one match; the only code path that mutates it."""

    def __init__(self, config: SimConfig, roster: Roster | None = None, sim_id: str = "sim"):
        self.config = config
        self.roster = roster or Roster.default(config)
        self.sim_id = sim_id
        self.world = create_world(config, config.seed, self.roster)
        self.recorder = ReplayRecorder(make_header(config, self.roster, sim_id), self.world)
        self.last: dict[str, ActionResult] = {}
        self.outcomes: dict[str, Counter] = {c.name: Counter() for c in self.roster.credentials}

    @property
    def done(self) -> bool:
        return self.world.step >= self.config.steps

    def percept(self, name: str) -> Percept:
        return compute_percept(self.world, self.world.agents[name], self.last.get(name))

    def tick(self, actions: dict[str, Action | None]) -> list[ActionResult]:
        ordered = {c.name: actions.get(c.name) for c in self.roster.credentials}
        _, results, events = engine.step(self.world, ordered)
        self.recorder.record(self.world, ordered, results, events)
        for r in results:
            self.last[r.agent] = r
            self.outcomes[r.agent][r.outcome] += 1
        return results

    def report(self) -> MatchReport:
        return MatchReport(
            self.sim_id, tuple(self.config.teams), dict(self.world.scores), self.world.step,
            self.recorder.final_hash, self.recorder, self.outcomes, self.done,
        )


def run_local_match(config: SimConfig, teams: dict, roster: Roster | None = None,
                    sim_id: str = "sim") -> MatchReport:
    """Run a whole match with in-process team behaviors, no network.

    ``teams`` maps team name to an object with ``act(agent_name, percept)``;
    a team missing from the map never answers. Exceptions from a behavior
    count as a missing answer.
    """
    runner = MatchRunner(config, roster, sim_id)
    members = [(c.name, c.team) for c in runner.roster.credentials]
    while not runner.done:
        actions: dict[str, Action | None] = {}
        for name, team in members:
            behavior = teams.get(team)
            if behavior is None:
                actions[name] = None
                continue
            try:
                actions[name] = behavior.act(name, runner.percept(name))
            except Exception:
                log.exception("behavior of %s failed", name)
                actions[name] = None
        runner.tick(actions)
    return runner.report()


# network ---------------------------------------------------------------------


@dataclass(eq=False)
class _Connection:
    reader: asyncio.StreamReader
    writer: asyncio.StreamWriter
    closed: bool = False

    async def send(self, msg, timeout: float = 2.0) -> bool:
        if self.closed:
            return False
        try:
            self.writer.write(encode(msg))
            await asyncio.wait_for(self.writer.drain(), timeout)
            return True
        except asyncio.TimeoutError:
            # peer is not reading; data stays queued on the transport
            return True
        except (ConnectionError, OSError):
            self.closed = True
            return False

    def send_nowait(self, msg) -> bool:
        """Queue ``msg`` on the transport without waiting for the peer to read."""
        if self.closed or self.writer.is_closing():
            self.closed = True
            return False
        self.writer.write(encode(msg))
        return True

    def close(self) -> None:
        self.closed = True
        try:
            self.writer.close()
        except Exception:
            pass


@dataclass(eq=False)
class _Slot:
    name: str
    team: str
    conn: _Connection | None = None
    pending_id: int | None = None
    future: asyncio.Future | None = None
    rejected: int = 0

    @property
    def connected(self) -> bool:
        return self.conn is not None and not self.conn.closed


class MatchServer:
    """Serve one match over TCP.

    Agents authenticate with ``auth-request``; a second login for the same
    slot replaces the earlier connection, which is closed. Each step every
    connected agent gets one ``request-action``; actions not received before
    the deadline (or with a stale id) become ``no_op``.
    """

    def __init__(self, config: SimConfig, roster: Roster | None = None,
                 host: str = "127.0.0.1", port: int = 0, sim_id: str = "sim"):
        self.runner = MatchRunner(config, roster, sim_id)
        self.config = config
        self.host = host
        self.port = port
        self.slots = {c.name: _Slot(c.name, c.team) for c in self.runner.roster.credentials}
        self._server: asyncio.AbstractServer | None = None
        self._all_connected = asyncio.Event()
        self._started = False
        self._next_id = 0
        self.step_times: list[float] = []

    async def start(self) -> int:
        self._server = await asyncio.start_server(self._handle, self.host, self.port, limit=MAX_FRAME)
        self.port = self._server.sockets[0].getsockname()[1]
        return self.port

    async def close(self) -> None:
        for slot in self.slots.values():
            if slot.conn is not None:
                slot.conn.close()
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()

    def _sim_start(self, slot: _Slot) -> SimStart:
        return SimStart(slot.name, slot.team, self.config.agents_per_team,
                        self.config.steps, self.config.vision, self.runner.sim_id)

    def authenticate(self, conn: _Connection, request: AuthRequest) -> _Slot | None:
        """Bind ``conn`` to the slot named in ``request``; None on bad credentials."""
        if not self.runner.roster.check(request.user, request.password):
            return None
        slot = self.slots[request.user]
        old, slot.conn = slot.conn, conn
        if old is not None and old is not conn:
            old.close()
        if all(s.connected for s in self.slots.values()):
            self._all_connected.set()
        return slot

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        conn = _Connection(reader, writer)
        slot = None
        try:
            while slot is None:
                try:
                    msg = await read_message(reader)
                except ProtocolError as exc:
                    log.info("protocol error before auth: %s", exc)
                    continue
                if not isinstance(msg, AuthRequest):
                    continue
                slot = self.authenticate(conn, msg)
                await conn.send(AuthResponse("ok" if slot else "fail"))
            if self._started:
                await conn.send(self._sim_start(slot))
            while True:
                try:
                    msg = await read_message(reader)
                except ProtocolError as exc:
                    slot.rejected += 1
                    log.info("%s: %s", slot.name, exc)
                    continue
                if slot.conn is not conn:
                    return
                if not isinstance(msg, ActionMessage):
                    continue
                fut = slot.future
                if msg.id == slot.pending_id and fut is not None and not fut.done():
                    fut.set_result(msg.action)
                else:
                    log.debug("%s: discarded action id %s (expecting %s)",
                              slot.name, msg.id, slot.pending_id)
        except (asyncio.IncompleteReadError, ConnectionError, OSError):
            pass
        finally:
            conn.closed = True
            if slot is not None and slot.conn is conn:
                self._all_connected.clear()

    async def run(self, out_dir: str | Path | None = None) -> MatchReport:
        """Play every step, then announce results. Partial replays are flushed on abort."""
        if self._server is None:
            await self.start()
        try:
            try:
                await asyncio.wait_for(self._all_connected.wait(),
                                       self.config.connect_timeout_ms / 1000)
            except asyncio.TimeoutError:
                missing = [s.name for s in self.slots.values() if not s.connected]
                log.warning("starting without %d agents: %s", len(missing), missing)
            self._started = True
            await asyncio.gather(*(s.conn.send(self._sim_start(s))
                                   for s in self.slots.values() if s.connected))
            while not self.runner.done:
                await self._play_step()
            report = self.runner.report()
            for slot in self.slots.values():
                if slot.connected:
                    await slot.conn.send(SimEnd(report.scores[slot.team], report.ranking(slot.team)))
                    await slot.conn.send(Bye())
        except BaseException:
            if out_dir is not None:
                self.runner.report().write(out_dir)
            raise
        finally:
            await self.close()
        if out_dir is not None:
            report.write(out_dir)
        return report

    async def _play_step(self) -> None:
        loop = asyncio.get_running_loop()
        deadline_s = self.config.deadline_ms / 1000
        waiting = []
        wall_deadline = int(time.time() * 1000) + self.config.deadline_ms
        for slot in self.slots.values():
            slot.future = None
            slot.pending_id = None
            if not slot.connected:
                continue
            self._next_id += 1
            slot.pending_id = self._next_id
            slot.future = loop.create_future()
            percept = self.runner.percept(slot.name)
            percept.deadline = wall_deadline
            if slot.conn.send_nowait(RequestAction(slot.pending_id, percept)):
                waiting.append(slot.future)
        # let the transports flush before the clock starts
        await asyncio.sleep(0)
        t0 = time.monotonic()
        if waiting:
            await asyncio.wait(waiting, timeout=deadline_s)
        actions: dict[str, Action | None] = {}
        for slot in self.slots.values():
            fut = slot.future
            actions[slot.name] = fut.result() if fut is not None and fut.done() else None
            slot.pending_id = None
            slot.future = None
        self.runner.tick(actions)
        self.step_times.append(time.monotonic() - t0)


async def serve_match(config: SimConfig, roster: Roster | None = None, host: str = "127.0.0.1",
                      port: int = 0, sim_id: str = "sim", out_dir=None) -> MatchReport:
    server = MatchServer(config, roster, host, port, sim_id)
    await server.start()
    log.info("listening on %s:%d", host, server.port)
    return await server.run(out_dir)
