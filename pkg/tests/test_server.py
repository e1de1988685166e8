"""TCP match server: authentication, deadlines, stale ids and reconnects."""

import asyncio
from collections import Counter

import pytest

from mapcsim.agents.client import client_loop, run_team
from mapcsim.config import Credential, Roster, SimConfig
from mapcsim.engine import Action
from mapcsim.protocol import (
    ActionMessage,
    AuthRequest,
    AuthResponse,
    Bye,
    RequestAction,
    SimEnd,
    SimStart,
    read_message,
    send_message,
)
from mapcsim.replay import verify_text
from mapcsim.server import MatchServer

CFG = SimConfig(seed=5, steps=12, agents_per_team=2, width=16, height=16,
                deadline_ms=300, connect_timeout_ms=3000)


class RawClient:
    def __init__(self, port):
        self.port = port

    async def connect(self):
        self.reader, self.writer = await asyncio.open_connection("127.0.0.1", self.port)

    async def send(self, msg):
        await send_message(self.writer, msg)

    async def recv(self, timeout=5.0):
        return await asyncio.wait_for(read_message(self.reader), timeout)

    async def login(self, user, pw="1"):
        await self.connect()
        await self.send(AuthRequest(user, pw))
        return await self.recv()

    def close(self):
        self.writer.close()


async def skip_forever(client):
    """Answer every request with skip until bye."""
    seen = []
    while True:
        msg = await client.recv()
        seen.append(msg)
        if isinstance(msg, RequestAction):
            await client.send(ActionMessage(msg.id, Action("skip")))
        elif isinstance(msg, Bye):
            return seen


def run(coro):
    return asyncio.run(asyncio.wait_for(coro, 60))


def test_login_accept_and_reject():
    async def go():
        server = MatchServer(CFG)
        port = await server.start()
        try:
            c = RawClient(port)
            assert await c.login("agentA1", "wrong") == AuthResponse("fail")
            # the same connection may try again
            await c.send(AuthRequest("agentA1", "1"))
            assert await c.recv() == AuthResponse("ok")
            assert await RawClient(port).login("nobody") == AuthResponse("fail")
        finally:
            await server.close()

    run(go())


def test_full_match_with_skipping_clients():
    async def go():
        server = MatchServer(CFG)
        port = await server.start()
        clients = [RawClient(port) for _ in range(4)]
        for c, name in zip(clients, ["agentA1", "agentA2", "agentB1", "agentB2"]):
            assert (await c.login(name)).ok
        report, *logs = await asyncio.gather(server.run(), *(skip_forever(c) for c in clients))
        return report, logs

    report, logs = run(go())
    assert report.steps == CFG.steps
    for seen in logs:
        kinds = Counter(type(m).__name__ for m in seen)
        assert kinds["SimStart"] == 1 and kinds["RequestAction"] == CFG.steps
        assert isinstance(seen[-2], SimEnd)
        ids = [m.id for m in seen if isinstance(m, RequestAction)]
        assert ids == sorted(set(ids))
        steps = [m.percept.step for m in seen if isinstance(m, RequestAction)]
        assert steps == list(range(CFG.steps))
    assert all(c["success"] == CFG.steps for c in report.outcomes.values())
    assert verify_text(report.recorder.text()).ok


def test_silent_and_stale_answers_become_no_op():
    async def go():
        server = MatchServer(CFG)
        port = await server.start()
        good, silent, stale, late = (RawClient(port) for _ in range(4))
        for c, name in ((good, "agentA1"), (silent, "agentA2"), (stale, "agentB1"), (late, "agentB2")):
            assert (await c.login(name)).ok

        async def stale_answers():
            while True:
                msg = await stale.recv()
                if isinstance(msg, RequestAction):
                    await stale.send(ActionMessage(msg.id - 1000, Action("skip")))
                elif isinstance(msg, Bye):
                    return

        async def late_answers():
            # this client falls further behind every step; the server may hang up on it
            try:
                while True:
                    msg = await late.recv()
                    if isinstance(msg, RequestAction):
                        await asyncio.sleep(0.5)  # deadline is 0.3 s
                        await late.send(ActionMessage(msg.id, Action("skip")))
                    elif isinstance(msg, Bye):
                        return
            except (ConnectionError, asyncio.IncompleteReadError):
                return

        async def drain_silent():
            while not isinstance(await silent.recv(timeout=30), Bye):
                pass

        report, *_ = await asyncio.gather(server.run(), skip_forever(good), stale_answers(),
                                          late_answers(), drain_silent())
        return report, server

    report, server = run(go())
    assert report.outcomes["agentA1"]["success"] == CFG.steps
    for name in ("agentA2", "agentB1", "agentB2"):
        assert report.outcomes[name]["no_op"] == CFG.steps
    # waiting never exceeds the deadline by much
    assert max(server.step_times) < CFG.deadline_ms / 1000 + 0.2


def test_second_login_supersedes_first():
    async def go():
        server = MatchServer(CFG)
        port = await server.start()
        first = RawClient(port)
        assert (await first.login("agentA1")).ok
        second = RawClient(port)
        assert (await second.login("agentA1")).ok
        # the first connection is closed by the server
        with pytest.raises((asyncio.IncompleteReadError, ConnectionError)):
            await first.recv()
        others = [RawClient(port) for _ in range(3)]
        for c, name in zip(others, ["agentA2", "agentB1", "agentB2"]):
            assert (await c.login(name)).ok
        report, *_ = await asyncio.gather(server.run(), skip_forever(second),
                                          *(skip_forever(c) for c in others))
        return report

    report = run(go())
    assert report.outcomes["agentA1"]["success"] == CFG.steps


def test_client_library_reconnects_after_drop():
    """The client library retries when its connection is cut mid-match."""
    cfg = SimConfig(seed=2, steps=30, agents_per_team=1, width=14, height=14,
                    deadline_ms=500, connect_timeout_ms=3000)

    async def go():
        server = MatchServer(cfg)
        port = await server.start()

        class CutAtStepFive:
            """Skips, but at step 5 hangs up agentA1's connection on the server side."""

            def act(self, name, percept):
                if name == "agentA1" and percept.step == 5:
                    server.slots["agentA1"].conn.writer.close()
                return Action("skip")

        team = CutAtStepFive()
        report, log_a, log_b = await asyncio.gather(
            server.run(),
            client_loop("127.0.0.1", port, Credential("A", "agentA1", "1"), team,
                        retry_delay=0.05),
            client_loop("127.0.0.1", port, Credential("B", "agentB1", "1"), team),
        )
        return report, log_a, log_b

    report, log_a, log_b = run(go())
    assert log_a.connects == 2 and log_a.bye
    assert len(log_a.starts) == 2  # sim-start is sent again after the reconnect
    assert report.outcomes["agentA1"]["success"] >= cfg.steps - 3
    assert log_b.replies == cfg.steps and log_b.late_replies == 0


def test_client_gives_up_without_server():
    async def go():
        # grab a free port and close it again so nothing listens there
        srv = await asyncio.start_server(lambda r, w: None, "127.0.0.1", 0)
        port = srv.sockets[0].getsockname()[1]
        srv.close()
        await srv.wait_closed()
        return await client_loop("127.0.0.1", port, Credential("A", "a", "1"), None,
                                 retries=2, retry_delay=0.01)

    slog = run(go())
    assert slog.connects == 0 and len(slog.errors) == 3 and not slog.bye


def test_client_stops_on_rejected_credentials():
    async def go():
        server = MatchServer(CFG)
        port = await server.start()
        try:
            return await client_loop("127.0.0.1", port, Credential("A", "agentA1", "bad"), None)
        finally:
            await server.close()

    slog = run(go())
    assert not slog.authenticated and "rejected" in slog.errors[-1]


def test_reference_teams_over_tcp():
    cfg = SimConfig(seed=9, steps=25, deadline_ms=2000)
    roster = Roster.default(cfg)

    async def go():
        server = MatchServer(cfg, roster)
        port = await server.start()
        return await asyncio.gather(
            server.run(),
            run_team("127.0.0.1", port, [c for c in roster.credentials if c.team == "A"],
                     "assembler_pair", 9),
            run_team("127.0.0.1", port, [c for c in roster.credentials if c.team == "B"],
                     "explorer_digger", 9),
        )

    report, logs_a, logs_b = run(go())
    for slog in list(logs_a.values()) + list(logs_b.values()):
        assert slog.replies == cfg.steps and slog.late_replies == 0 and slog.bye
        assert slog.ends and isinstance(slog.starts[0], SimStart)
    assert sum(c["failed_parameter"] for c in report.outcomes.values()) == 0
