"""Network client: one asyncio session per agent, one shared behavior per team."""

from __future__ import annotations

import asyncio
import logging
import time
from dataclasses import dataclass, field

from ..config import Credential
from ..engine import Action
from ..protocol import (
    ActionMessage,
    AuthRequest,
    AuthResponse,
    Bye,
    ProtocolError,
    RequestAction,
    SimEnd,
    SimStart,
    read_message,
    send_message,
)
from .behaviors import make_team

log = logging.getLogger(__name__)

SKIP = Action("skip")


@dataclass
class SessionLog:
    """What happened during one agent's session."""

    agent: str
    authenticated: bool = False
    starts: list[SimStart] = field(default_factory=list)
    ends: list[SimEnd] = field(default_factory=list)
    requests: int = 0
    replies: int = 0
    late_replies: int = 0  # replies sent after the percept's wall-clock deadline
    latencies: list[float] = field(default_factory=list)
    connects: int = 0
    bye: bool = False
    errors: list[str] = field(default_factory=list)

    @property
    def max_latency(self) -> float:
        return max(self.latencies, default=0.0)


async def _session(reader, writer, cred: Credential, behavior, slog: SessionLog) -> bool:
    """Serve one connection; True once the server said ``bye``."""
    await send_message(writer, AuthRequest(cred.name, cred.password))
    while True:
        try:
            msg = await read_message(reader)
        except ProtocolError as exc:
            slog.errors.append(str(exc))
            continue
        if isinstance(msg, AuthResponse):
            if not msg.ok:
                raise PermissionError(f"server rejected credentials for {cred.name}")
            slog.authenticated = True
        elif isinstance(msg, SimStart):
            slog.starts.append(msg)
        elif isinstance(msg, RequestAction):
            slog.requests += 1
            t0 = time.monotonic()
            try:
                action = behavior.act(cred.name, msg.percept)
            except Exception as exc:  # a broken behavior must not kill the session
                log.exception("%s: behavior failed", cred.name)
                slog.errors.append(f"behavior: {exc}")
                action = SKIP
            await send_message(writer, ActionMessage(msg.id, action))
            slog.replies += 1
            slog.latencies.append(time.monotonic() - t0)
            if msg.percept.deadline and time.time() * 1000 > msg.percept.deadline:
                slog.late_replies += 1
        elif isinstance(msg, SimEnd):
            slog.ends.append(msg)
        elif isinstance(msg, Bye):
            slog.bye = True
            return True


async def client_loop(host: str, port: int, cred: Credential, behavior, *,
                      retries: int = 5, retry_delay: float = 0.2) -> SessionLog:
    """Connect, authenticate and answer every ``request-action`` until ``bye``.

    ``behavior`` is a team object with ``act(agent_name, percept) -> Action``.
    A lost or refused connection is retried up to ``retries`` consecutive
    times; after that the loop gives up and the failure is in the log.
    Rejected credentials end the session immediately.
    """
    slog = SessionLog(cred.name)
    failures = 0
    while True:
        writer = None
        try:
            reader, writer = await asyncio.open_connection(host, port, limit=1 << 20)
            slog.connects += 1
            failures = 0
            if await _session(reader, writer, cred, behavior, slog):
                return slog
        except PermissionError as exc:
            slog.errors.append(str(exc))
            return slog
        except (ConnectionError, OSError, asyncio.IncompleteReadError) as exc:
            failures += 1
            slog.errors.append(f"connection: {exc!r}")
            if failures > retries:
                log.warning("%s: giving up after %d failed attempts", cred.name, failures)
                return slog
            await asyncio.sleep(retry_delay)
        finally:
            if writer is not None:
                writer.close()


async def run_team(host: str, port: int, credentials: list[Credential], behavior: str,
                   seed: int = 0, **kwargs) -> dict[str, SessionLog]:
    """Run every credential of one team concurrently with one shared behavior object."""
    teams = {c.team for c in credentials}
    if len(teams) != 1:
        raise ValueError(f"credentials must belong to exactly one team, got {sorted(teams)}")
    team = make_team(behavior, teams.pop(), [c.name for c in credentials], seed)
    logs = await asyncio.gather(*(client_loop(host, port, c, team, **kwargs) for c in credentials))
    return {slog.agent: slog for slog in logs}


__all__ = ["SessionLog", "client_loop", "run_team"]
