"""Wire messages between server and agents.

Each message is one UTF-8 JSON object ``{"type": ..., "content": {...}}``
terminated by a single zero byte.
"""

from __future__ import annotations

import asyncio
import json
from dataclasses import dataclass

from .engine import Action
from .perception import Percept

TERMINATOR = b"\0"
MAX_FRAME = 1 << 20


class ProtocolError(Exception):
    """A document that could not be turned into a message.

    ``code`` is one of ``framing``, ``malformed``, ``unknown-type``,
    ``missing-field``, ``bad-value`` or ``stale-id``; ``field`` names the
    offending field when there is one.
    """

    def __init__(self, code: str, message: str, field: str | None = None):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.field = field


@dataclass(frozen=True)
class AuthRequest:
    user: str
    password: str
    type = "auth-request"

    def content(self) -> dict:
        return {"user": self.user, "pw": self.password}

    @classmethod
    def parse(cls, c: dict) -> AuthRequest:
        return cls(_get(c, "user", str), _get(c, "pw", str))


@dataclass(frozen=True)
class AuthResponse:
    result: str  # "ok" | "fail"
    type = "auth-response"

    def content(self) -> dict:
        return {"result": self.result}

    @classmethod
    def parse(cls, c: dict) -> AuthResponse:
        result = _get(c, "result", str)
        if result not in ("ok", "fail"):
            raise ProtocolError("bad-value", f"result must be ok or fail, got {result!r}", "result")
        return cls(result)

    @property
    def ok(self) -> bool:
        return self.result == "ok"


@dataclass(frozen=True)
class SimStart:
    name: str
    team: str
    team_size: int
    steps: int
    vision: int
    sim_id: str
    type = "sim-start"

    def content(self) -> dict:
        return {"name": self.name, "team": self.team, "teamSize": self.team_size,
                "steps": self.steps, "vision": self.vision, "simId": self.sim_id}

    @classmethod
    def parse(cls, c: dict) -> SimStart:
        return cls(_get(c, "name", str), _get(c, "team", str), _get(c, "teamSize", int),
                   _get(c, "steps", int), _get(c, "vision", int), _get(c, "simId", str))


@dataclass
class RequestAction:
    id: int
    percept: Percept
    type = "request-action"

    def content(self) -> dict:
        return {"id": self.id, "percept": self.percept.to_dict()}

    @classmethod
    def parse(cls, c: dict) -> RequestAction:
        raw = _get(c, "percept", dict)
        try:
            percept = Percept.from_dict(raw)
        except KeyError as exc:
            raise ProtocolError("missing-field", f"percept lacks {exc}", f"percept.{exc.args[0]}") from None
        except (TypeError, ValueError) as exc:
            raise ProtocolError("bad-value", str(exc), "percept") from None
        return cls(_get(c, "id", int), percept)


@dataclass(frozen=True)
class ActionMessage:
    id: int
    action: Action
    type = "action"

    def content(self) -> dict:
        return {"id": self.id, "type": self.action.kind, "p": list(self.action.params)}

    @classmethod
    def parse(cls, c: dict) -> ActionMessage:
        return cls(_get(c, "id", int), Action(_get(c, "type", str), tuple(_get(c, "p", list))))


@dataclass(frozen=True)
class SimEnd:
    score: int
    ranking: int
    type = "sim-end"

    def content(self) -> dict:
        return {"score": self.score, "ranking": self.ranking}

    @classmethod
    def parse(cls, c: dict) -> SimEnd:
        return cls(_get(c, "score", int), _get(c, "ranking", int))


@dataclass(frozen=True)
class Bye:
    type = "bye"

    def content(self) -> dict:
        return {}

    @classmethod
    def parse(cls, c: dict) -> Bye:
        return cls()


Message = AuthRequest | AuthResponse | SimStart | RequestAction | ActionMessage | SimEnd | Bye

MESSAGE_TYPES = {
    cls.type: cls
    for cls in (AuthRequest, AuthResponse, SimStart, RequestAction, ActionMessage, SimEnd, Bye)
}


def _get(content: dict, key: str, kind: type):
    if key not in content:
        raise ProtocolError("missing-field", f"missing {key!r}", key)
    value = content[key]
    if kind is int and isinstance(value, bool) or not isinstance(value, kind):
        raise ProtocolError("bad-value", f"{key!r} must be {kind.__name__}", key)
    return value


def to_document(msg: Message) -> dict:
    return {"type": msg.type, "content": msg.content()}


def dumps(msg: Message) -> str:
    """The JSON text of ``msg`` without the frame terminator."""
    return json.dumps(to_document(msg), separators=(",", ":"), ensure_ascii=False)


def encode(msg: Message) -> bytes:
    return dumps(msg).encode("utf-8") + TERMINATOR


def parse_document(text: str | bytes) -> Message:
    """Build a message from one unframed JSON document."""
    try:
        doc = json.loads(text)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError("malformed", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ProtocolError("malformed", "document is not an object")
    mtype = doc.get("type")
    if not isinstance(mtype, str):
        raise ProtocolError("missing-field", "missing message type", "type")
    cls = MESSAGE_TYPES.get(mtype)
    if cls is None:
        raise ProtocolError("unknown-type", f"unknown message type {mtype!r}", "type")
    content = doc.get("content", {})
    if not isinstance(content, dict):
        raise ProtocolError("bad-value", "content must be an object", "content")
    return cls.parse(content)


def decode(data: bytes) -> Message:
    """Decode exactly one framed message (document plus trailing zero byte)."""
    if not data.endswith(TERMINATOR):
        raise ProtocolError("framing", "document is not zero-terminated")
    body = data[:-1]
    if TERMINATOR in body:
        raise ProtocolError("framing", "more than one document in frame")
    return parse_document(body)


def check_action_id(msg: ActionMessage, expected: int) -> None:
    if msg.id != expected:
        raise ProtocolError("stale-id", f"action id {msg.id} does not match request {expected}", "id")


class FrameReader:
    """Incremental splitter for a byte stream of zero-terminated documents."""

    def __init__(self, max_frame: int = MAX_FRAME):
        self.max_frame = max_frame
        self._buf = bytearray()
        self._skipping = False

    def feed(self, data: bytes) -> list[Message | ProtocolError]:
        out: list[Message | ProtocolError] = []
        self._buf += data
        while True:
            idx = self._buf.find(TERMINATOR)
            if idx < 0:
                if len(self._buf) > self.max_frame:
                    if not self._skipping:
                        out.append(ProtocolError("framing", "frame exceeds size limit"))
                    self._skipping = True
                    self._buf.clear()
                return out
            frame = bytes(self._buf[:idx])
            del self._buf[:idx + 1]
            if self._skipping:
                self._skipping = False
                continue
            try:
                out.append(parse_document(frame))
            except ProtocolError as exc:
                out.append(exc)

    @property
    def pending(self) -> int:
        return len(self._buf)


async def read_message(reader: asyncio.StreamReader) -> Message:
    """Read one message; raises ``ProtocolError`` on a bad document, EOF errors on close."""
    try:
        frame = await reader.readuntil(TERMINATOR)
    except asyncio.LimitOverrunError:
        # drain the oversized frame so the stream stays usable
        while True:
            try:
                await reader.readuntil(TERMINATOR)
                break
            except asyncio.LimitOverrunError as exc:
                await reader.readexactly(exc.consumed)
        raise ProtocolError("framing", "frame exceeds size limit") from None
    return parse_document(frame[:-1])


async def send_message(writer: asyncio.StreamWriter, msg: Message) -> None:
    writer.write(encode(msg))
    await writer.drain()
