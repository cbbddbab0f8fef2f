"""Newline-delimited JSON message schema, version 1.

One message per line:

    {"v": 1, "seq": 3, "kind": "command", "payload": {"name": "select"}}

``seq`` increases strictly per direction per connection. Every command or
marker_move is answered by an ack or error carrying the same seq in
``payload.ref_seq``. Unknown kinds and malformed lines raise
ProtocolParseError with the offending line retained for diagnostics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..errors import SimError

SCHEMA_VERSION = 1

KINDS = frozenset({
    "hello", "scene_snapshot", "menu_update", "phase_update", "command",
    "marker_move", "robot_status", "trial_result", "error", "ack",
})

# Minimal per-kind payload requirements (field name -> allowed types).
_REQUIRED_FIELDS: dict[str, dict[str, tuple[type, ...]]] = {
    "command": {"name": (str,)},
    "marker_move": {"du": (int, float), "dv": (int, float)},
    "ack": {"ref_seq": (int,)},
    "error": {"message": (str,)},
}


class ProtocolParseError(SimError):
    """Line failed to parse or validate; carries the offending line."""

    def __init__(self, message: str, line: str):
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class Message:
    seq: int
    kind: str
    payload: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown message kind {self.kind!r}")
        if not isinstance(self.seq, int) or self.seq < 0:
            raise ValueError("seq must be a non-negative integer")
        for name, types in _REQUIRED_FIELDS.get(self.kind, {}).items():
            value = self.payload.get(name)
            if not isinstance(value, types) or isinstance(value, bool):
                raise ValueError(
                    f"{self.kind} payload field {name!r} missing or mistyped")


def encode_message(msg: Message) -> str:
    """Canonical single-line encoding (sorted keys, compact separators)."""
    return json.dumps({"v": SCHEMA_VERSION, "seq": msg.seq, "kind": msg.kind,
                       "payload": msg.payload},
                      sort_keys=True, separators=(",", ":"))


def decode_line(line: str) -> Message:
    stripped = line.strip()
    try:
        doc = json.loads(stripped)
    except json.JSONDecodeError as exc:
        raise ProtocolParseError(f"invalid JSON: {exc}", line) from exc
    if not isinstance(doc, dict):
        raise ProtocolParseError("message is not a JSON object", line)
    if doc.get("v") != SCHEMA_VERSION:
        raise ProtocolParseError(f"unsupported schema version {doc.get('v')!r}",
                                 line)
    kind = doc.get("kind")
    seq = doc.get("seq")
    payload = doc.get("payload", {})
    if not isinstance(payload, dict):
        raise ProtocolParseError("payload must be an object", line)
    try:
        return Message(seq=seq, kind=kind, payload=payload)
    except (ValueError, TypeError) as exc:
        raise ProtocolParseError(str(exc), line) from exc
