"""Newline-delimited JSON wire protocol shared by referee, players and provider.

Every line is one JSON object with a protocol version ``v``, a ``type`` and a
``round``; the remaining keys are the payload. Player numbers on the wire are 1-based.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

PROTOCOL_VERSION = 1

HELLO = "HELLO"
QUESTION = "QUESTION"
ANSWER = "ANSWER"
RESULT = "RESULT"
SUMMARY = "SUMMARY"
MEASURE = "MEASURE"
OUTCOME = "OUTCOME"
ERROR = "ERROR"

_INT = (int,)
_OPT_INT = (int, type(None))

# type -> (required payload fields, optional payload fields); values are accepted types
SCHEMA: dict[str, tuple[dict, dict]] = {
    HELLO: ({"role": (str,)}, {"player": _INT, "game": (str,), "n": _OPT_INT, "session": (str,), "rounds": _INT}),
    QUESTION: ({"q": (str,), "deadline_ms": _INT}, {}),
    ANSWER: ({"a": _INT}, {}),
    RESULT: ({"win": (bool,)}, {}),
    SUMMARY: ({"stats": (dict,)}, {}),
    MEASURE: ({"session": (str,), "player": _INT, "setting": (str,)}, {}),
    OUTCOME: ({"outcome": _INT}, {}),
    ERROR: ({"text": (str,)}, {}),
}


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class WireMessage:
    type: str
    round: int = 0
    payload: dict = field(default_factory=dict)

    def __post_init__(self):
        _validate(self.type, self.round, self.payload)

    def __getitem__(self, key):
        return self.payload[key]

    def get(self, key, default=None):
        return self.payload.get(key, default)


def _check_type(value, types) -> bool:
    # bool is an int subclass; keep them apart
    if isinstance(value, bool) and bool not in types:
        return False
    return isinstance(value, types)


def _validate(kind, round_, payload) -> None:
    if kind not in SCHEMA:
        raise ProtocolError(f"unknown message type {kind!r}")
    if not _check_type(round_, _INT):
        raise ProtocolError("round must be an integer")
    required, optional = SCHEMA[kind]
    for key, types in required.items():
        if key not in payload:
            raise ProtocolError(f"{kind} is missing field {key!r}")
        if not _check_type(payload[key], types):
            raise ProtocolError(f"{kind}.{key} has the wrong type")
    for key, value in payload.items():
        if key in required:
            continue
        if key not in optional:
            raise ProtocolError(f"{kind} has unexpected field {key!r}")
        if not _check_type(value, optional[key]):
            raise ProtocolError(f"{kind}.{key} has the wrong type")
    if kind == ANSWER and payload["a"] not in (1, -1):
        raise ProtocolError("answers must be +1 or -1")
    if kind == OUTCOME and payload["outcome"] not in (1, -1):
        raise ProtocolError("outcomes must be +1 or -1")


def encode_message(msg: WireMessage) -> bytes:
    doc = {"v": PROTOCOL_VERSION, "type": msg.type, "round": msg.round, **msg.payload}
    return (json.dumps(doc, separators=(",", ":"), ensure_ascii=False, allow_nan=False) + "\n").encode("utf-8")


def decode_message(data: bytes | str) -> WireMessage:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError:
            raise ProtocolError("malformed message") from None
    line = data.rstrip("\r\n")
    if "\n" in line:
        raise ProtocolError("malformed message")
    try:
        doc = json.loads(line)
    except json.JSONDecodeError:
        raise ProtocolError("malformed message") from None
    if not isinstance(doc, dict):
        raise ProtocolError("malformed message")
    if doc.pop("v", None) != PROTOCOL_VERSION:
        raise ProtocolError("unsupported protocol version")
    kind = doc.pop("type", None)
    if "round" not in doc:
        raise ProtocolError("message is missing field 'round'")
    round_ = doc.pop("round")
    return WireMessage(kind, round_, doc)


def message(kind: str, round: int = 0, **payload) -> WireMessage:
    return WireMessage(kind, round, payload)


def parse_endpoint(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"endpoint must look like HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)
