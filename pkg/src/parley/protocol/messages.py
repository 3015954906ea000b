"""Wire types and codec for the remote-agent protocol.

JSON over HTTP, two endpoints: POST /newcall and POST /next. Every message
carries a version field `"v": 1` so the format can evolve.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

PROTOCOL_VERSION = 1

OUTCOMES = ("completed", "abandoned", "error")


class ProtocolError(Exception):
    """Malformed or version-incompatible protocol message."""


class Unreachable(Exception):
    """Endpoint could not be reached within the timeout policy."""


class SessionUnknown(Exception):
    """Token does not name an open session (never opened, or already closed)."""


class AgentRefused(Exception):
    """Agent rejected the NewCall."""


@dataclass(frozen=True)
class SlotValue:
    value: str
    conf: float


@dataclass(frozen=True)
class InitialState:
    user_id: str
    known_slots: Mapping[str, SlotValue] = field(default_factory=dict)
    locale: Optional[str] = None

    def confident_slots(self, minimum: float = 0.5) -> dict[str, str]:
        return {k: sv.value for k, sv in self.known_slots.items() if sv.conf >= minimum}


@dataclass
class AgentSession:
    agent_name: str
    endpoint: str
    session_token: str
    ended: bool = False
    report: Optional["DialogReport"] = None


@dataclass(frozen=True)
class ReportTurn:
    speaker: str  # "user" | "system"
    text: str
    timestamp: float


@dataclass
class DialogReport:
    session_token: str
    turns: list[ReportTurn] = field(default_factory=list)
    outcome: str = "completed"
    extras: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.outcome not in OUTCOMES:
            raise ProtocolError(f"unknown report outcome {self.outcome!r}")
        stamps = [t.timestamp for t in self.turns]
        if stamps != sorted(stamps):
            raise ProtocolError("report turns must be in timestamp order")

    def user_turn_texts(self) -> list[str]:
        return [t.text for t in self.turns if t.speaker == "user"]


def encode_newcall_request(user_id: str, s0: InitialState) -> dict:
    body: dict[str, Any] = {
        "v": PROTOCOL_VERSION,
        "user_id": user_id,
        "s0": {
            "known_slots": {
                name: {"value": sv.value, "conf": sv.conf}
                for name, sv in s0.known_slots.items()
            }
        },
    }
    if s0.locale:
        body["s0"]["locale"] = s0.locale
    return body


def decode_newcall_request(body: Any) -> tuple[str, InitialState]:
    _check_version(body)
    user_id = _expect_str(body, "user_id")
    s0_raw = body.get("s0")
    if not isinstance(s0_raw, Mapping):
        raise ProtocolError("newcall needs an 's0' object")
    slots_raw = s0_raw.get("known_slots", {})
    if not isinstance(slots_raw, Mapping):
        raise ProtocolError("s0.known_slots must be an object")
    slots = {}
    for name, raw in slots_raw.items():
        if not isinstance(raw, Mapping) or "value" not in raw or "conf" not in raw:
            raise ProtocolError(f"slot {name!r} needs 'value' and 'conf'")
        conf = raw["conf"]
        if not isinstance(conf, (int, float)) or not 0 <= conf <= 1:
            raise ProtocolError(f"slot {name!r} confidence out of range")
        slots[str(name)] = SlotValue(value=str(raw["value"]), conf=float(conf))
    locale = s0_raw.get("locale")
    return user_id, InitialState(user_id=user_id, known_slots=slots, locale=locale)


def encode_newcall_response(token: str, reply: str) -> dict:
    return {"v": PROTOCOL_VERSION, "token": token, "reply": reply}


def decode_newcall_response(body: Any) -> tuple[str, str]:
    _check_version(body)
    return _expect_str(body, "token"), _expect_str(body, "reply")


def encode_next_request(token: str, utt: str) -> dict:
    return {"v": PROTOCOL_VERSION, "token": token, "utt": utt}


def decode_next_request(body: Any) -> tuple[str, str]:
    _check_version(body)
    return _expect_str(body, "token"), _expect_str(body, "utt")


def encode_next_response(
    reply: str, ended: bool, report: Optional[DialogReport]
) -> dict:
    return {
        "v": PROTOCOL_VERSION,
        "reply": reply,
        "ended": bool(ended),
        "report": encode_report(report) if report is not None else None,
    }


def decode_next_response(body: Any) -> tuple[str, bool, Optional[DialogReport]]:
    _check_version(body)
    reply = _expect_str(body, "reply")
    ended = body.get("ended")
    if not isinstance(ended, bool):
        raise ProtocolError("'ended' must be a boolean")
    report_raw = body.get("report")
    report = decode_report(report_raw) if report_raw is not None else None
    return reply, ended, report


def encode_report(report: DialogReport) -> dict:
    return {
        "v": PROTOCOL_VERSION,
        "session_token": report.session_token,
        "turns": [
            {"speaker": t.speaker, "text": t.text, "timestamp": t.timestamp}
            for t in report.turns
        ],
        "outcome": report.outcome,
        "extras": dict(report.extras),
    }


def decode_report(body: Any) -> DialogReport:
    if not isinstance(body, Mapping):
        raise ProtocolError("report must be an object")
    _check_version(body)
    token = _expect_str(body, "session_token")
    turns_raw = body.get("turns")
    if not isinstance(turns_raw, list):
        raise ProtocolError("report needs a 'turns' list")
    turns = []
    for raw in turns_raw:
        if not isinstance(raw, Mapping):
            raise ProtocolError("report turns must be objects")
        speaker = raw.get("speaker")
        if speaker not in ("user", "system"):
            raise ProtocolError(f"bad report speaker {speaker!r}")
        text = raw.get("text")
        stamp = raw.get("timestamp")
        if not isinstance(text, str) or not isinstance(stamp, (int, float)):
            raise ProtocolError("report turns need string text and numeric timestamp")
        turns.append(ReportTurn(speaker=speaker, text=text, timestamp=float(stamp)))
    outcome = body.get("outcome")
    if outcome not in OUTCOMES:
        raise ProtocolError(f"unknown report outcome {outcome!r}")
    extras = body.get("extras") or {}
    if not isinstance(extras, Mapping):
        raise ProtocolError("report extras must be an object")
    return DialogReport(
        session_token=token, turns=turns, outcome=outcome, extras=dict(extras)
    )


def minimal_report(token: str) -> DialogReport:
    """Server-side substitute when a handler ends without attaching a report."""
    return DialogReport(session_token=token, turns=[], outcome="error")


def _check_version(body: Any) -> None:
    if not isinstance(body, Mapping):
        raise ProtocolError("message must be a JSON object")
    version = body.get("v", PROTOCOL_VERSION)
    if version != PROTOCOL_VERSION:
        raise ProtocolError(f"unsupported protocol version {version!r}")


def _expect_str(body: Mapping, key: str) -> str:
    value = body.get(key)
    if not isinstance(value, str):
        raise ProtocolError(f"{key!r} must be a string")
    return value
