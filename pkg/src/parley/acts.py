"""Dialog acts shared by the engine (producer) and the renderer (consumer)."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional


class DialogAct(str, Enum):
    ASK = "ASK"
    INFORM = "INFORM"
    CONFIRM_EXPLICIT = "CONFIRM_EXPLICIT"
    CONFIRM_IMPLICIT = "CONFIRM_IMPLICIT"
    HELLO = "HELLO"
    BYE = "BYE"
    HANDOFF = "HANDOFF"
    RELAY = "RELAY"
    REPHRASE = "REPHRASE"
    INSTRUCT = "INSTRUCT"


# Acts that hand the floor to the user; the engine stops executing stack
# frames for the turn once one has been emitted.
FLOOR_YIELDING = frozenset(
    {
        DialogAct.ASK,
        DialogAct.CONFIRM_EXPLICIT,
        DialogAct.RELAY,
        DialogAct.REPHRASE,
        DialogAct.INSTRUCT,
    }
)


@dataclass(frozen=True)
class Act:
    act: DialogAct
    value: Any = None

    def serializable(self) -> list:
        value = self.value
        if isinstance(value, dict):
            value = dict(value)
        return [self.act.value, value]


@dataclass
class SystemAction:
    acts: list[Act] = field(default_factory=list)

    def __iter__(self):
        return iter(self.acts)

    def __len__(self) -> int:
        return len(self.acts)

    def kinds(self) -> list[DialogAct]:
        return [a.act for a in self.acts]

    def serializable(self) -> list[list]:
        return [a.serializable() for a in self.acts]

    @property
    def yields_floor(self) -> bool:
        return any(a.act in FLOOR_YIELDING for a in self.acts)

    @property
    def ends_session(self) -> bool:
        return any(a.act is DialogAct.BYE for a in self.acts)
