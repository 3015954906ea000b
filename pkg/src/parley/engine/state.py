"""Dialog state: the stack, per-session ontology snapshot, and turn history."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

from ..acts import Act
from ..nlu import SemanticFrame
from ..ontology import Ontology
from .tree import TaskNode


@dataclass
class StackFrame:
    node: TaskNode
    next_child: int = 0
    # Per-frame scratch: awaiting flags, remote session binding, confirm info.
    data: dict[str, Any] = field(default_factory=dict)


@dataclass
class TurnRecord:
    turn: int
    user_text: Optional[str]
    acts: list
    agent: str
    touched: list = field(default_factory=list)
    report: Optional[dict] = None


@dataclass
class DialogState:
    session_id: str
    ontology: Ontology
    turn_count: int = 0
    stack: list[StackFrame] = field(default_factory=list)
    last_frame: Optional[SemanticFrame] = None
    active_remote: Optional[Any] = None  # AgentSession while a handoff is live
    pending_actions: list[Act] = field(default_factory=list)
    history: list[TurnRecord] = field(default_factory=list)
    # Concepts whose value has been delivered to the user this session.
    informed: set[str] = field(default_factory=set)
    # Consecutive non-understanding count driving the recovery ladder.
    nonunderstanding_streak: int = 0
    # (concept, key, value) implicitly confirmed last turn, awaiting retraction.
    implicit_pending: list[tuple[str, str, str]] = field(default_factory=list)
    reports: list[dict] = field(default_factory=list)
    ended: bool = False
    # Per-turn scratch consumed by error_handle and the history record.
    turn_touched: list = field(default_factory=list)
    turn_transform: Optional[TransformOutcome] = None
    turn_consumed: bool = False
    fresh_report: Optional[dict] = None
    last_failure: Optional[Exception] = None

    def top(self) -> Optional[StackFrame]:
        return self.stack[-1] if self.stack else None

    def on_stack(self, node_id: str) -> bool:
        return any(frame.node.id == node_id for frame in self.stack)

    def emit(self, act: Act) -> None:
        self.pending_actions.append(act)


class StepKind(Enum):
    EMITTED = "emitted"
    AWAIT_USER = "await_user"
    SUBTASK_PUSHED = "subtask_pushed"
    POPPED = "popped"


@dataclass(frozen=True)
class StepOutcome:
    kind: StepKind
    node_id: str
    acts: tuple[Act, ...] = ()
    popped: int = 0
    pushed: Optional[str] = None


class TransformKind(Enum):
    PUSHED = "pushed"
    NO_CANDIDATE = "no_candidate"


@dataclass(frozen=True)
class TransformOutcome:
    kind: TransformKind
    node_id: Optional[str] = None

    @property
    def pushed(self) -> bool:
        return self.kind is TransformKind.PUSHED


NO_CANDIDATE = TransformOutcome(TransformKind.NO_CANDIDATE)
