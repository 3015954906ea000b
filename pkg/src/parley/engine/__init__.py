from .core import (
    AUTO_GROUND_AT,
    DEFAULT_INSTRUCT,
    EXPLICIT_BELOW,
    STEP_BUDGET,
    TRIGGER_THRESHOLD,
    DeterministicPolicy,
    DialogEngine,
    EmptyStack,
    EngineError,
    RemoteAgentFailure,
    SessionEnded,
    TurnBudgetExceeded,
)
from .state import (
    NO_CANDIDATE,
    DialogState,
    StackFrame,
    StepKind,
    StepOutcome,
    TransformKind,
    TransformOutcome,
    TurnRecord,
)
from .tree import (
    ActionSpec,
    InvalidTree,
    NodeKind,
    TaskNode,
    TaskTree,
    load_tree,
    make_termination,
    validate_tree,
)

__all__ = [
    "AUTO_GROUND_AT",
    "DEFAULT_INSTRUCT",
    "EXPLICIT_BELOW",
    "STEP_BUDGET",
    "TRIGGER_THRESHOLD",
    "ActionSpec",
    "DeterministicPolicy",
    "DialogEngine",
    "DialogState",
    "EmptyStack",
    "EngineError",
    "InvalidTree",
    "NO_CANDIDATE",
    "NodeKind",
    "RemoteAgentFailure",
    "SessionEnded",
    "StackFrame",
    "StepKind",
    "StepOutcome",
    "TaskNode",
    "TaskTree",
    "TransformKind",
    "TransformOutcome",
    "TurnBudgetExceeded",
    "TurnRecord",
    "load_tree",
    "make_termination",
    "validate_tree",
]
