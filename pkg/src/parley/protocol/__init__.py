from .client import AgentConnector, new_call, next_turn
from .conformance import CheckResult, format_results, run_conformance
from .knowledge import (
    OPS,
    KnowledgeConstraint,
    KnowledgeError,
    TableKnowledgeAgent,
    UnknownField,
    UnknownOp,
    knowledge_query,
)
from .messages import (
    OUTCOMES,
    PROTOCOL_VERSION,
    AgentRefused,
    AgentSession,
    DialogReport,
    InitialState,
    ProtocolError,
    ReportTurn,
    SessionUnknown,
    SlotValue,
    Unreachable,
    decode_newcall_request,
    decode_newcall_response,
    decode_next_request,
    decode_next_response,
    decode_report,
    encode_newcall_request,
    encode_newcall_response,
    encode_next_request,
    encode_next_response,
    encode_report,
    minimal_report,
)
from .server import AgentHost, AgentServer, BindFailure, serve_agent

__all__ = [
    "OPS",
    "OUTCOMES",
    "PROTOCOL_VERSION",
    "AgentConnector",
    "AgentHost",
    "AgentRefused",
    "AgentServer",
    "AgentSession",
    "BindFailure",
    "CheckResult",
    "DialogReport",
    "InitialState",
    "KnowledgeConstraint",
    "KnowledgeError",
    "ProtocolError",
    "ReportTurn",
    "SessionUnknown",
    "SlotValue",
    "TableKnowledgeAgent",
    "UnknownField",
    "UnknownOp",
    "Unreachable",
    "decode_newcall_request",
    "decode_newcall_response",
    "decode_next_request",
    "decode_next_response",
    "decode_report",
    "encode_newcall_request",
    "encode_newcall_response",
    "encode_next_request",
    "encode_next_response",
    "encode_report",
    "format_results",
    "knowledge_query",
    "minimal_report",
    "new_call",
    "next_turn",
    "run_conformance",
    "serve_agent",
]
