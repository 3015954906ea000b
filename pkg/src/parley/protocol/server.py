"""Server-side kit for exposing a text remote agent.

AgentHost owns the session lifecycle (tokens, closed-session rejection,
report substitution); serve_agent wraps a host in a small threaded HTTP
server speaking the wire format.
"""

from __future__ import annotations

import json
import logging
import threading
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional, Protocol

from . import messages as wire
from .messages import (
    AgentRefused,
    DialogReport,
    InitialState,
    ProtocolError,
    SessionUnknown,
)

log = logging.getLogger(__name__)


class BindFailure(Exception):
    pass


class AgentHandler(Protocol):
    """What a remote agent implements; the kit supplies everything else."""

    def on_new_call(self, token: str, user_id: str, s0: InitialState) -> str:
        ...

    def on_next(
        self, token: str, utterance: str
    ) -> tuple[str, bool, Optional[DialogReport]]:
        ...


class AgentHost:
    """Session lifecycle around a handler.

    Accepts exactly the trace new_call -> next* -> ended once; anything else
    raises SessionUnknown. A handler ending without a report gets a minimal
    substitute (outcome `error`) and a logged warning. Handler invocations for
    one token are serialized; distinct tokens may run in parallel.
    """

    def __init__(self, handler: AgentHandler):
        self.handler = handler
        self._sessions: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def new_session(self, user_id: str, s0: InitialState) -> tuple[str, str]:
        token = uuid.uuid4().hex
        reply = self.handler.on_new_call(token, user_id, s0)
        with self._registry_lock:
            self._sessions[token] = threading.Lock()
        return token, reply

    def next(self, token: str, utterance: str) -> tuple[str, bool, DialogReport]:
        with self._registry_lock:
            lock = self._sessions.get(token)
        if lock is None:
            raise SessionUnknown(token)
        with lock:
            with self._registry_lock:
                if token not in self._sessions:
                    raise SessionUnknown(token)
            reply, ended, report = self.handler.on_next(token, utterance)
            if ended:
                with self._registry_lock:
                    self._sessions.pop(token, None)
                if report is None:
                    log.warning(
                        "agent ended session %s without a report; substituting", token
                    )
                    report = wire.minimal_report(token)
            return reply, bool(ended), report if ended else None


class AgentServer:
    """Running HTTP server; use as a context manager or call shutdown()."""

    def __init__(self, httpd: ThreadingHTTPServer, thread: threading.Thread):
        self._httpd = httpd
        self._thread = thread
        host, port = httpd.server_address[:2]
        self.url = f"http://{host}:{port}"

    def shutdown(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        self._thread.join(timeout=5)

    def __enter__(self) -> "AgentServer":
        return self

    def __exit__(self, *exc) -> None:
        self.shutdown()


def serve_agent(handler: AgentHandler, bind_address: tuple[str, int]) -> AgentServer:
    """Expose a handler at POST /newcall and POST /next."""
    host = AgentHost(handler)

    class Requests(BaseHTTPRequestHandler):
        def do_POST(self) -> None:  # noqa: N802 (http.server naming)
            try:
                length = int(self.headers.get("Content-Length", "0"))
                body = json.loads(self.rfile.read(length) or b"{}")
            except (ValueError, json.JSONDecodeError):
                return self._send(400, {"error": "protocol_error", "message": "bad JSON"})
            try:
                if self.path == "/newcall":
                    user_id, s0 = wire.decode_newcall_request(body)
                    token, reply = host.new_session(user_id, s0)
                    return self._send(200, wire.encode_newcall_response(token, reply))
                if self.path == "/next":
                    token, utt = wire.decode_next_request(body)
                    reply, ended, report = host.next(token, utt)
                    return self._send(
                        200, wire.encode_next_response(reply, ended, report)
                    )
                return self._send(404, {"error": "not_found"})
            except ProtocolError as exc:
                return self._send(400, {"error": "protocol_error", "message": str(exc)})
            except SessionUnknown:
                return self._send(404, {"error": "session_unknown"})
            except AgentRefused as exc:
                return self._send(403, {"error": "agent_refused", "message": str(exc)})
            except Exception:
                log.exception("agent handler crashed")
                return self._send(500, {"error": "internal"})

        def _send(self, status: int, payload: dict) -> None:
            payload.setdefault("v", wire.PROTOCOL_VERSION)
            data = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def log_message(self, *args) -> None:
            pass  # keep test output quiet

    try:
        httpd = ThreadingHTTPServer(bind_address, Requests)
    except OSError as exc:
        raise BindFailure(f"cannot bind {bind_address}: {exc}") from exc
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    return AgentServer(httpd, thread)
