"""Client side of the remote-agent protocol.

new_call/next against an endpoint. `http(s)://` endpoints go over the wire
with a 10 s timeout and one retry on connection errors only (a delivered
`next` is never retried, it is not idempotent). `local:NAME` endpoints
resolve to in-process hosts registered on the connector, so shipped
configurations replay without network access.
"""

from __future__ import annotations

import logging
from typing import Optional

import httpx

from .messages import (
    AgentRefused,
    AgentSession,
    DialogReport,
    InitialState,
    ProtocolError,
    SessionUnknown,
    Unreachable,
    decode_newcall_response,
    decode_next_response,
    encode_newcall_request,
    encode_next_request,
)
from .server import AgentHost

log = logging.getLogger(__name__)

CALL_TIMEOUT = 10.0


class AgentConnector:
    """Resolves endpoints and speaks the protocol over them."""

    def __init__(self, local_hosts: Optional[dict[str, AgentHost]] = None):
        self.local_hosts = dict(local_hosts or {})

    def register_local(self, name: str, host: AgentHost) -> None:
        self.local_hosts[name] = host

    def new_call(
        self, endpoint: str, user_id: str, s0: InitialState, agent_name: str = ""
    ) -> tuple[AgentSession, str]:
        agent_name = agent_name or endpoint
        if endpoint.startswith("local:"):
            host = self._local(endpoint)
            token, reply = host.new_session(user_id, s0)
            # Local tokens are namespaced so next() can find the host again.
            token = f"{endpoint}#{token}"
        else:
            body = self._post(
                endpoint, "/newcall", encode_newcall_request(user_id, s0), retry=True
            )
            token, reply = decode_newcall_response(body)
        session = AgentSession(
            agent_name=agent_name, endpoint=endpoint, session_token=token
        )
        return session, reply

    def next(
        self, session: AgentSession, utterance: str
    ) -> tuple[str, bool, Optional[DialogReport]]:
        if session.ended:
            raise SessionUnknown(session.session_token)
        if session.endpoint.startswith("local:"):
            host = self._local(session.endpoint)
            raw_token = session.session_token.partition("#")[2]
            reply, ended, report = host.next(raw_token, utterance)
        else:
            # Connect errors mean the request was never delivered, so the
            # single retry is safe even for non-idempotent next.
            body = self._post(
                session.endpoint,
                "/next",
                encode_next_request(session.session_token, utterance),
                retry=True,
            )
            reply, ended, report = decode_next_response(body)
            if ended and report is None:
                # Server-side contract violation; tolerate and surface upstream.
                log.warning(
                    "agent %s ended without a report", session.agent_name
                )
        if ended:
            session.ended = True
            session.report = report
        return reply, ended, report

    def _local(self, endpoint: str) -> AgentHost:
        name = endpoint.partition(":")[2]
        host = self.local_hosts.get(name)
        if host is None:
            raise Unreachable(f"no local agent registered as {name!r}")
        return host

    def _post(self, endpoint: str, path: str, payload: dict, retry: bool) -> dict:
        url = endpoint.rstrip("/") + path
        attempts = 2 if retry else 1
        last_exc: Exception | None = None
        for attempt in range(attempts):
            try:
                response = httpx.post(url, json=payload, timeout=CALL_TIMEOUT)
                break
            except httpx.ConnectError as exc:
                last_exc = exc
                continue
            except httpx.TimeoutException as exc:
                raise Unreachable(f"{url} timed out: {exc}") from exc
            except httpx.HTTPError as exc:
                raise Unreachable(f"{url} failed: {exc}") from exc
        else:
            raise Unreachable(f"cannot connect to {url}: {last_exc}") from last_exc

        if response.status_code == 404:
            raise SessionUnknown(_error_message(response))
        if response.status_code == 403:
            raise AgentRefused(_error_message(response))
        if response.status_code >= 400:
            raise ProtocolError(
                f"{url} returned {response.status_code}: {_error_message(response)}"
            )
        try:
            return response.json()
        except ValueError as exc:
            raise ProtocolError(f"{url} returned invalid JSON") from exc


def _error_message(response: httpx.Response) -> str:
    try:
        body = response.json()
        return str(body.get("message") or body.get("error") or response.text)
    except ValueError:
        return response.text


def new_call(
    endpoint: str,
    user_id: str,
    s0: InitialState,
    agent_name: str = "",
    connector: Optional[AgentConnector] = None,
) -> tuple[AgentSession, str]:
    """Open a session on a remote agent; returns the session and first reply."""
    return (connector or AgentConnector()).new_call(endpoint, user_id, s0, agent_name)


def next_turn(
    session: AgentSession,
    utterance: str,
    connector: Optional[AgentConnector] = None,
) -> tuple[str, bool, Optional[DialogReport]]:
    """One user turn against an open session: (reply, ended, report|None)."""
    return (connector or AgentConnector()).next(session, utterance)
