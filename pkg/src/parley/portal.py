"""Session front gate: owns sessions, drives the turn pipeline over the bus.

Each user turn runs nlu.parse -> engine.run_turn -> nlg.render, strictly
serialized per session (a second request while one is in flight is rejected
with Busy, never queued). Sessions idle past the TTL are expired; their
transcripts stay readable for a retention window and are appended to a daily
newline-delimited JSON log for corpus export.
"""

from __future__ import annotations

import json
import logging
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional

from .agents import load_restaurant_store, load_weather_store, reference_remote_agent
from .bus import MessageBus, Topic
from .chatbot import build_index, load_pairs, respond
from .config import DateResolver, PortalConfig
from .engine import DialogEngine, DialogState, load_tree
from .nlg import load_templates, render
from .nlu import load_lexicon, parse
from .ontology import load_ontology
from .protocol.client import AgentConnector
from .protocol.messages import encode_report
from .protocol.server import AgentHost

log = logging.getLogger(__name__)

REMOTE_GOODBYE = "goodbye"


class PortalError(Exception):
    pass


class UnknownSession(PortalError):
    pass


class Busy(PortalError):
    pass


class SessionClosed(PortalError):
    pass


class InternalError(PortalError):
    def __init__(self, correlation_id: str):
        super().__init__(f"internal error, correlation id {correlation_id}")
        self.correlation_id = correlation_id


@dataclass
class Session:
    session_id: str
    state: DialogState
    created_at: float
    last_active: float
    active_agent_name: str
    lock: threading.Lock = field(default_factory=threading.Lock)


@dataclass(frozen=True)
class TurnReply:
    reply: str
    active_agent: str
    ended: bool


class Portal:
    def __init__(
        self,
        config: Optional[PortalConfig] = None,
        *,
        connector: Optional[AgentConnector] = None,
        local_agents: Optional[Mapping[str, object]] = None,
        clock: Callable[[], float] = time.time,
    ):
        self.config = config or PortalConfig.shipped()
        self.clock = clock
        self.bus = MessageBus()

        self.lexicon = load_lexicon(self.config.lexicon_path)
        self.templates = load_templates(self.config.templates_path)
        self.chat_index = build_index(load_pairs(*self.config.pairs_paths))

        ontology = load_ontology(self.config.ontology_path)
        tree = load_tree(self.config.tree_path)

        weather = load_weather_store(self.config.weather_path)
        restaurants = load_restaurant_store(self.config.restaurants_path)

        self.connector = connector or AgentConnector()
        if local_agents is None:
            local_agents = {"bistro": reference_remote_agent(restaurants)}
        for name, handler in local_agents.items():
            self.connector.register_local(name, AgentHost(handler))

        threshold = self.config.chat_threshold
        self.engine = DialogEngine(
            tree,
            ontology,
            connector=self.connector,
            knowledge_agents={"weather": weather, "restaurant": restaurants},
            chat_responder=lambda text: respond(self.chat_index, text, threshold),
            resolvers={"date_time": DateResolver(self.config.anchor_date)},
            remote_endpoints=self.config.remote_endpoints,
            agent_name=self.config.agent_name,
        )

        self._sessions: dict[str, Session] = {}
        # session_id -> (expired_at, Session); readable within the retention window.
        self._archive: dict[str, tuple[float, Session]] = {}
        self._registry_lock = threading.Lock()
        self._log_lock = threading.Lock()

    @property
    def agent_name(self) -> str:
        return self.engine.agent_name

    # ------------------------------------------------------------- operations

    def create_session(self) -> dict:
        session_id = uuid.uuid4().hex
        state, action = self.engine.start_session(session_id)
        reply = render(action, self.templates, rng_seed=self.config.seed)
        now = self.clock()
        session = Session(
            session_id=session_id,
            state=state,
            created_at=now,
            last_active=now,
            active_agent_name=self.engine.agent_name,
        )
        with self._registry_lock:
            self._sessions[session_id] = session
        self._log_turn(session, user_text=None, reply=reply)
        return {
            "session_id": session_id,
            "reply": reply,
            "active_agent": session.active_agent_name,
            "ended": False,
        }

    def post_utterance(self, session_id: str, text: str) -> TurnReply:
        session = self._live_session(session_id)
        if not session.lock.acquire(blocking=False):
            raise Busy(session_id)
        try:
            if session.state.ended:
                raise SessionClosed(session_id)
            try:
                reply = self._pipeline(session, text)
            except PortalError:
                raise
            except Exception:
                correlation_id = uuid.uuid4().hex[:12]
                log.exception("turn failed on session %s [%s]", session_id, correlation_id)
                raise InternalError(correlation_id) from None
            session.last_active = self.clock()
            session.active_agent_name = self.engine.active_agent_name(session.state)
            self._log_turn(session, user_text=text, reply=reply)
            return TurnReply(reply, session.active_agent_name, session.state.ended)
        finally:
            session.lock.release()

    def get_transcript(self, session_id: str) -> list[dict]:
        session = self._any_session(session_id)
        return [
            {
                "turn": record.turn,
                "user_text": record.user_text,
                "acts": record.acts,
                "agent": record.agent,
                "touched": [list(pair) for pair in record.touched],
                "report": record.report,
            }
            for record in session.state.history
        ]

    def expire_sessions(self, now: Optional[float] = None, ttl: Optional[float] = None) -> int:
        now = self.clock() if now is None else now
        ttl = self.config.session_ttl if ttl is None else ttl
        with self._registry_lock:
            idle = [
                s for s in self._sessions.values() if now - s.last_active >= ttl
            ]
        for session in idle:
            self._close(session)
            with self._registry_lock:
                self._sessions.pop(session.session_id, None)
                self._archive[session.session_id] = (now, session)
        self._purge_archive(now)
        return len(idle)

    # -------------------------------------------------------------- internals

    def _pipeline(self, session: Session, text: str) -> str:
        sid = session.session_id
        frame = self.bus.exchange(
            Topic.NLU_REQUEST,
            sid,
            {"text": text},
            lambda: parse(text, self.lexicon),
            lambda result: {"frame": result},
        )
        _state, action = self.bus.exchange(
            Topic.DM_REQUEST,
            sid,
            {"frame": frame},
            lambda: self.engine.run_turn(session.state, frame),
            lambda result: {"acts": result[1].serializable()},
        )
        reply = self.bus.exchange(
            Topic.NLG_REQUEST,
            sid,
            {"acts": action.serializable()},
            lambda: render(action, self.templates, rng_seed=self.config.seed),
            lambda result: {"reply": result},
        )
        return reply

    def _close(self, session: Session) -> None:
        state = session.state
        remote = state.active_remote
        if remote is not None:
            state.active_remote = None  # close exactly once
            try:
                _reply, _ended, report = self.connector.next(remote, REMOTE_GOODBYE)
            except Exception as exc:
                log.warning("closing remote %s failed: %s", remote.agent_name, exc)
            else:
                if report is not None:
                    state.reports.append(encode_report(report))
        state.ended = True

    def _purge_archive(self, now: float) -> None:
        window = self.config.retention_window
        with self._registry_lock:
            stale = [
                sid
                for sid, (expired_at, _s) in self._archive.items()
                if now - expired_at > window
            ]
            for sid in stale:
                del self._archive[sid]

    def _live_session(self, session_id: str) -> Session:
        with self._registry_lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSession(session_id)
        return session

    def _any_session(self, session_id: str) -> Session:
        with self._registry_lock:
            session = self._sessions.get(session_id)
            if session is None:
                archived = self._archive.get(session_id)
                session = archived[1] if archived else None
        if session is None:
            raise UnknownSession(session_id)
        return session

    def _log_turn(self, session: Session, user_text: Optional[str], reply: str) -> None:
        directory = self.config.transcript_dir
        if directory is None:
            return
        record = session.state.history[-1]
        line = json.dumps(
            {
                "ts": self.clock(),
                "session_id": session.session_id,
                "turn": record.turn,
                "user_text": user_text,
                "acts": record.acts,
                "agent": record.agent,
                "reply": reply,
            },
            ensure_ascii=False,
        )
        day = time.strftime("%Y-%m-%d", time.gmtime(self.clock()))
        path = Path(directory) / f"transcript-{day}.jsonl"
        with self._log_lock:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
