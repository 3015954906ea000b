"""In-process message bus carrying the NLU -> engine -> NLG pipeline traffic.

Messages are dispatched synchronously in publish order, which gives FIFO
at-most-once delivery per session for free. A request and its result share
one seq; successive exchanges on a session get strictly increasing seqs.
The contract leaves room to swap in an external broker later.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable


class Topic(str, Enum):
    NLU_REQUEST = "nlu.request"
    NLU_RESULT = "nlu.result"
    DM_REQUEST = "dm.request"
    DM_RESULT = "dm.result"
    NLG_REQUEST = "nlg.request"
    NLG_RESULT = "nlg.result"


RESULT_FOR = {
    Topic.NLU_REQUEST: Topic.NLU_RESULT,
    Topic.DM_REQUEST: Topic.DM_RESULT,
    Topic.NLG_REQUEST: Topic.NLG_RESULT,
}


class BusOrderingError(Exception):
    pass


@dataclass(frozen=True)
class BusMessage:
    topic: Topic
    session_id: str
    seq: int
    payload: Any


class MessageBus:
    def __init__(self) -> None:
        self._handlers: dict[Topic, list[Callable[[BusMessage], None]]] = {}
        self._taps: list[Callable[[BusMessage], None]] = []
        self._counters: dict[str, int] = {}
        self._last_seen: dict[tuple[str, Topic], int] = {}
        self._lock = threading.Lock()

    def next_seq(self, session_id: str) -> int:
        with self._lock:
            value = self._counters.get(session_id, 0) + 1
            self._counters[session_id] = value
            return value

    def subscribe(self, topic: Topic, handler: Callable[[BusMessage], None]) -> None:
        self._handlers.setdefault(topic, []).append(handler)

    def tap(self, observer: Callable[[BusMessage], None]) -> None:
        """Observe every message regardless of topic."""
        self._taps.append(observer)

    def publish(self, message: BusMessage) -> None:
        key = (message.session_id, message.topic)
        with self._lock:
            last = self._last_seen.get(key)
            if last is not None and message.seq <= last:
                raise BusOrderingError(
                    f"{message.topic.value} seq {message.seq} after {last} "
                    f"on session {message.session_id}"
                )
            self._last_seen[key] = message.seq
        for observer in self._taps:
            observer(message)
        for handler in self._handlers.get(message.topic, []):
            handler(message)

    def exchange(
        self,
        request_topic: Topic,
        session_id: str,
        request_payload: Any,
        worker: Callable[[], Any],
        result_payload: Callable[[Any], Any] = lambda result: result,
    ) -> Any:
        """Publish a request, run the worker, publish the paired result."""
        seq = self.next_seq(session_id)
        self.publish(BusMessage(request_topic, session_id, seq, request_payload))
        result = worker()
        self.publish(
            BusMessage(RESULT_FOR[request_topic], session_id, seq, result_payload(result))
        )
        return result
