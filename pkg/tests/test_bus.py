"""Pipeline message bus: ordering, pairing, delivery."""

import threading

import pytest

from parley.bus import (
    RESULT_FOR,
    BusMessage,
    BusOrderingError,
    MessageBus,
    Topic,
)


def msg(topic, seq, session="s1", payload=None):
    return BusMessage(topic, session, seq, payload)


def test_next_seq_is_strictly_increasing_per_session():
    bus = MessageBus()
    assert [bus.next_seq("a") for _ in range(3)] == [1, 2, 3]
    assert bus.next_seq("b") == 1  # independent counter


def test_publish_rejects_stale_seq():
    bus = MessageBus()
    bus.publish(msg(Topic.NLU_REQUEST, 2))
    with pytest.raises(BusOrderingError):
        bus.publish(msg(Topic.NLU_REQUEST, 2))
    with pytest.raises(BusOrderingError):
        bus.publish(msg(Topic.NLU_REQUEST, 1))
    bus.publish(msg(Topic.NLU_REQUEST, 3))


def test_ordering_is_per_session_and_topic():
    bus = MessageBus()
    bus.publish(msg(Topic.NLU_REQUEST, 5, session="a"))
    bus.publish(msg(Topic.NLU_REQUEST, 5, session="b"))  # other session ok
    bus.publish(msg(Topic.DM_REQUEST, 5, session="a"))  # other topic ok


def test_subscribers_receive_in_publish_order():
    bus = MessageBus()
    seen = []
    bus.subscribe(Topic.NLU_REQUEST, lambda m: seen.append(("h1", m.seq)))
    bus.subscribe(Topic.NLU_REQUEST, lambda m: seen.append(("h2", m.seq)))
    bus.subscribe(Topic.DM_REQUEST, lambda m: seen.append(("dm", m.seq)))
    bus.publish(msg(Topic.NLU_REQUEST, 1))
    bus.publish(msg(Topic.NLU_REQUEST, 2))
    assert seen == [("h1", 1), ("h2", 1), ("h1", 2), ("h2", 2)]


def test_tap_sees_every_topic():
    bus = MessageBus()
    seen = []
    bus.tap(lambda m: seen.append(m.topic))
    bus.publish(msg(Topic.NLU_REQUEST, 1))
    bus.publish(msg(Topic.NLG_RESULT, 1))
    assert seen == [Topic.NLU_REQUEST, Topic.NLG_RESULT]


def test_exchange_pairs_request_and_result_on_one_seq():
    bus = MessageBus()
    seen = []
    bus.tap(lambda m: seen.append((m.topic, m.seq, m.payload)))
    out = bus.exchange(
        Topic.NLU_REQUEST,
        "s1",
        {"text": "hi"},
        lambda: "FRAME",
        lambda result: {"frame": result},
    )
    assert out == "FRAME"
    assert seen == [
        (Topic.NLU_REQUEST, 1, {"text": "hi"}),
        (Topic.NLU_RESULT, 1, {"frame": "FRAME"}),
    ]


def test_successive_exchanges_take_increasing_seqs():
    bus = MessageBus()
    seqs = []
    bus.tap(lambda m: seqs.append(m.seq))
    for topic in (Topic.NLU_REQUEST, Topic.DM_REQUEST, Topic.NLG_REQUEST):
        bus.exchange(topic, "s1", {}, lambda: None)
    assert seqs == [1, 1, 2, 2, 3, 3]


def test_exchange_worker_exception_propagates():
    bus = MessageBus()
    seen = []
    bus.tap(lambda m: seen.append(m.topic))

    def worker():
        raise RuntimeError("nlu down")

    with pytest.raises(RuntimeError):
        bus.exchange(Topic.NLU_REQUEST, "s1", {}, worker)
    assert seen == [Topic.NLU_REQUEST]  # no orphan result message


def test_every_request_topic_has_a_result_topic():
    assert set(RESULT_FOR) == {
        Topic.NLU_REQUEST,
        Topic.DM_REQUEST,
        Topic.NLG_REQUEST,
    }
    assert set(RESULT_FOR.values()) == {
        Topic.NLU_RESULT,
        Topic.DM_RESULT,
        Topic.NLG_RESULT,
    }


def test_next_seq_unique_under_contention():
    bus = MessageBus()
    out = []
    lock = threading.Lock()

    def take():
        for _ in range(200):
            seq = bus.next_seq("s")
            with lock:
                out.append(seq)

    threads = [threading.Thread(target=take) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(out) == len(set(out)) == 1600
