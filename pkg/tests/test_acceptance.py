"""Shipped-configuration guarantees, one scenario or property per test."""

import math
import random
import re
import threading
import time
from collections import Counter
from pathlib import Path

import pytest

import test_engine_properties as engine_props
import parley
from parley.acts import Act, DialogAct, SystemAction
from parley.agents import broken_remote_agent, reference_remote_agent
from parley.chatbot import best_score, build_index, load_pairs, respond
from parley.cli import parse_script
from parley.config import PortalConfig, default_path
from parley.nlg import load_templates, render
from parley.nlu import load_lexicon, parse
from parley.ontology import Concept, CycleIntroduced, Ontology, Pool
from parley.portal import Busy, Portal
from parley.protocol.client import AgentConnector
from parley.protocol.conformance import run_conformance
from parley.protocol.server import AgentHost


def fresh_portal(**overrides):
    return Portal(PortalConfig.shipped(**overrides))


def test_scripted_walkthrough_handoff_and_report():
    script = default_path("scripts/weather_restaurant.script")
    steps = parse_script(script.read_text(encoding="utf-8"))
    portal = fresh_portal()
    created = portal.create_session()
    sid = created["session_id"]
    assert created["active_agent"] == "porter"

    for step in steps:
        turn = portal.post_utterance(sid, step.send)
        assert step.expect_contains in turn.reply, step.send
        assert turn.active_agent == step.expect_agent, step.send

    transcript = portal.get_transcript(sid)
    assert [t["agent"] for t in transcript] == [
        "porter",
        "porter",
        "porter",
        "bistro",
        "bistro",
        "porter",
    ]
    reports = [t["report"] for t in transcript if t["report"]]
    assert len(reports) == 1
    report = reports[0]
    assert report["outcome"] == "completed"
    relayed = [t["text"] for t in report["turns"] if t["speaker"] == "user"]
    assert relayed == ["thai food please", "cheap"]


def test_calibrated_frame_distributions():
    lexicon = load_lexicon(default_path("lexicon.txt"))
    frame = parse("Recommend a restaurant in Pittsburgh", lexicon)
    assert frame.top_domain()[0] == "Restaurant"
    assert frame.top_intent()[0] == "Request"
    assert frame.domains["Restaurant"] == pytest.approx(0.95, abs=0.01)
    assert frame.domains["Hotel"] == pytest.approx(0.05, abs=0.01)
    assert frame.intents["Request"] == pytest.approx(0.9, abs=0.01)
    assert frame.intents["Inform"] == pytest.approx(0.1, abs=0.01)
    location = frame.first_entity("Location")
    assert location is not None
    assert (location.value, location.confidence) == ("Pittsburgh", 1.0)


def test_confirm_then_ask_sentence_bytes():
    templates = load_templates(default_path("templates.txt"))
    action = SystemAction(
        acts=[
            Act(DialogAct.CONFIRM_IMPLICIT, {"kind": "location", "value": "Pittsburgh"}),
            Act(DialogAct.ASK, "food_type"),
        ]
    )
    out = render(action, templates)
    assert out == "I believe you said Pittsburgh. What kind of food do you want?"


def test_remote_agent_conformance_checks():
    connector = AgentConnector()
    connector.register_local("ref", AgentHost(reference_remote_agent()))
    connector.register_local("broken", AgentHost(broken_remote_agent()))

    good = {r.name: r.passed for r in run_conformance("local:ref", connector)}
    assert good == {
        "lifecycle": True,
        "report_on_end": True,
        "closed_session": True,
        "s0_skip": True,
    }

    bad = {r.name: r.passed for r in run_conformance("local:broken", connector)}
    assert bad == {
        "lifecycle": True,
        "report_on_end": False,
        "closed_session": True,
        "s0_skip": True,
    }


_WORD = re.compile(r"[a-z0-9]+")


def brute_best(prompts, query):
    """Dict-arithmetic idf cosine, independent of the numpy index."""
    docs = [_WORD.findall(p.lower()) for p in prompts]
    df = Counter()
    for doc in docs:
        df.update(set(doc))
    idf = {t: 1.0 + math.log(len(docs) / df[t]) for t in df}

    def unit(tokens):
        counts = Counter(t for t in tokens if t in idf)
        vec = {t: c * idf[t] for t, c in counts.items()}
        norm = math.sqrt(sum(x * x for x in vec.values()))
        return {t: x / norm for t, x in vec.items()} if norm else {}

    rows = [unit(doc) for doc in docs]
    query_vec = unit(_WORD.findall(query.lower()))
    scores = [
        sum(row.get(t, 0.0) * x for t, x in query_vec.items()) for row in rows
    ]
    best = max(range(len(docs)), key=lambda i: (scores[i], -i))
    return best, scores[best]


def test_chat_gate_matches_brute_force_cosine():
    pairs = load_pairs(*PortalConfig.shipped().pairs_paths)
    assert len(pairs) == 50
    index = build_index(pairs)
    prompts = [p.prompt for p in pairs]

    rng = random.Random(7)
    queries = list(prompts)
    for prompt in prompts:
        words = prompt.split()
        queries.append(" ".join(words[: max(1, len(words) - 1)]))
        queries.append(" ".join(rng.sample(words, len(words))))
    for _ in range(30):
        a, b = rng.sample(prompts, 2)
        queries.append(a.split()[0] + " " + " ".join(b.split()[1:]))
    queries += ["zq wv xk", "???", "the the the"]

    hits = 0
    for query in queries:
        want_row, want_score = brute_best(prompts, query)
        got_row, got_score = best_score(index, query)
        assert got_row == want_row, query
        assert got_score == pytest.approx(want_score, abs=1e-9)
        answer = respond(index, query)
        if want_score > 0.8:
            hits += 1
            assert answer is not None
            assert answer[0] == pairs[want_row].response
            assert answer[1] == pytest.approx(want_score, abs=1e-9)
        else:
            assert answer is None, query
    assert hits >= len(prompts)  # every verbatim prompt clears the gate
    assert hits < len(queries)  # and the gate does reject some


def test_engine_property_battery():
    started = time.monotonic()
    for seed in range(1000):
        spec = engine_props.Spec(random.Random(seed))
        got = engine_props.run_engine(spec)  # checks stack shape on every step
        want = engine_props.run_reference(spec)
        assert got == want, f"seed {seed} diverged"
    assert time.monotonic() - started < 60.0

    script = [
        "what is the weather",
        "Pittsburgh",
        "tomorrow",
        "recommend a restaurant",
        "thai food please",
        "cheap",
    ]

    def run_script():
        portal = fresh_portal()
        created = portal.create_session()
        sid = created["session_id"]
        replies = [(created["active_agent"], created["reply"])]
        for _ in range(10):  # budget: repeated flows never wedge a session
            for text in script:
                turn = portal.post_utterance(sid, text)
                replies.append((turn.active_agent, turn.reply))
        return repr(replies).encode("utf-8")

    assert run_script() == run_script()


def oracle_acyclic(edges):
    state = {name: 0 for name in edges}  # 0 white, 1 gray, 2 black
    for start in edges:
        if state[start]:
            continue
        stack = [(start, iter(edges[start]))]
        state[start] = 1
        while stack:
            node, children = stack[-1]
            child = next(children, None)
            if child is None:
                state[node] = 2
                stack.pop()
            elif state[child] == 1:
                return False
            elif state[child] == 0:
                state[child] = 1
                stack.append((child, iter(edges[child])))
    return True


def test_concept_graph_cycle_fuzz():
    rng = random.Random(99)
    onto = Ontology()
    onto.add_concept(Concept(name="c0", pool=Pool.USER))
    edges = {"c0": set()}
    attempts = 0
    cycle_attempts = 0

    def ancestors(name):
        # nodes transitively depending on `name`
        out, frontier = set(), {name}
        while frontier:
            nxt = {
                other
                for other, deps in edges.items()
                if deps & frontier and other not in out
            }
            out |= nxt
            frontier = nxt
        return out

    for step in range(700):
        attempts += 1
        if len(edges) < 40 and rng.random() < 0.5:
            name = f"c{len(edges)}"
            deps = rng.sample(sorted(edges), k=rng.randint(0, min(3, len(edges))))
            onto.add_concept(Concept(name=name, pool=Pool.USER, dependencies=tuple(deps)))
            edges[name] = set(deps)
        else:
            target = rng.choice(sorted(edges))
            blocked = ancestors(target) | {target}
            if rng.random() < 0.5 and blocked & set(edges):
                bad = rng.choice(sorted(blocked))
                cycle_attempts += 1
                with pytest.raises(CycleIntroduced):
                    onto.update_dependencies(target, sorted(edges[target] | {bad}))
            else:
                allowed = sorted(set(edges) - blocked)
                deps = rng.sample(allowed, k=rng.randint(0, min(3, len(allowed))))
                onto.update_dependencies(target, deps)
                edges[target] = set(deps)
        got = {name: set(onto.get(name).dependencies) for name in edges}
        assert got == edges  # rejected mutations rolled back
        assert oracle_acyclic(edges)
    assert attempts >= 500
    assert cycle_attempts >= 100


def test_portal_ordering_busy_and_isolation():
    portal = fresh_portal()

    # 100 sequential turns answered in request order
    sid = portal.create_session()["session_id"]
    sent = [f"blorp {i}" for i in range(100)]
    for text in sent:
        portal.post_utterance(sid, text)
    transcript = portal.get_transcript(sid)
    assert [t["turn"] for t in transcript] == list(range(101))
    assert [t["user_text"] for t in transcript][1:] == sent

    # second request during an in-flight turn is rejected, never queued
    busy_sid = portal.create_session()["session_id"]
    entered = threading.Event()
    release = threading.Event()
    original = portal.engine.run_turn

    def slow_run_turn(state, frame):
        entered.set()
        release.wait(timeout=5)
        return original(state, frame)

    portal.engine.run_turn = slow_run_turn
    outcome = {}

    def first():
        outcome["turn"] = portal.post_utterance(busy_sid, "weather in Berlin today")

    worker = threading.Thread(target=first)
    worker.start()
    assert entered.wait(timeout=5)
    with pytest.raises(Busy):
        portal.post_utterance(busy_sid, "too soon")
    release.set()
    worker.join(timeout=5)
    portal.engine.run_turn = original
    assert "The weather in Berlin" in outcome["turn"].reply
    texts = [t["user_text"] for t in portal.get_transcript(busy_sid)]
    assert "too soon" not in texts

    # 20 parallel sessions, disjoint and internally consistent transcripts
    transcripts = {}
    errors = []

    def converse(index):
        try:
            own = portal.create_session()["session_id"]
            texts = [f"voice {index} turn {t}" for t in range(5)]
            for text in texts:
                portal.post_utterance(own, text)
            transcripts[index] = (own, texts, portal.get_transcript(own))
        except Exception as exc:  # pragma: no cover - surfaced below
            errors.append((index, exc))

    threads = [threading.Thread(target=converse, args=(i,)) for i in range(20)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join(timeout=30)
    assert not errors
    assert len({sid for sid, _, _ in transcripts.values()}) == 20
    for index, (own, texts, transcript) in transcripts.items():
        assert [t["user_text"] for t in transcript] == [None] + texts
        assert [t["turn"] for t in transcript] == list(range(6))


def test_primary_runs_without_secondary():
    package_root = Path(parley.__file__).parent
    for path in package_root.rglob("*.py"):
        assert "frontend" not in path.read_text(encoding="utf-8"), path
