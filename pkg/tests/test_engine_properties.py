"""Inner-loop semantics checked against an independent reference interpreter.

The reference executes the same task trees recursively (the engine is an
explicit-stack loop), so agreement on the full event stream is meaningful
evidence and not a copy of the implementation.
"""

import random
import time

from parley.engine import (
    DialogEngine,
    DialogState,
    StackFrame,
    StepKind,
    TaskNode,
    TaskTree,
)
from parley.engine.tree import ActionSpec, NodeKind
from parley.ontology import Ontology

from conftest import Dialog

MAX_NODES = 15


# ------------------------------------------------------- random tree corpus


class Spec:
    """One generated tree: structure plus clock-threshold terminations.

    A node's predicate is either `never` or `clock >= k`, where the clock is
    the number of acts emitted so far in the drain.
    """

    def __init__(self, rng):
        self.counter = 0
        self.children: dict[str, list[str]] = {}
        self.kinds: dict[str, str] = {}
        self.thresholds: dict[str, int] = {}  # absent means never
        self.root = self._grow(rng, depth=0)

    def _new_id(self):
        self.counter += 1
        return f"n{self.counter}"

    def _grow(self, rng, depth):
        node_id = self._new_id()
        make_agency = depth == 0 or (
            self.counter < MAX_NODES - 3 and depth < 4 and rng.random() < 0.45
        )
        if make_agency:
            self.kinds[node_id] = "agency"
            kids = []
            for _ in range(rng.randint(1, 3)):
                if self.counter >= MAX_NODES:
                    break
                kids.append(self._grow(rng, depth + 1))
            if not kids:
                kids.append(self._grow(rng, depth + 1))
            self.children[node_id] = kids
        else:
            self.kinds[node_id] = "agent"
            self.children[node_id] = []
        if depth > 0 and rng.random() < 0.4:
            self.thresholds[node_id] = rng.randint(1, 6)
        return node_id

    def beta(self, node_id):
        k = self.thresholds.get(node_id)
        if k is None:
            return lambda clock: False
        return lambda clock: clock >= k


def build_engine_tree(spec):
    def build(node_id):
        k = spec.thresholds.get(node_id)
        if k is None:
            termination = lambda state, frame: False
        else:
            termination = lambda state, frame, k=k: len(state.pending_actions) >= k
        if spec.kinds[node_id] == "agent":
            return TaskNode(
                id=node_id,
                kind=NodeKind.AGENT,
                termination=termination,
                action=ActionSpec("emit", {"act": "HELLO"}),
            )
        return TaskNode(
            id=node_id,
            kind=NodeKind.AGENCY,
            children=tuple(build(c) for c in spec.children[node_id]),
            termination=termination,
        )

    return build(spec.root)


def run_engine(spec):
    root = build_engine_tree(spec)
    engine = DialogEngine(TaskTree(root=root), Ontology())
    state = DialogState(session_id="p", ontology=Ontology(), stack=[StackFrame(root)])
    events = []
    steps = 0
    while state.stack:
        steps += 1
        assert steps <= 4 * MAX_NODES * MAX_NODES, "engine failed to terminate"
        check_stack_is_tree_path(spec, state)
        outcome = engine.execute_top(state)
        if outcome.kind is StepKind.POPPED:
            events.append(("pop", outcome.node_id, outcome.popped))
        elif outcome.kind is StepKind.EMITTED:
            events.append(("emit", outcome.node_id))
        elif outcome.kind is StepKind.SUBTASK_PUSHED:
            events.append(("push", outcome.node_id, outcome.pushed))
        else:
            raise AssertionError(f"unexpected outcome {outcome}")
    return events, len(state.pending_actions)


def check_stack_is_tree_path(spec, state):
    for below, above in zip(state.stack, state.stack[1:]):
        kids = spec.children[below.node.id]
        assert above.node.id in kids
        # the open child is exactly the one the cursor just passed
        assert kids[below.next_child - 1] == above.node.id


# ------------------------------------------------------ reference interpreter


class ExitTo(Exception):
    def __init__(self, depth):
        self.depth = depth


def run_reference(spec):
    events = []
    clock = 0
    open_nodes = [spec.root]

    def scan():
        for depth, node_id in enumerate(open_nodes):
            if spec.beta(node_id)(clock):
                count = len(open_nodes) - depth
                events.append(("pop", node_id, count))
                del open_nodes[depth:]
                raise ExitTo(depth)

    def run_node(node_id, depth):
        nonlocal clock
        cursor = 0
        while True:
            scan()
            if spec.kinds[node_id] == "agent":
                events.append(("emit", node_id))
                clock += 1
                open_nodes.pop()
                return
            kids = spec.children[node_id]
            if cursor >= len(kids):
                events.append(("pop", node_id, 1))
                open_nodes.pop()
                return
            child = kids[cursor]
            cursor += 1
            events.append(("push", node_id, child))
            open_nodes.append(child)
            try:
                run_node(child, depth + 1)
            except ExitTo as exc:
                if exc.depth <= depth:
                    raise  # this node was swept too
                # only descendants were popped; keep going

    try:
        run_node(spec.root, 0)
    except ExitTo as exc:
        assert exc.depth == 0
    return events, clock


# -------------------------------------------------------------------- tests


def test_engine_matches_reference_on_thousand_trees():
    started = time.monotonic()
    emitted_totals = 0
    for seed in range(1000):
        spec = Spec(random.Random(seed))
        got_events, got_clock = run_engine(spec)
        want_events, want_clock = run_reference(spec)
        assert got_events == want_events, f"seed {seed} diverged"
        assert got_clock == want_clock
        emitted_totals += got_clock
    assert emitted_totals > 0
    assert time.monotonic() - started < 60.0


def test_event_stream_shape_invariants():
    for seed in range(200):
        spec = Spec(random.Random(10_000 + seed))
        events, clock = run_engine(spec)
        emits = [e for e in events if e[0] == "emit"]
        pops = [e for e in events if e[0] == "pop"]
        pushes = [e for e in events if e[0] == "push"]
        assert len(emits) == clock
        # every emit comes from an agent, every push from an agency
        assert all(spec.kinds[e[1]] == "agent" for e in emits)
        assert all(spec.kinds[e[1]] == "agency" for e in pushes)
        assert all(count >= 1 for _, _, count in pops)
        # everything pushed is eventually accounted for: the run ends empty,
        # so pops (weighted) cover root plus all pushes minus self-popping emits
        assert sum(count for _, _, count in pops) + len(emits) == 1 + len(pushes)


def test_cascade_pop_counts_match_open_depth():
    # A pop of n frames can only happen with at least n frames open; replaying
    # the stream against a counter validates the bookkeeping end to end.
    for seed in range(200):
        spec = Spec(random.Random(50_000 + seed))
        events, _ = run_engine(spec)
        depth = 1  # root is open
        for event in events:
            if event[0] == "push":
                depth += 1
            elif event[0] == "emit":
                depth -= 1
            else:
                assert event[2] <= depth
                depth -= event[2]
            assert depth >= 0
        assert depth == 0


def test_shipped_config_is_deterministic(shipped_lexicon):
    script = [
        "hello there",
        "what is the weather in Pittsburgh tomorrow",
        "recommend a restaurant",
        "thai",
        "cheap",
        "blorp",
    ]

    def run():
        d = Dialog(shipped_lexicon)
        return [d.say(text).serializable() for text in script]

    assert run() == run()


def test_shipped_flows_stay_within_budget(shipped_lexicon):
    # A long mixed session never trips the step budget or leaks stack frames.
    d = Dialog(shipped_lexicon)
    for _ in range(10):
        d.say("what is the weather in Berlin today")
        d.say("blorp")
        d.say("recommend a restaurant")
        d.say("never mind")
    assert len(d.state.stack) <= 4
