"""Dialog engine: main loop, belief update, tree transformation, error handling.

One engine instance serves one configuration; per-session state lives in
DialogState. The turn cycle: update grounding from the frame, resolve pending
confirmations, push a matching domain subtree, run the error channels, then
pop-and-execute stack tops until an act hands the floor back to the user.
While a remote agent session is active the whole turn is relayed instead.
"""

from __future__ import annotations

import logging
from typing import Callable, Mapping, Optional

from ..acts import FLOOR_YIELDING, Act, DialogAct, SystemAction
from ..nlu import SemanticFrame
from ..ontology import DEFAULT_KEY, Grounding, Ontology, Pool
from ..protocol.client import AgentConnector
from ..protocol.knowledge import KnowledgeConstraint
from ..protocol.messages import (
    AgentRefused,
    InitialState,
    ProtocolError,
    SessionUnknown,
    SlotValue,
    Unreachable,
    encode_report,
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
from .tree import ActionSpec, NodeKind, TaskNode, TaskTree, validate_tree

log = logging.getLogger(__name__)

# Confirmation strategy by update confidence.
EXPLICIT_BELOW = 0.4
AUTO_GROUND_AT = 0.8

# Minimum frame probability for a domain to become a push candidate.
TRIGGER_THRESHOLD = 0.2

# Hard per-turn step budget; converts malformed trees into diagnosable errors.
STEP_BUDGET = 256

AFFIRM_INTENT = "Affirm"
DENY_INTENT = "Deny"
INTENT_MIN = 0.5

DEFAULT_INSTRUCT = (
    "Here is what I can do: check the weather for a city, or hand you to a "
    "restaurant guide. Try: what is the weather in Pittsburgh tomorrow."
)


class EngineError(Exception):
    pass


class SessionEnded(EngineError):
    pass


class EmptyStack(EngineError):
    pass


class TurnBudgetExceeded(EngineError):
    pass


class RemoteAgentFailure(EngineError):
    """Remote call failed; handled internally as a non-understanding turn."""


class DeterministicPolicy:
    """Shipped stand-in for a learned choice policy.

    Scores candidates by frame domain confidence; ties break by earliest
    registration, then node id. The interface (choose) is the extension point
    for a learned policy.
    """

    def choose(
        self,
        state: DialogState,
        candidates: list[tuple[int, str, TaskNode, float]],
    ) -> TaskNode:
        ranked = sorted(candidates, key=lambda c: (-c[3], c[0], c[2].id))
        return ranked[0][2]


class DialogEngine:
    def __init__(
        self,
        tree: TaskTree,
        ontology: Ontology,
        *,
        connector: Optional[AgentConnector] = None,
        knowledge_agents: Optional[Mapping[str, object]] = None,
        chat_responder: Optional[Callable[[str], Optional[tuple[str, float]]]] = None,
        resolvers: Optional[Mapping[str, Callable[[str], str]]] = None,
        remote_endpoints: Optional[Mapping[str, str]] = None,
        policy: Optional[DeterministicPolicy] = None,
        agent_name: Optional[str] = None,
    ):
        validate_tree(tree.root)
        self.tree = tree
        self.ontology = ontology
        self.connector = connector or AgentConnector()
        self.knowledge_agents = dict(knowledge_agents or {})
        self.chat_responder = chat_responder
        self.resolvers = dict(resolvers or {})
        self.policy = policy or DeterministicPolicy()
        self.agent_name = agent_name or tree.agent_name
        self.instruct_text = tree.instruct_text or DEFAULT_INSTRUCT

        endpoints = dict(remote_endpoints or {})
        self.remote_endpoints: dict[str, str] = {}
        self.registry: list[tuple[str, TaskNode]] = list(tree.domain_subtrees)
        for concept in ontology.pool(Pool.REMOTE):
            endpoint = endpoints.get(concept.name, concept.endpoint)
            if not endpoint:
                continue
            self.remote_endpoints[concept.name] = endpoint
            node = TaskNode(
                id=concept.name,
                kind=NodeKind.AGENT,
                termination_name="remote_ended",
                action=ActionSpec("call_remote", {"concept": concept.name}),
            )
            for domain in concept.domains:
                node.trigger_domain = node.trigger_domain or domain
                self.registry.append((domain, node))

    # ------------------------------------------------------------------ setup

    def start_session(self, session_id: str) -> tuple[DialogState, SystemAction]:
        """Fresh state with the root pushed; returns the greeting action."""
        state = DialogState(
            session_id=session_id,
            ontology=self.ontology.fresh(),
            stack=[StackFrame(self.tree.root)],
        )
        self._drain_stack(state)
        action = self._collect_action(state)
        state.history.append(
            TurnRecord(turn=0, user_text=None, acts=action.serializable(), agent=self.agent_name)
        )
        return state, action

    # ------------------------------------------------------------- turn cycle

    def run_turn(self, state: DialogState, frame: SemanticFrame) -> tuple[DialogState, SystemAction]:
        if state.ended:
            raise SessionEnded(state.session_id)
        state.pending_actions = []

        if state.active_remote is not None:
            state.turn_count += 1
            state.last_frame = frame
            action, _ended = self.relay_to_remote(state, frame.utterance)
            self._record_turn(state, frame.utterance, action, touched=[])
            return state, action

        touched = self.belief_update(state, frame)
        consumed = self._resolve_explicit_confirm(state, frame)
        consumed = self._retract_implicit(state, frame) or consumed
        transform = self.tree_transformation(state, frame)
        state.turn_consumed = consumed
        floor_taken = self.error_handle(state)
        if not floor_taken:
            self._drain_stack(state)
        action = self._collect_action(state)
        self._record_turn(state, frame.utterance, action, touched)
        return state, action

    def belief_update(self, state: DialogState, frame: SemanticFrame) -> list[tuple[str, str]]:
        """Advance the turn count and write the frame into the ontology."""
        state.turn_count += 1
        state.last_frame = frame
        touched = state.ontology.apply_frame(frame, state.turn_count)
        if touched:
            touched_names = {name for name, _ in touched}
            for informed in list(state.informed):
                if informed not in state.ontology:
                    continue
                deps = {d for d, _ in state.ontology.transitive_dependencies(informed)}
                # New input for an informed concept re-opens it for delivery.
                if informed in touched_names or deps & touched_names:
                    state.informed.discard(informed)
        state.turn_touched = touched
        return touched

    def tree_transformation(self, state: DialogState, frame: SemanticFrame) -> TransformOutcome:
        """Push the best-matching domain subtree not already on the stack."""
        candidates = []
        for reg_index, (domain, node) in enumerate(self.registry):
            confidence = frame.domains.get(domain, 0.0)
            if confidence >= TRIGGER_THRESHOLD and not state.on_stack(node.id):
                candidates.append((reg_index, domain, node, confidence))
        if not candidates:
            state.turn_transform = NO_CANDIDATE
            return NO_CANDIDATE
        chosen = self.policy.choose(state, candidates)
        state.stack.append(StackFrame(chosen))
        outcome = TransformOutcome(TransformKind.PUSHED, node_id=chosen.id)
        state.turn_transform = outcome
        return outcome

    def error_handle(self, state: DialogState) -> bool:
        """Both error channels; returns True when recovery took the floor.

        Misunderstanding: every user-pool entry still Updated gets grounded
        (confidence >= 0.8), or a confirm subtask pushed (implicit for
        [0.4, 0.8), explicit below 0.4). Non-understanding fires only when the
        turn touched nothing, pushed nothing, and no pending confirmation
        consumed the input: chatbot first, then the REPHRASE/INSTRUCT ladder.
        """
        for concept_name, key in state.ontology.ungrounded_updated():
            entry = state.ontology.get(concept_name).attributes[key]
            if entry.confidence >= AUTO_GROUND_AT:
                entry.grounding = Grounding.GROUNDED

        to_confirm = [
            (name, key)
            for name, key in state.ontology.ungrounded_updated()
            if state.ontology.get(name).attributes[key].turn_updated == state.turn_count
        ]
        for name, key in reversed(to_confirm):
            entry = state.ontology.get(name).attributes[key]
            style = "implicit" if entry.confidence >= EXPLICIT_BELOW else "explicit"
            state.stack.append(StackFrame(_confirm_node(name, key, style)))

        understood = (
            bool(state.turn_touched)
            or (state.turn_transform is not None and state.turn_transform.pushed)
            or state.turn_consumed
        )
        if understood:
            state.nonunderstanding_streak = 0
            return False
        utterance = state.last_frame.utterance if state.last_frame else ""
        return self._non_understanding(state, utterance)

    def execute_top(self, state: DialogState) -> StepOutcome:
        """One step of the inner loop; termination cascade checked first."""
        if not state.stack:
            raise EmptyStack(state.session_id)
        for index, frame in enumerate(state.stack):
            if frame.node.termination(state, frame):
                popped = state.stack[index:]
                del state.stack[index:]
                for fr in reversed(popped):
                    self._on_pop(state, fr)
                return StepOutcome(
                    StepKind.POPPED, node_id=popped[0].node.id, popped=len(popped)
                )
        frame = state.stack[-1]
        node = frame.node
        if node.kind is NodeKind.AGENCY:
            if frame.next_child < len(node.children):
                child = node.children[frame.next_child]
                frame.next_child += 1
                state.stack.append(StackFrame(child))
                return StepOutcome(StepKind.SUBTASK_PUSHED, node.id, pushed=child.id)
            state.stack.pop()
            self._on_pop(state, frame)
            return StepOutcome(StepKind.POPPED, node.id, popped=1)
        if node.kind is NodeKind.CHOICE:
            candidates = [
                (i, child.trigger_domain or "", child, self._frame_confidence(state, child))
                for i, child in enumerate(node.children)
            ]
            child = self.policy.choose(state, candidates)
            state.stack.append(StackFrame(child))
            return StepOutcome(StepKind.SUBTASK_PUSHED, node.id, pushed=child.id)
        return self._execute_agent(state, frame)

    def relay_to_remote(self, state: DialogState, utterance: str) -> tuple[SystemAction, bool]:
        """Forward one user turn to the active remote agent."""
        session = state.active_remote
        if session is None:
            raise EngineError("relay_to_remote without an active remote")
        try:
            reply, ended, report = self.connector.next(session, utterance)
        except (Unreachable, ProtocolError, SessionUnknown) as exc:
            log.warning("remote agent %s failed: %s", session.agent_name, exc)
            session.ended = True
            state.active_remote = None
            # Remove the dead frame now; leaving it for the termination sweep
            # would take anything pushed above it down too next turn.
            state.stack = [
                f for f in state.stack if f.data.get("remote_session") is not session
            ]
            state.last_failure = RemoteAgentFailure(str(exc))
            self._non_understanding(state, utterance)
            return self._collect_action(state), False

        state.emit(Act(DialogAct.RELAY, reply))
        if ended:
            state.active_remote = None
            if report is not None:
                encoded = encode_report(report)
                state.reports.append(encoded)
                state.fresh_report = encoded
            self._drain_stack(state)
        return self._collect_action(state), ended

    # -------------------------------------------------------------- internals

    def _collect_action(self, state: DialogState) -> SystemAction:
        action = SystemAction(list(state.pending_actions))
        state.pending_actions = []
        return action

    def _record_turn(
        self, state: DialogState, user_text: str, action: SystemAction, touched
    ) -> None:
        state.history.append(
            TurnRecord(
                turn=state.turn_count,
                user_text=user_text,
                acts=action.serializable(),
                agent=self.active_agent_name(state),
                touched=list(touched),
                report=state.fresh_report,
            )
        )
        state.fresh_report = None

    def active_agent_name(self, state: DialogState) -> str:
        if state.active_remote is not None:
            return state.active_remote.agent_name
        return self.agent_name

    def _drain_stack(self, state: DialogState) -> None:
        steps = 0
        while state.stack:
            steps += 1
            if steps > STEP_BUDGET:
                raise TurnBudgetExceeded(
                    f"session {state.session_id}: {STEP_BUDGET} steps exceeded at "
                    f"node {state.stack[-1].node.id!r}"
                )
            outcome = self.execute_top(state)
            if outcome.kind is StepKind.AWAIT_USER:
                break
            if any(act.act in FLOOR_YIELDING for act in outcome.acts):
                break

    def _frame_confidence(self, state: DialogState, node: TaskNode) -> float:
        frame = state.last_frame
        if frame is None or not node.trigger_domain:
            return 0.0
        return frame.domains.get(node.trigger_domain, 0.0)

    def _resolve_explicit_confirm(self, state: DialogState, frame: SemanticFrame) -> bool:
        """Interpret the user's answer to a pending explicit confirm, if any."""
        top = state.top()
        if top is None or "confirming" not in top.data:
            return False
        concept_name, key = top.data["confirming"]
        entry = state.ontology.get(concept_name).attributes.get(key)
        if entry is not None and entry.turn_updated == state.turn_count:
            # A new value supersedes the question; error_handle re-confirms it.
            state.stack.pop()
            return True
        if entry is None:
            state.stack.pop()
            return False
        if _has_intent(frame, AFFIRM_INTENT):
            entry.grounding = Grounding.GROUNDED
            state.stack.pop()
            return True
        if _has_intent(frame, DENY_INTENT):
            entry.grounding = Grounding.DISCONFIRMED
            state.stack.pop()
            return True
        return False

    def _retract_implicit(self, state: DialogState, frame: SemanticFrame) -> bool:
        """Retract last turn's implicit confirmations on a denial."""
        pending, state.implicit_pending = state.implicit_pending, []
        consumed = False
        for concept_name, key, value in pending:
            entry = state.ontology.get(concept_name).attributes.get(key)
            if entry is None or entry.value != value:
                continue  # superseded by a new value this turn
            if entry.grounding is Grounding.GROUNDED and _has_intent(frame, DENY_INTENT):
                entry.grounding = Grounding.DISCONFIRMED
                state.stack.append(StackFrame(_ask_node(concept_name)))
                consumed = True
        return consumed

    def _non_understanding(self, state: DialogState, utterance: str) -> bool:
        state.nonunderstanding_streak += 1
        if self.chat_responder is not None:
            answer = self.chat_responder(utterance)
            if answer is not None:
                response, _score = answer
                state.emit(Act(DialogAct.RELAY, response))
                state.nonunderstanding_streak = 0
                return True
        if state.nonunderstanding_streak >= 2:
            state.emit(Act(DialogAct.INSTRUCT, self.instruct_text))
        else:
            state.emit(Act(DialogAct.REPHRASE))
        return True

    def _on_pop(self, state: DialogState, frame: StackFrame) -> None:
        session = frame.data.get("remote_session")
        if session is not None and state.active_remote is session:
            # Popped from above (ancestor terminated); drop the binding.
            state.active_remote = None

    # --------------------------------------------------------- agent actions

    def _execute_agent(self, state: DialogState, frame: StackFrame) -> StepOutcome:
        node = frame.node
        action = node.action
        assert action is not None
        handler = getattr(self, f"_act_{action.type}")
        return handler(state, frame, action.params)

    def _act_emit(self, state: DialogState, frame: StackFrame, params: dict) -> StepOutcome:
        act = Act(DialogAct(params["act"]), params.get("value"))
        state.emit(act)
        state.stack.pop()
        return StepOutcome(StepKind.EMITTED, frame.node.id, acts=(act,))

    def _act_ask(self, state: DialogState, frame: StackFrame, params: dict) -> StepOutcome:
        concept = params["concept"]
        act = Act(DialogAct.ASK, concept)
        state.emit(act)
        frame.data["awaiting"] = True
        return StepOutcome(StepKind.AWAIT_USER, frame.node.id, acts=(act,))

    def _act_confirm(self, state: DialogState, frame: StackFrame, params: dict) -> StepOutcome:
        concept_name = params["concept"]
        key = params.get("key", DEFAULT_KEY)
        style = params.get("style", "explicit")
        entry = state.ontology.get(concept_name).attributes.get(key)
        if entry is None or entry.grounding is not Grounding.UPDATED:
            state.stack.pop()
            self._on_pop(state, frame)
            return StepOutcome(StepKind.POPPED, frame.node.id, popped=1)
        payload = {"concept": concept_name, "value": entry.value}
        if style == "implicit":
            act = Act(DialogAct.CONFIRM_IMPLICIT, payload)
            state.emit(act)
            entry.grounding = Grounding.GROUNDED
            state.implicit_pending.append((concept_name, key, entry.value))
            state.stack.pop()
            return StepOutcome(StepKind.EMITTED, frame.node.id, acts=(act,))
        act = Act(DialogAct.CONFIRM_EXPLICIT, payload)
        state.emit(act)
        frame.data["confirming"] = (concept_name, key)
        return StepOutcome(StepKind.AWAIT_USER, frame.node.id, acts=(act,))

    def _act_inform_from_knowledge(
        self, state: DialogState, frame: StackFrame, params: dict
    ) -> StepOutcome:
        concept = params["concept"]
        agent_name = params.get("agent", concept)
        agent = self.knowledge_agents.get(agent_name)
        if agent is None:
            raise EngineError(f"no knowledge agent registered as {agent_name!r}")
        constraint_map: dict[str, str] = params.get("constraints", {})

        missing = [
            source
            for source in constraint_map.values()
            if state.ontology.get(source).grounding() is not Grounding.GROUNDED
        ]
        if missing:
            state.stack.append(StackFrame(_ask_node(missing[0])))
            return StepOutcome(
                StepKind.SUBTASK_PUSHED, frame.node.id, pushed=f"ask::{missing[0]}"
            )

        constraints = []
        for fieldname, source in constraint_map.items():
            value = state.ontology.get(source).value() or ""
            resolver = self.resolvers.get(source)
            if resolver is not None:
                value = resolver(value)
            constraints.append(KnowledgeConstraint(fieldname, "eq", value))
        entities = agent.query(constraints)
        if entities:
            payload = {"kind": concept}
            payload.update({k: _fmt(v) for k, v in entities[0].items()})
            state.ontology.write(
                concept,
                value=str(entities[0].get("condition", payload.get("name", concept))),
                confidence=1.0,
                turn=state.turn_count,
                grounding=Grounding.GROUNDED,
            )
        else:
            payload = {"kind": "no_results", "concept": concept}
        act = Act(DialogAct.INFORM, payload)
        state.emit(act)
        state.informed.add(concept)
        state.stack.pop()
        return StepOutcome(StepKind.EMITTED, frame.node.id, acts=(act,))

    def _act_call_remote(self, state: DialogState, frame: StackFrame, params: dict) -> StepOutcome:
        concept = params["concept"]
        session = frame.data.get("remote_session")
        if session is not None:
            # Session over; the termination predicate will pop us next step.
            state.stack.pop()
            self._on_pop(state, frame)
            return StepOutcome(StepKind.POPPED, frame.node.id, popped=1)
        endpoint = self.remote_endpoints.get(concept)
        if endpoint is None:
            raise EngineError(f"no endpoint for remote concept {concept!r}")
        s0 = self._initial_state(state)
        try:
            session, first_reply = self.connector.new_call(
                endpoint, state.session_id, s0, agent_name=concept
            )
        except (Unreachable, ProtocolError, AgentRefused) as exc:
            log.warning("handoff to %s failed: %s", concept, exc)
            state.last_failure = RemoteAgentFailure(str(exc))
            state.stack.pop()
            self._on_pop(state, frame)
            self._non_understanding(state, state.last_frame.utterance if state.last_frame else "")
            return StepOutcome(StepKind.AWAIT_USER, frame.node.id)
        frame.data["remote_session"] = session
        state.active_remote = session
        acts = (Act(DialogAct.HANDOFF, session.agent_name), Act(DialogAct.RELAY, first_reply))
        for act in acts:
            state.emit(act)
        return StepOutcome(StepKind.AWAIT_USER, frame.node.id, acts=acts)

    def _initial_state(self, state: DialogState) -> InitialState:
        slots = {}
        for concept in state.ontology.pool(Pool.USER):
            entry = concept.attributes.get(DEFAULT_KEY)
            if entry is not None and entry.grounding is Grounding.GROUNDED:
                slots[concept.name] = SlotValue(str(entry.value), float(entry.confidence))
        return InitialState(user_id=state.session_id, known_slots=slots)


def _confirm_node(concept: str, key: str, style: str) -> TaskNode:
    return TaskNode(
        id=f"confirm::{concept}",
        kind=NodeKind.AGENT,
        termination_name="never",
        action=ActionSpec("confirm", {"concept": concept, "key": key, "style": style}),
    )


def _ask_node(concept: str) -> TaskNode:
    return TaskNode(
        id=f"ask::{concept}",
        kind=NodeKind.AGENT,
        termination_name=f"all_grounded({concept})",
        action=ActionSpec("ask", {"concept": concept}),
    )


def _has_intent(frame: SemanticFrame, label: str) -> bool:
    top = frame.top_intent()
    return top is not None and top[0] == label and top[1] >= INTENT_MIN


def _fmt(value) -> str:
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)
