"""Task tree: node kinds, termination predicates, and the tree file loader."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Optional, TYPE_CHECKING

import yaml

if TYPE_CHECKING:
    from .state import DialogState, StackFrame

TERMINATION_NAMES = ("all_grounded", "informed", "remote_ended", "always", "never")
ACTION_NAMES = ("emit", "ask", "inform_from_knowledge", "call_remote", "confirm")


class InvalidTree(Exception):
    pass


class NodeKind(Enum):
    AGENCY = "agency"
    CHOICE = "choice"
    AGENT = "agent"


@dataclass(frozen=True)
class ActionSpec:
    type: str
    params: dict = field(default_factory=dict)


@dataclass
class TaskNode:
    id: str
    kind: NodeKind
    children: tuple["TaskNode", ...] = ()
    termination: Callable[["DialogState", "StackFrame"], bool] = None  # type: ignore[assignment]
    termination_name: str = "never"
    action: Optional[ActionSpec] = None
    trigger_domain: Optional[str] = None

    def __post_init__(self) -> None:
        if self.termination is None:
            self.termination = make_termination(self.termination_name)

    def __repr__(self) -> str:  # keep stack dumps readable
        return f"TaskNode({self.id}, {self.kind.value})"


@dataclass
class TaskTree:
    root: TaskNode
    domain_subtrees: tuple[tuple[str, TaskNode], ...] = ()
    agent_name: str = "portal"
    instruct_text: str = ""


def make_termination(spec: str) -> Callable:
    """Build a predicate from registry syntax, e.g. `all_grounded(location)`."""
    spec = spec.strip()
    name, _, rest = spec.partition("(")
    name = name.strip()
    arg = rest[:-1].strip() if rest.endswith(")") else None
    if name not in TERMINATION_NAMES:
        raise InvalidTree(f"unknown termination predicate {spec!r}")
    if name in ("all_grounded", "informed") and not arg:
        raise InvalidTree(f"{name} needs a concept argument: {spec!r}")

    if name == "always":
        return lambda state, frame: True
    if name == "never":
        return lambda state, frame: False
    if name == "all_grounded":
        return lambda state, frame: state.ontology.all_grounded(arg)
    if name == "informed":
        return lambda state, frame: arg in state.informed
    # remote_ended: true once this frame's remote session has finished.
    return lambda state, frame: bool(
        frame.data.get("remote_session") is not None
        and frame.data["remote_session"].ended
    )


def validate_tree(root: TaskNode) -> None:
    """Check TaskNode invariants over everything reachable from `root`."""
    seen: set[int] = set()

    def visit(node: TaskNode, path: set[int]) -> None:
        if id(node) in path:
            raise InvalidTree(f"cycle through node {node.id!r}")
        if id(node) in seen:
            return  # shared subtree, already checked
        seen.add(id(node))
        if node.kind is NodeKind.AGENT:
            if node.children:
                raise InvalidTree(f"agent node {node.id!r} must not have children")
            if node.action is None:
                raise InvalidTree(f"agent node {node.id!r} needs an action")
            if node.action.type not in ACTION_NAMES:
                raise InvalidTree(
                    f"agent node {node.id!r} has unknown action {node.action.type!r}"
                )
        else:
            if not node.children:
                raise InvalidTree(f"{node.kind.value} node {node.id!r} needs children")
            if node.action is not None:
                raise InvalidTree(f"{node.kind.value} node {node.id!r} cannot act")
        for child in node.children:
            visit(child, path | {id(node)})

    visit(root, set())


def load_tree(path: str | Path) -> TaskTree:
    """Load a task tree definition file (YAML).

    Schema: `root` (node id), `nodes` (list of {id, kind, children,
    termination, action}), optional `domains` (trigger domain -> node id) and
    `meta` ({agent, instruct}).
    """
    path = Path(path)
    if not path.exists():
        raise InvalidTree(f"tree file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict) or "root" not in doc or "nodes" not in doc:
        raise InvalidTree(f"{path}: expected mapping with 'root' and 'nodes'")

    for raw in doc["nodes"]:
        if not isinstance(raw, dict) or "id" not in raw:
            raise InvalidTree(f"{path}: every node needs an 'id'")
    raw_nodes = {raw["id"]: raw for raw in doc["nodes"]}
    if len(raw_nodes) != len(doc["nodes"]):
        raise InvalidTree(f"{path}: duplicate node ids")
    built: dict[str, TaskNode] = {}

    def build(node_id: str, trail: tuple[str, ...]) -> TaskNode:
        if node_id in trail:
            raise InvalidTree(f"{path}: cycle through {node_id!r}")
        if node_id in built:
            return built[node_id]
        raw = raw_nodes.get(node_id)
        if raw is None:
            raise InvalidTree(f"{path}: unknown node id {node_id!r}")
        try:
            kind = NodeKind(raw.get("kind", "agent"))
        except ValueError:
            raise InvalidTree(f"{path}: unknown kind {raw.get('kind')!r}") from None
        action = None
        if "action" in raw:
            spec = dict(raw["action"])
            action_type = spec.pop("type", None)
            if action_type is None:
                raise InvalidTree(f"{path}: node {node_id!r} action needs 'type'")
            action = ActionSpec(type=action_type, params=spec)
        children = tuple(
            build(child, trail + (node_id,)) for child in raw.get("children", []) or []
        )
        node = TaskNode(
            id=node_id,
            kind=kind,
            children=children,
            termination_name=str(raw.get("termination", "never")),
            action=action,
        )
        built[node_id] = node
        return node

    root = build(doc["root"], ())
    domain_subtrees = []
    for domain, node_id in (doc.get("domains") or {}).items():
        subtree = build(node_id, ())
        subtree.trigger_domain = domain
        domain_subtrees.append((domain, subtree))

    meta = doc.get("meta") or {}
    tree = TaskTree(
        root=root,
        domain_subtrees=tuple(domain_subtrees),
        agent_name=str(meta.get("agent", "portal")),
        instruct_text=str(meta.get("instruct", "")),
    )
    validate_tree(root)
    for _, subtree in tree.domain_subtrees:
        validate_tree(subtree)
    return tree
