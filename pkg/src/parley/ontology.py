"""Domain knowledge ontology: concepts, dependencies, and grounding state.

Concepts live in three pools (agent, user, remote), form a dependency DAG,
and subscribe to semantic-frame labels. Attribute entries move through the
grounding lifecycle Empty -> Updated -> Grounded / Disconfirmed.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import yaml

DEFAULT_KEY = "value"

# Domain/intent subscriptions fire only on a confident argmax label.
LABEL_MATCH_THRESHOLD = 0.5


class OntologyError(Exception):
    """Base class for ontology failures."""


class DuplicateName(OntologyError):
    pass


class UnknownDependency(OntologyError):
    pass


class UnknownConcept(OntologyError):
    pass


class CycleIntroduced(OntologyError):
    pass


class Pool(str, Enum):
    AGENT = "agent"
    USER = "user"
    REMOTE = "remote"


class Grounding(str, Enum):
    EMPTY = "empty"
    UPDATED = "updated"
    GROUNDED = "grounded"
    DISCONFIRMED = "disconfirmed"


@dataclass
class AttributeEntry:
    value: str
    confidence: float
    grounding: Grounding
    turn_updated: int


@dataclass(frozen=True)
class Subscription:
    """What a concept listens for. Unset components are wildcards.

    All set components must match: domain/intent against the frame's argmax
    label (confidence >= LABEL_MATCH_THRESHOLD), entity against any extracted
    entity's type. Matched values land in attribute `key`.
    """

    domain: Optional[str] = None
    intent: Optional[str] = None
    entity: Optional[str] = None
    key: str = DEFAULT_KEY


@dataclass
class Concept:
    name: str
    pool: Pool
    dependencies: tuple[str, ...] = ()
    subscriptions: tuple[Subscription, ...] = ()
    attributes: dict[str, AttributeEntry] = field(default_factory=dict)
    endpoint: Optional[str] = None
    domains: tuple[str, ...] = ()

    def grounding(self, key: str = DEFAULT_KEY) -> Grounding:
        entry = self.attributes.get(key)
        return entry.grounding if entry is not None else Grounding.EMPTY

    def value(self, key: str = DEFAULT_KEY) -> Optional[str]:
        entry = self.attributes.get(key)
        return entry.value if entry is not None else None


class Ontology:
    """Concept registry plus per-session attribute state.

    The concept graph (names, pools, dependencies, subscriptions) is fixed at
    load time; attribute maps mutate per dialog session. Use fresh() to get an
    independent state copy for a new session.
    """

    def __init__(self) -> None:
        self.concepts: dict[str, Concept] = {}

    def __contains__(self, name: str) -> bool:
        return name in self.concepts

    def get(self, name: str) -> Concept:
        try:
            return self.concepts[name]
        except KeyError:
            raise UnknownConcept(name) from None

    @property
    def pools(self) -> dict[Pool, set[str]]:
        mapping: dict[Pool, set[str]] = {pool: set() for pool in Pool}
        for concept in self.concepts.values():
            mapping[concept.pool].add(concept.name)
        return mapping

    def pool(self, pool: Pool) -> list[Concept]:
        return [c for c in self.concepts.values() if c.pool is pool]

    def add_concept(self, concept: Concept) -> None:
        """Register a concept; rejects duplicates, dangling deps, and cycles."""
        if concept.name in self.concepts:
            raise DuplicateName(concept.name)
        for dep in concept.dependencies:
            # A self-reference is reported as a cycle, not a missing name.
            if dep not in self.concepts and dep != concept.name:
                raise UnknownDependency(f"{concept.name} -> {dep}")
        self.concepts[concept.name] = concept
        try:
            self._check_acyclic()
        except CycleIntroduced:
            del self.concepts[concept.name]
            raise

    def update_dependencies(self, name: str, dependencies: Sequence[str]) -> None:
        """Replace a concept's dependency list, preserving the DAG property."""
        concept = self.get(name)
        for dep in dependencies:
            if dep not in self.concepts:
                raise UnknownDependency(f"{name} -> {dep}")
        previous = concept.dependencies
        concept.dependencies = tuple(dependencies)
        try:
            self._check_acyclic()
        except CycleIntroduced:
            concept.dependencies = previous
            raise

    def _check_acyclic(self) -> None:
        # Iterative DFS, three-color marking.
        WHITE, GREY, BLACK = 0, 1, 2
        color = {name: WHITE for name in self.concepts}
        for start in self.concepts:
            if color[start] != WHITE:
                continue
            stack: list[tuple[str, Iterable[str]]] = [
                (start, iter(self.concepts[start].dependencies))
            ]
            color[start] = GREY
            while stack:
                name, deps = stack[-1]
                advanced = False
                for dep in deps:
                    if dep not in self.concepts:
                        continue
                    if color[dep] == GREY:
                        raise CycleIntroduced(f"cycle through {dep}")
                    if color[dep] == WHITE:
                        color[dep] = GREY
                        stack.append((dep, iter(self.concepts[dep].dependencies)))
                        advanced = True
                        break
                if not advanced:
                    color[name] = BLACK
                    stack.pop()

    def transitive_dependencies(self, name: str) -> list[tuple[str, int]]:
        """All dependencies reachable from `name` with their minimum depth."""
        self.get(name)
        depth: dict[str, int] = {}
        frontier = [(name, 0)]
        while frontier:
            current, d = frontier.pop(0)
            for dep in self.concepts[current].dependencies:
                if dep not in self.concepts:
                    continue
                if dep not in depth or d + 1 < depth[dep]:
                    depth[dep] = d + 1
                    frontier.append((dep, d + 1))
        return sorted(depth.items(), key=lambda item: (item[1], item[0]))

    def unmet_dependencies(self, name: str) -> list[str]:
        """Transitive deps of `name` not yet Grounded, by (depth, name) order."""
        return [
            dep
            for dep, _ in self.transitive_dependencies(name)
            if self.concepts[dep].grounding() is not Grounding.GROUNDED
        ]

    def all_grounded(self, name: str) -> bool:
        concept = self.get(name)
        if concept.grounding() is not Grounding.GROUNDED:
            return False
        return not self.unmet_dependencies(name)

    def apply_frame(self, frame, turn: int) -> list[tuple[str, str]]:
        """Write a semantic frame into subscribed concepts.

        Returns the (concept, key) pairs touched, in concept registration
        order. Re-stating the value of a Grounded entry is a no-op; a changed
        value re-opens grounding (back to Updated).
        """
        touched: list[tuple[str, str]] = []
        seen: set[tuple[str, str]] = set()
        for concept in self.concepts.values():
            for sub in concept.subscriptions:
                matched = _match_subscription(sub, frame)
                if matched is None:
                    continue
                value, confidence = matched
                pair = (concept.name, sub.key)
                if pair in seen:
                    continue
                entry = concept.attributes.get(sub.key)
                if (
                    entry is not None
                    and entry.grounding is Grounding.GROUNDED
                    and entry.value == value
                ):
                    continue
                concept.attributes[sub.key] = AttributeEntry(
                    value=value,
                    confidence=confidence,
                    grounding=Grounding.UPDATED,
                    turn_updated=turn,
                )
                seen.add(pair)
                touched.append(pair)
        return touched

    def ungrounded_updated(self) -> list[tuple[str, str]]:
        """User-pool entries still in Updated state, by (turn, concept, key)."""
        pending = []
        for concept in self.concepts.values():
            if concept.pool is not Pool.USER:
                continue
            for key, entry in concept.attributes.items():
                if entry.grounding is Grounding.UPDATED:
                    pending.append((entry.turn_updated, concept.name, key))
        pending.sort()
        return [(name, key) for _, name, key in pending]

    def set_grounding(self, name: str, grounding: Grounding, key: str = DEFAULT_KEY) -> None:
        concept = self.get(name)
        entry = concept.attributes.get(key)
        if entry is None:
            raise UnknownConcept(f"{name} has no attribute {key!r}")
        entry.grounding = grounding

    def write(
        self,
        name: str,
        value: str,
        confidence: float,
        turn: int,
        grounding: Grounding = Grounding.UPDATED,
        key: str = DEFAULT_KEY,
    ) -> None:
        concept = self.get(name)
        concept.attributes[key] = AttributeEntry(value, confidence, grounding, turn)

    def fresh(self) -> "Ontology":
        """Independent copy with empty per-session attribute state."""
        clone = Ontology()
        for concept in self.concepts.values():
            clone.concepts[concept.name] = Concept(
                name=concept.name,
                pool=concept.pool,
                dependencies=concept.dependencies,
                subscriptions=concept.subscriptions,
                attributes={},
                endpoint=concept.endpoint,
                domains=concept.domains,
            )
        return clone

    def snapshot(self) -> dict[str, dict[str, AttributeEntry]]:
        return {
            name: copy.deepcopy(concept.attributes)
            for name, concept in self.concepts.items()
            if concept.attributes
        }


def _match_subscription(sub: Subscription, frame) -> Optional[tuple[str, float]]:
    """Value and confidence a subscription extracts from a frame, if any."""
    value: Optional[str] = None
    confidence = 1.0
    if sub.domain is not None:
        top = _argmax(frame.domains)
        if top is None or top[0] != sub.domain or top[1] < LABEL_MATCH_THRESHOLD:
            return None
        value, confidence = top
    if sub.intent is not None:
        top = _argmax(frame.intents)
        if top is None or top[0] != sub.intent or top[1] < LABEL_MATCH_THRESHOLD:
            return None
        if value is None:
            value, confidence = top
    if sub.entity is not None:
        hit = next((e for e in frame.entities if e.entity_type == sub.entity), None)
        if hit is None:
            return None
        # Entity value takes precedence over label values.
        value, confidence = hit.value, hit.confidence
    if value is None:
        return None
    return value, confidence


def _argmax(dist: Mapping[str, float]) -> Optional[tuple[str, float]]:
    if not dist:
        return None
    label = max(dist, key=lambda k: (dist[k], k))
    return label, dist[label]


def load_ontology(path: str | Path) -> Ontology:
    """Load a concept definition file (YAML).

    Schema: top-level `concepts` list; each item has `name`, `pool`, and
    optional `deps`, `subs`, `endpoint`, `domains`. Subscription items are
    maps with any of `domain`, `intent`, `entity`, `key`.
    """
    path = Path(path)
    if not path.exists():
        raise OntologyError(f"ontology file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict) or not isinstance(doc.get("concepts"), list):
        raise OntologyError(f"{path}: expected a mapping with a 'concepts' list")

    ontology = Ontology()
    entries = doc["concepts"]
    # Two passes so file order does not have to be topological.
    for raw in entries:
        _require_fields(raw, path)
    names = [raw["name"] for raw in entries]
    if len(names) != len(set(names)):
        dupe = next(n for n in names if names.count(n) > 1)
        raise DuplicateName(f"{path}: {dupe}")
    known = set(names)
    for raw in _topological(entries, known, path):
        subs = tuple(
            Subscription(
                domain=s.get("domain"),
                intent=s.get("intent"),
                entity=s.get("entity"),
                key=s.get("key", DEFAULT_KEY),
            )
            for s in raw.get("subs", []) or []
        )
        ontology.add_concept(
            Concept(
                name=raw["name"],
                pool=Pool(raw["pool"]),
                dependencies=tuple(raw.get("deps", []) or []),
                subscriptions=subs,
                endpoint=raw.get("endpoint"),
                domains=tuple(raw.get("domains", []) or []),
            )
        )
    # Registration had to be topological; expose concepts in file order.
    ontology.concepts = {name: ontology.concepts[name] for name in names}
    return ontology


def _require_fields(raw: object, path: Path) -> None:
    if not isinstance(raw, dict) or "name" not in raw or "pool" not in raw:
        raise OntologyError(f"{path}: concept entries need 'name' and 'pool'")
    try:
        Pool(raw["pool"])
    except ValueError:
        raise OntologyError(f"{path}: unknown pool {raw['pool']!r}") from None


def _topological(entries: Sequence[dict], known: set[str], path: Path) -> list[dict]:
    by_name = {raw["name"]: raw for raw in entries}
    for raw in entries:
        for dep in raw.get("deps", []) or []:
            if dep not in known:
                raise UnknownDependency(f"{path}: {raw['name']} -> {dep}")
    ordered: list[dict] = []
    done: set[str] = set()
    visiting: set[str] = set()

    def visit(name: str) -> None:
        if name in done:
            return
        if name in visiting:
            raise CycleIntroduced(f"{path}: cycle through {name}")
        visiting.add(name)
        for dep in by_name[name].get("deps", []) or []:
            visit(dep)
        visiting.discard(name)
        done.add(name)
        ordered.append(by_name[name])

    for raw in entries:
        visit(raw["name"])
    return ordered
