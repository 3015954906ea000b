"""Rule and lexicon based language understanding.

Produces a semantic frame (domain/intent distributions plus entities) from a
single utterance. Deterministic by construction so a statistical model can
replace it behind the same interface.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

# Additive floor applied to every label named by the matched rules, so a
# single-keyword hit over a multi-label rule stays a soft distribution.
SMOOTHING_FLOOR = 0.05

_TOKEN_RE = re.compile(r"[A-Za-z0-9]+")


class NluError(Exception):
    pass


class ParseError(NluError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        suffix = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{suffix}")


class InvalidWeight(NluError):
    pass


@dataclass(frozen=True)
class Entity:
    entity_type: str
    value: str
    confidence: float
    span: tuple[int, int]


@dataclass
class SemanticFrame:
    utterance: str
    domains: dict[str, float] = field(default_factory=dict)
    intents: dict[str, float] = field(default_factory=dict)
    entities: list[Entity] = field(default_factory=list)

    def top_domain(self) -> Optional[tuple[str, float]]:
        return _argmax(self.domains)

    def top_intent(self) -> Optional[tuple[str, float]]:
        return _argmax(self.intents)

    def first_entity(self, entity_type: str) -> Optional[Entity]:
        return next((e for e in self.entities if e.entity_type == entity_type), None)


def _argmax(dist: dict[str, float]) -> Optional[tuple[str, float]]:
    if not dist:
        return None
    label = max(dist, key=lambda k: (dist[k], k))
    return label, dist[label]


@dataclass(frozen=True)
class Rule:
    axis: str  # "domain" or "intent"
    label: str
    weight: float


@dataclass
class Lexicon:
    """Keyword rules plus gazetteers and regex entity patterns."""

    rules: dict[str, tuple[Rule, ...]] = field(default_factory=dict)
    gazetteer: dict[str, tuple[tuple[str, ...], ...]] = field(default_factory=dict)
    patterns: tuple[tuple[str, re.Pattern], ...] = ()

    def domain_labels(self) -> set[str]:
        return {r.label for rs in self.rules.values() for r in rs if r.axis == "domain"}

    def intent_labels(self) -> set[str]:
        return {r.label for rs in self.rules.values() for r in rs if r.axis == "intent"}


def tokenize(utterance: str) -> list[tuple[str, int, int]]:
    """Lowercased alphanumeric tokens with character spans."""
    return [(m.group(0).lower(), m.start(), m.end()) for m in _TOKEN_RE.finditer(utterance)]


def parse(utterance: str, lexicon: Lexicon) -> SemanticFrame:
    """Parse one utterance into a semantic frame.

    Keyword hits add their weights per label; each axis that got at least one
    hit receives the smoothing floor on every label its matched rules name,
    then is normalized to sum to 1. Entities come from gazetteer longest-first
    n-gram matching and regex patterns; values keep the original casing via
    spans and default to confidence 1.0.
    """
    frame = SemanticFrame(utterance=utterance)
    tokens = tokenize(utterance)
    if not tokens:
        return frame

    domain_weights: dict[str, float] = {}
    intent_weights: dict[str, float] = {}
    for token, _, _ in tokens:
        for rule in lexicon.rules.get(token, ()):
            target = domain_weights if rule.axis == "domain" else intent_weights
            target[rule.label] = target.get(rule.label, 0.0) + rule.weight

    frame.domains = _smooth_and_normalize(domain_weights)
    frame.intents = _smooth_and_normalize(intent_weights)
    frame.entities = _extract_entities(utterance, tokens, lexicon)
    return frame


def _smooth_and_normalize(weights: dict[str, float]) -> dict[str, float]:
    if not weights:
        return {}
    floored = {label: w + SMOOTHING_FLOOR for label, w in weights.items()}
    total = sum(floored.values())
    return {label: w / total for label, w in floored.items()}


def _extract_entities(
    utterance: str, tokens: list[tuple[str, int, int]], lexicon: Lexicon
) -> list[Entity]:
    entities: list[Entity] = []
    consumed = [False] * len(tokens)

    # Gazetteer pass: longest value first, leftmost occurrence, tokens
    # consumed so overlapping shorter values cannot double-extract.
    candidates = [
        (len(value_tokens), etype, value_tokens)
        for etype, values in lexicon.gazetteer.items()
        for value_tokens in values
    ]
    candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
    for length, etype, value_tokens in candidates:
        for i in range(0, len(tokens) - length + 1):
            if any(consumed[i : i + length]):
                continue
            window = tuple(tok for tok, _, _ in tokens[i : i + length])
            if window != value_tokens:
                continue
            start = tokens[i][1]
            end = tokens[i + length - 1][2]
            entities.append(Entity(etype, utterance[start:end], 1.0, (start, end)))
            for j in range(i, i + length):
                consumed[j] = True

    spans = [(e.span) for e in entities]
    for etype, pattern in lexicon.patterns:
        for m in pattern.finditer(utterance):
            span = (m.start(), m.end())
            if any(not (span[1] <= s or span[0] >= e) for s, e in spans):
                continue
            entities.append(Entity(etype, m.group(0), 1.0, span))
            spans.append(span)

    entities.sort(key=lambda e: e.span)
    return entities


def load_lexicon(path: str | Path) -> Lexicon:
    """Load a lexicon file.

    Line forms (blank lines and `#` comments ignored):
      keyword -> domain:LABEL:WEIGHT | intent:LABEL:WEIGHT
      entity TYPE: value1, value2, ...
      pattern TYPE: REGEX
    """
    path = Path(path)
    if not path.exists():
        raise ParseError(f"lexicon file not found: {path}")
    rules: dict[str, list[Rule]] = {}
    gazetteer: dict[str, list[tuple[str, ...]]] = {}
    patterns: list[tuple[str, re.Pattern]] = []

    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("entity "):
                _parse_gazetteer_line(line, lineno, gazetteer)
            elif line.startswith("pattern "):
                _parse_pattern_line(line, lineno, patterns)
            elif "->" in line:
                _parse_rule_line(line, lineno, rules)
            else:
                raise ParseError(f"unrecognized lexicon line: {line!r}", lineno)

    return Lexicon(
        rules={k: tuple(v) for k, v in rules.items()},
        gazetteer={k: tuple(v) for k, v in gazetteer.items()},
        patterns=tuple(patterns),
    )


def _parse_rule_line(line: str, lineno: int, rules: dict[str, list[Rule]]) -> None:
    keyword, _, rhs = line.partition("->")
    keyword = keyword.strip().lower()
    if not keyword or not _TOKEN_RE.fullmatch(keyword):
        raise ParseError(f"rule keyword must be a single token: {keyword!r}", lineno)
    parsed: list[Rule] = []
    for part in rhs.split("|"):
        fields = [f.strip() for f in part.strip().split(":")]
        if len(fields) != 3 or fields[0] not in ("domain", "intent"):
            raise ParseError(f"bad rule clause: {part.strip()!r}", lineno)
        axis, label, weight_text = fields
        try:
            weight = float(weight_text)
        except ValueError:
            raise ParseError(f"bad weight: {weight_text!r}", lineno) from None
        if weight <= 0:
            raise InvalidWeight(f"line {lineno}: weight must be > 0, got {weight}")
        parsed.append(Rule(axis, label, weight))
    rules.setdefault(keyword, []).extend(parsed)


def _parse_gazetteer_line(
    line: str, lineno: int, gazetteer: dict[str, list[tuple[str, ...]]]
) -> None:
    header, _, values = line[len("entity ") :].partition(":")
    etype = header.strip()
    if not etype or not values.strip():
        raise ParseError("gazetteer line needs `entity TYPE: v1, v2`", lineno)
    bucket = gazetteer.setdefault(etype, [])
    for value in values.split(","):
        toks = tuple(t for t, _, _ in tokenize(value))
        if not toks:
            raise ParseError(f"empty gazetteer value in {line!r}", lineno)
        if toks not in bucket:
            bucket.append(toks)


def _parse_pattern_line(
    line: str, lineno: int, patterns: list[tuple[str, re.Pattern]]
) -> None:
    header, _, regex = line[len("pattern ") :].partition(":")
    etype = header.strip()
    regex = regex.strip()
    if not etype or not regex:
        raise ParseError("pattern line needs `pattern TYPE: REGEX`", lineno)
    try:
        patterns.append((etype, re.compile(regex, re.IGNORECASE)))
    except re.error as exc:
        raise ParseError(f"bad pattern regex: {exc}", lineno) from None
