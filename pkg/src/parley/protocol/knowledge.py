"""Knowledge remote agent contract: conjunctive constraints over entities."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Protocol, Sequence

OPS = ("eq", "contains", "le", "ge")


class KnowledgeError(Exception):
    pass


class UnknownField(KnowledgeError):
    pass


class UnknownOp(KnowledgeError):
    pass


@dataclass(frozen=True)
class KnowledgeConstraint:
    field: str
    op: str
    value: Any

    def __post_init__(self) -> None:
        if self.op not in OPS:
            raise UnknownOp(f"unknown constraint op {self.op!r}")


KnowledgeEntity = dict


class KnowledgeAgent(Protocol):
    schema: tuple[str, ...]

    def query(self, constraints: Sequence[KnowledgeConstraint]) -> list[KnowledgeEntity]:
        ...


def knowledge_query(
    agent: KnowledgeAgent, constraints: Sequence[KnowledgeConstraint]
) -> list[KnowledgeEntity]:
    """All and only entities satisfying every constraint, deterministic order."""
    return agent.query(constraints)


class TableKnowledgeAgent:
    """In-memory table behind the knowledge agent contract.

    `sort_key` defines the deterministic result order; string comparisons are
    case-insensitive throughout.
    """

    def __init__(self, schema: Sequence[str], rows: Sequence[dict], sort_key=None):
        self.schema = tuple(schema)
        for row in rows:
            missing = [f for f in self.schema if f not in row]
            if missing:
                raise KnowledgeError(f"row missing fields {missing}: {row}")
        key = sort_key or (lambda row: tuple(_fold(row[f]) for f in self.schema))
        self._rows = sorted((dict(row) for row in rows), key=key)

    @property
    def rows(self) -> list[dict]:
        return [dict(row) for row in self._rows]

    def query(self, constraints: Sequence[KnowledgeConstraint]) -> list[KnowledgeEntity]:
        for constraint in constraints:
            if constraint.field not in self.schema:
                raise UnknownField(constraint.field)
        return [
            dict(row)
            for row in self._rows
            if all(_satisfies(row, c) for c in constraints)
        ]


def _satisfies(row: dict, constraint: KnowledgeConstraint) -> bool:
    actual = row[constraint.field]
    expected = constraint.value
    if constraint.op == "eq":
        return _fold(actual) == _fold(expected)
    if constraint.op == "contains":
        return str(expected).lower() in str(actual).lower()
    numbers = _as_numbers(actual, expected)
    if numbers is not None:
        a, b = numbers
        return a <= b if constraint.op == "le" else a >= b
    a, b = str(actual).lower(), str(expected).lower()
    return a <= b if constraint.op == "le" else a >= b


def _fold(value: Any) -> Any:
    return value.lower() if isinstance(value, str) else value


def _as_numbers(a: Any, b: Any):
    try:
        return float(a), float(b)
    except (TypeError, ValueError):
        return None
