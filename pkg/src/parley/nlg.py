"""Template-based rendering of system actions into surface text."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

from .acts import Act, DialogAct, SystemAction

# These acts carry text owned by another speaker (remote agent, chatbot, or
# canned capability blurb) and are never re-rendered.
VERBATIM_ACTS = frozenset({DialogAct.RELAY, DialogAct.INSTRUCT})


class NlgError(Exception):
    pass


class MissingTemplate(NlgError):
    def __init__(self, act: DialogAct, value_class: Optional[str]):
        self.act = act
        self.value_class = value_class
        super().__init__(f"no template for ({act.value}, {value_class})")


class TemplateFileError(NlgError):
    pass


@dataclass
class TemplateSet:
    templates: dict[tuple[str, Optional[str]], list[str]] = field(default_factory=dict)

    def lookup(self, act: DialogAct, value_class: Optional[str]) -> list[str]:
        """Most specific key first, then the classless fallback."""
        if value_class is not None:
            specific = self.templates.get((act.value, value_class))
            if specific:
                return specific
        generic = self.templates.get((act.value, None))
        if generic:
            return generic
        raise MissingTemplate(act, value_class)


def render(action: SystemAction, templates: TemplateSet, rng_seed: int = 0) -> str:
    """Render acts in order, joined with single spaces.

    Template choice among alternatives is drawn from a generator seeded with
    rng_seed, so identical (action, seed) always renders identically.
    """
    rng = random.Random(rng_seed)
    pieces = []
    for act in action.acts:
        pieces.append(_render_act(act, templates, rng))
    return " ".join(piece for piece in pieces if piece)


def _render_act(act: Act, templates: TemplateSet, rng: random.Random) -> str:
    if act.act in VERBATIM_ACTS:
        return str(act.value) if act.value is not None else ""
    value_class, context = _value_context(act.value)
    choices = templates.lookup(act.act, value_class)
    template = choices[0] if len(choices) == 1 else rng.choice(choices)
    try:
        return template.format_map(context)
    except KeyError as exc:
        raise NlgError(
            f"template for ({act.act.value}, {value_class}) references "
            f"unknown slot {exc.args[0]!r}"
        ) from None


def _value_context(value) -> tuple[Optional[str], dict]:
    """Value class used for template lookup plus the slot-fill context.

    Mapping values use their "kind" field as the class and themselves as the
    context; plain strings class as themselves (so ASK:location style keys
    work) and fill the {value} slot.
    """
    if value is None:
        return None, {"value": ""}
    if isinstance(value, Mapping):
        context = dict(value)
        context.setdefault("value", context.get("kind", ""))
        return context.get("kind"), context
    text = str(value)
    return text, {"value": text}


def load_templates(path: str | Path) -> TemplateSet:
    """Load `ACT[:VALUE_CLASS] => template` lines; later lines append alternatives."""
    path = Path(path)
    if not path.exists():
        raise TemplateFileError(f"template file not found: {path}")
    known_acts = {act.value for act in DialogAct}
    out = TemplateSet()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            head, sep, body = line.partition("=>")
            if not sep:
                raise TemplateFileError(f"{path}:{lineno}: expected `ACT => text`")
            head = head.strip()
            body = body.strip()
            if not body:
                raise TemplateFileError(f"{path}:{lineno}: empty template body")
            act_name, _, value_class = head.partition(":")
            act_name = act_name.strip()
            if act_name not in known_acts:
                raise TemplateFileError(f"{path}:{lineno}: unknown act {act_name!r}")
            key = (act_name, value_class.strip() or None)
            out.templates.setdefault(key, []).append(body)
    return out
