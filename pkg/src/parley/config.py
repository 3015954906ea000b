"""Deployment configuration and shipped default artifact paths."""

from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

DEFAULT_ANCHOR_DATE = "2024-07-01"
DEFAULT_SESSION_TTL = 1800.0
DEFAULT_CHAT_THRESHOLD = 0.8


class ConfigError(Exception):
    pass


def default_path(name: str) -> Path:
    """Path of a shipped data file inside the installed package."""
    root = resources.files("parley").joinpath("data")
    path = Path(str(root.joinpath(name)))
    if not path.exists():
        raise ConfigError(f"missing packaged data file: {name}")
    return path


@dataclass
class PortalConfig:
    ontology_path: Path
    tree_path: Path
    lexicon_path: Path
    templates_path: Path
    pairs_paths: tuple[Path, ...]
    weather_path: Path
    restaurants_path: Path
    agent_name: Optional[str] = None  # overrides the tree's meta.agent
    chat_threshold: float = DEFAULT_CHAT_THRESHOLD
    session_ttl: float = DEFAULT_SESSION_TTL
    retention_window: float = 3600.0
    anchor_date: str = DEFAULT_ANCHOR_DATE
    seed: int = 0
    transcript_dir: Optional[Path] = None
    # endpoint overrides per RemotePool concept name
    remote_endpoints: dict[str, str] = field(default_factory=dict)

    @classmethod
    def shipped(cls, **overrides) -> "PortalConfig":
        config = cls(
            ontology_path=default_path("ontology.yaml"),
            tree_path=default_path("tree.yaml"),
            lexicon_path=default_path("lexicon.txt"),
            templates_path=default_path("templates.txt"),
            pairs_paths=(default_path("chat_pairs.tsv"), default_path("facts.tsv")),
            weather_path=default_path("weather.tsv"),
            restaurants_path=default_path("restaurants.tsv"),
        )
        for key, value in overrides.items():
            if not hasattr(config, key):
                raise ConfigError(f"unknown config field {key!r}")
            setattr(config, key, value)
        return config


_ISO_DATE = re.compile(r"^\d{4}-\d{2}-\d{2}$")

_RELATIVE_DAYS = {
    "today": 0,
    "tonight": 0,
    "now": 0,
    "tomorrow": 1,
    "yesterday": -1,
}


class DateResolver:
    """Maps spoken date words onto ISO dates relative to a fixed anchor.

    The anchor comes from configuration, not the wall clock, so replays are
    byte-identical whenever they run.
    """

    def __init__(self, anchor_date: str = DEFAULT_ANCHOR_DATE):
        try:
            self.anchor = dt.date.fromisoformat(anchor_date)
        except ValueError as exc:
            raise ConfigError(f"bad anchor date {anchor_date!r}: {exc}") from None

    def __call__(self, value: str) -> str:
        text = value.strip().lower()
        if _ISO_DATE.match(text):
            return text
        if text in _RELATIVE_DAYS:
            return (self.anchor + dt.timedelta(days=_RELATIVE_DAYS[text])).isoformat()
        weekdays = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"]
        if text in weekdays:
            ahead = (weekdays.index(text) - self.anchor.weekday()) % 7
            return (self.anchor + dt.timedelta(days=ahead or 7)).isoformat()
        return value
