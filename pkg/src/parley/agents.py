"""Built-in knowledge back-ends and the reference text remote agent.

The weather and restaurant stores are file-backed stand-ins for live service
APIs; the reference remote agent is a deterministic slot-filling handler used
for handoff flows and as the server-kit example.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

from .nlu import tokenize
from .protocol.knowledge import KnowledgeConstraint, TableKnowledgeAgent
from .protocol.messages import DialogReport, InitialState, ReportTurn

PRICE_RANGES = ("cheap", "moderate", "expensive")


class FixtureError(Exception):
    pass


@dataclass(frozen=True)
class WeatherRecord:
    location: str
    date: str
    condition: str
    high_c: float
    low_c: float


@dataclass(frozen=True)
class RestaurantRecord:
    name: str
    location: str
    food_type: str
    price_range: str
    rating: float


def _read_rows(path: str | Path, required: Sequence[str]) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise FixtureError(f"fixture not found: {path}")
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != list(
            required
        ):
            raise FixtureError(
                f"{path}: header must be exactly {list(required)}, got {reader.fieldnames}"
            )
        return [dict(row) for row in reader]


def load_weather_store(path: str | Path) -> TableKnowledgeAgent:
    """Weather fixture: TSV with header location/date/condition/high_c/low_c."""
    rows = []
    seen = set()
    for raw in _read_rows(path, ("location", "date", "condition", "high_c", "low_c")):
        try:
            record = WeatherRecord(
                location=raw["location"].strip(),
                date=raw["date"].strip(),
                condition=raw["condition"].strip(),
                high_c=float(raw["high_c"]),
                low_c=float(raw["low_c"]),
            )
        except (ValueError, AttributeError) as exc:
            raise FixtureError(f"{path}: bad row {raw}: {exc}") from None
        if record.low_c > record.high_c:
            raise FixtureError(f"{path}: low_c > high_c in {raw}")
        key = (record.location.lower(), record.date)
        if key in seen:
            raise FixtureError(f"{path}: duplicate (location, date) {key}")
        seen.add(key)
        rows.append(asdict(record))
    return TableKnowledgeAgent(
        schema=("location", "date", "condition", "high_c", "low_c"),
        rows=rows,
        sort_key=lambda row: (row["location"].lower(), row["date"]),
    )


def weather_lookup(
    store: TableKnowledgeAgent, location: str, date: str
) -> Optional[WeatherRecord]:
    """Exact (case-insensitive) match on location and date, or absent."""
    matches = store.query(
        [
            KnowledgeConstraint("location", "eq", location),
            KnowledgeConstraint("date", "eq", date),
        ]
    )
    if not matches:
        return None
    row = matches[0]
    return WeatherRecord(
        location=row["location"],
        date=row["date"],
        condition=row["condition"],
        high_c=float(row["high_c"]),
        low_c=float(row["low_c"]),
    )


def load_restaurant_store(path: str | Path) -> TableKnowledgeAgent:
    """Restaurant fixture: TSV with header name/location/food_type/price_range/rating."""
    rows = []
    seen = set()
    for raw in _read_rows(
        path, ("name", "location", "food_type", "price_range", "rating")
    ):
        try:
            record = RestaurantRecord(
                name=raw["name"].strip(),
                location=raw["location"].strip(),
                food_type=raw["food_type"].strip().lower(),
                price_range=raw["price_range"].strip().lower(),
                rating=float(raw["rating"]),
            )
        except (ValueError, AttributeError) as exc:
            raise FixtureError(f"{path}: bad row {raw}: {exc}") from None
        if record.price_range not in PRICE_RANGES:
            raise FixtureError(f"{path}: bad price_range {record.price_range!r}")
        if not 0 <= record.rating <= 5:
            raise FixtureError(f"{path}: rating out of range in {raw}")
        key = (record.name.lower(), record.location.lower())
        if key in seen:
            raise FixtureError(f"{path}: duplicate (name, location) {key}")
        seen.add(key)
        rows.append(asdict(record))
    # Rating-descending with a name tie-break keeps results deterministic.
    return TableKnowledgeAgent(
        schema=("name", "location", "food_type", "price_range", "rating"),
        rows=rows,
        sort_key=lambda row: (-row["rating"], row["name"].lower(), row["location"].lower()),
    )


def restaurant_search(
    store: TableKnowledgeAgent, constraints: Sequence[KnowledgeConstraint]
) -> list[RestaurantRecord]:
    return [
        RestaurantRecord(
            name=row["name"],
            location=row["location"],
            food_type=row["food_type"],
            price_range=row["price_range"],
            rating=float(row["rating"]),
        )
        for row in store.query(constraints)
    ]


class SlotFillingRestaurantAgent:
    """Deterministic slot-filling handler over location/food_type/price_range.

    Asks unknown slots in that fixed order, honors s0 slots at confidence
    >= 0.5, recommends from the restaurant store, then ends with a complete
    report. Report timestamps are a logical per-session counter so identical
    inputs produce identical reports.
    """

    SLOT_ORDER = ("location", "food_type", "price_range")
    ABANDON_PHRASES = ("never mind", "nevermind", "cancel", "forget it", "stop", "goodbye")

    def __init__(self, store: TableKnowledgeAgent, attach_reports: bool = True):
        self.store = store
        self.attach_reports = attach_reports
        self._sessions: dict[str, dict] = {}
        self._values = {
            "location": sorted({r["location"] for r in store.rows}),
            "food_type": sorted({r["food_type"] for r in store.rows}),
            "price_range": list(PRICE_RANGES),
        }

    def on_new_call(self, token: str, user_id: str, s0: InitialState) -> str:
        slots = {
            name: value
            for name, value in s0.confident_slots(0.5).items()
            if name in self.SLOT_ORDER
        }
        session = {"slots": slots, "turns": [], "clock": 0, "user_id": user_id}
        self._sessions[token] = session
        reply = self._next_prompt(session)
        self._log(session, "system", reply)
        return reply

    def on_next(self, token, utterance):
        session = self._sessions[token]
        self._log(session, "user", utterance)
        lowered = utterance.lower()
        if any(phrase in lowered for phrase in self.ABANDON_PHRASES):
            reply = "Alright, I will hand you back."
            self._log(session, "system", reply)
            return reply, True, self._report(token, session, "abandoned")

        self._extract(session, utterance)
        missing = [s for s in self.SLOT_ORDER if s not in session["slots"]]
        if missing:
            reply = self._prompt_for(missing[0])
            self._log(session, "system", reply)
            return reply, False, None

        reply = self._recommend(session)
        self._log(session, "system", reply)
        return reply, True, self._report(token, session, "completed")

    def _extract(self, session: dict, utterance: str) -> None:
        tokens = [t for t, _, _ in tokenize(utterance)]
        joined = " ".join(tokens)
        for slot in self.SLOT_ORDER:
            if slot in session["slots"]:
                continue
            candidates = sorted(self._values[slot], key=len, reverse=True)
            for value in candidates:
                value_tokens = " ".join(t for t, _, _ in tokenize(value))
                if value_tokens and f" {value_tokens} " in f" {joined} ":
                    session["slots"][slot] = value
                    break

    def _next_prompt(self, session: dict) -> str:
        missing = [s for s in self.SLOT_ORDER if s not in session["slots"]]
        if missing:
            return self._prompt_for(missing[0])
        return self._recommend(session)

    def _prompt_for(self, slot: str) -> str:
        prompts = {
            "location": "Sure, I can find you a restaurant. What city should I search in?",
            "food_type": "What kind of food are you looking for?",
            "price_range": "Which price range do you prefer: cheap, moderate, or expensive?",
        }
        return prompts[slot]

    def _recommend(self, session: dict) -> str:
        slots = session["slots"]
        constraints = [
            KnowledgeConstraint(slot, "eq", slots[slot]) for slot in self.SLOT_ORDER
        ]
        matches = self.store.query(constraints)
        if not matches:
            return (
                f"I found no {slots['price_range']} {slots['food_type']} restaurant "
                f"in {slots['location']}. Handing you back now."
            )
        best = matches[0]
        return (
            f"I recommend {best['name']}, a {best['price_range']} "
            f"{best['food_type']} restaurant in {best['location']} "
            f"rated {best['rating']:.1f}. Handing you back now."
        )

    def _log(self, session: dict, speaker: str, text: str) -> None:
        session["turns"].append(
            ReportTurn(speaker=speaker, text=text, timestamp=float(session["clock"]))
        )
        session["clock"] += 1

    def _report(self, token: str, session: dict, outcome: str):
        self._sessions.pop(token, None)
        if not self.attach_reports:
            return None
        return DialogReport(
            session_token=token,
            turns=list(session["turns"]),
            outcome=outcome,
            extras={"slots": dict(session["slots"])},
        )


def reference_remote_agent(
    store: Optional[TableKnowledgeAgent] = None,
) -> SlotFillingRestaurantAgent:
    """The shipped deterministic restaurant handler (see module docstring)."""
    if store is None:
        from .config import default_path

        store = load_restaurant_store(default_path("restaurants.tsv"))
    return SlotFillingRestaurantAgent(store)


def broken_remote_agent(
    store: Optional[TableKnowledgeAgent] = None,
) -> SlotFillingRestaurantAgent:
    """Reference agent that violates the report-on-end requirement (tests)."""
    agent = reference_remote_agent(store)
    agent.attach_reports = False
    return agent
