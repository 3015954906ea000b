"""Shared fixtures: shipped-configuration engine and parsing helpers."""

import pytest

from parley.agents import (
    load_restaurant_store,
    load_weather_store,
    reference_remote_agent,
)
from parley.config import DateResolver, default_path
from parley.engine import DialogEngine, load_tree
from parley.nlu import load_lexicon, parse
from parley.ontology import load_ontology
from parley.protocol import AgentConnector, AgentHost


@pytest.fixture(scope="session")
def shipped_lexicon():
    return load_lexicon(default_path("lexicon.txt"))


def build_engine(chat_responder=None, connector=None, remote_endpoints=None):
    """Engine wired like the portal does it, minus bus and renderer."""
    tree = load_tree(default_path("tree.yaml"))
    ontology = load_ontology(default_path("ontology.yaml"))
    if connector is None:
        connector = AgentConnector()
        connector.register_local(
            "bistro",
            AgentHost(
                reference_remote_agent(
                    load_restaurant_store(default_path("restaurants.tsv"))
                )
            ),
        )
    return DialogEngine(
        tree,
        ontology,
        connector=connector,
        knowledge_agents={"weather": load_weather_store(default_path("weather.tsv"))},
        chat_responder=chat_responder,
        resolvers={"date_time": DateResolver()},
        remote_endpoints=remote_endpoints,
    )


class Dialog:
    """One engine session driven by raw text through the shipped lexicon."""

    def __init__(self, lexicon, chat_responder=None, connector=None, remote_endpoints=None):
        self.lexicon = lexicon
        self.engine = build_engine(chat_responder, connector, remote_endpoints)
        self.state, self.opening = self.engine.start_session("test-session")

    def say(self, text):
        frame = parse(text, self.lexicon)
        _, action = self.engine.run_turn(self.state, frame)
        return action

    def send_frame(self, frame):
        _, action = self.engine.run_turn(self.state, frame)
        return action


@pytest.fixture()
def dialog(shipped_lexicon):
    return Dialog(shipped_lexicon)
