"""Multi-agent dialog orchestration: plan-based engine, portal, agent protocol."""

from .acts import FLOOR_YIELDING, Act, DialogAct, SystemAction
from .config import ConfigError, DateResolver, PortalConfig, default_path
from .engine import (
    DialogEngine,
    DialogState,
    EngineError,
    InvalidTree,
    TaskNode,
    TaskTree,
    load_tree,
)
from .nlg import MissingTemplate, NlgError, TemplateSet, load_templates, render
from .nlu import Lexicon, NluError, SemanticFrame, load_lexicon, parse
from .ontology import (
    Concept,
    CycleIntroduced,
    Grounding,
    Ontology,
    OntologyError,
    Pool,
    Subscription,
    load_ontology,
)
from .portal import Busy, Portal, PortalError, TurnReply, UnknownSession

__version__ = "0.1.0"

__all__ = [
    "Act",
    "Busy",
    "Concept",
    "ConfigError",
    "CycleIntroduced",
    "DateResolver",
    "DialogAct",
    "DialogEngine",
    "DialogState",
    "EngineError",
    "FLOOR_YIELDING",
    "Grounding",
    "InvalidTree",
    "Lexicon",
    "MissingTemplate",
    "NlgError",
    "NluError",
    "Ontology",
    "OntologyError",
    "Pool",
    "Portal",
    "PortalConfig",
    "PortalError",
    "SemanticFrame",
    "Subscription",
    "SystemAction",
    "TaskNode",
    "TaskTree",
    "TemplateSet",
    "TurnReply",
    "UnknownSession",
    "default_path",
    "load_lexicon",
    "load_ontology",
    "load_templates",
    "load_tree",
    "parse",
    "render",
    "__version__",
]
