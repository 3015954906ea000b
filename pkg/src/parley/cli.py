"""Operator harness: repl, scripted replay, agent conformance, HTTP serve.

Exit codes: 0 success, 1 expectation or check failures, 2 bad configuration
or unparseable input.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

from .chatbot import ChatbotError
from .config import ConfigError, PortalConfig
from .engine import EngineError, InvalidTree
from .nlg import NlgError
from .nlu import NluError
from .ontology import OntologyError
from .portal import Portal, PortalError
from .protocol.client import AgentConnector
from .protocol.conformance import format_results, run_conformance
from .protocol.messages import Unreachable

CONFIG_ERRORS = (
    ConfigError,
    OntologyError,
    InvalidTree,
    NluError,
    NlgError,
    ChatbotError,
    OSError,
)


class ScriptParseError(Exception):
    pass


@dataclass(frozen=True)
class ScriptStep:
    send: str
    expect_contains: Optional[str] = None
    expect_agent: Optional[str] = None


def parse_script(text: str) -> list[ScriptStep]:
    """Lines: `> user text`, `~ expect reply substring`, `@ expect agent`."""
    steps: list[ScriptStep] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        marker, body = line[0], line[1:].strip()
        if marker == ">":
            steps.append(ScriptStep(send=body))
        elif marker in ("~", "@"):
            if not steps:
                raise ScriptParseError(f"line {lineno}: expectation before any `>` line")
            if marker == "~":
                steps[-1] = replace(steps[-1], expect_contains=body)
            else:
                steps[-1] = replace(steps[-1], expect_agent=body)
        else:
            raise ScriptParseError(f"line {lineno}: unrecognized line {line!r}")
    if not steps:
        raise ScriptParseError("script has no steps")
    return steps


def run_replay(steps: Sequence[ScriptStep], portal: Portal, out=None) -> list[int]:
    """Run steps in order; returns the indexes of failed steps."""
    out = sys.stdout if out is None else out
    created = portal.create_session()
    session_id = created["session_id"]
    print(f"[{created['active_agent']}] {created['reply']}", file=out)
    failed: list[int] = []
    for index, step in enumerate(steps):
        turn = portal.post_utterance(session_id, step.send)
        print(f"> {step.send}", file=out)
        print(f"[{turn.active_agent}] {turn.reply}", file=out)
        problems = []
        if step.expect_contains is not None and step.expect_contains not in turn.reply:
            problems.append(f"reply missing {step.expect_contains!r}")
        if step.expect_agent is not None and step.expect_agent != turn.active_agent:
            problems.append(f"agent {turn.active_agent!r}, expected {step.expect_agent!r}")
        if problems:
            failed.append(index)
            print(f"FAIL step {index}: {'; '.join(problems)}", file=out)
    print(
        f"{len(steps) - len(failed)}/{len(steps)} steps passed"
        + (f", failed: {failed}" if failed else ""),
        file=out,
    )
    return failed


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--ontology", type=Path, help="concept definitions (YAML)")
    parser.add_argument("--tree", type=Path, help="task tree (YAML)")
    parser.add_argument("--lexicon", type=Path, help="keyword/gazetteer lexicon")
    parser.add_argument("--templates", type=Path, help="surface templates")
    parser.add_argument(
        "--pairs", type=Path, action="append", help="chat pair TSV (repeatable)"
    )
    parser.add_argument("--weather", type=Path, help="weather fixture TSV")
    parser.add_argument("--restaurants", type=Path, help="restaurant fixture TSV")
    parser.add_argument("--agent-name", help="portal agent display name")
    parser.add_argument("--seed", type=int, default=0, help="NLG sampling seed")
    parser.add_argument("--chat-threshold", type=float, help="chatbot cosine gate")
    parser.add_argument("--session-ttl", type=float, help="idle session TTL, seconds")
    parser.add_argument("--anchor-date", help="ISO date anchoring relative dates")
    parser.add_argument("--transcript-dir", type=Path, help="daily JSONL log directory")
    parser.add_argument(
        "--remote",
        action="append",
        default=[],
        metavar="NAME=URL",
        help="override a remote concept endpoint (repeatable)",
    )


def _build_config(args: argparse.Namespace) -> PortalConfig:
    overrides = {}
    flag_to_field = {
        "ontology": "ontology_path",
        "tree": "tree_path",
        "lexicon": "lexicon_path",
        "templates": "templates_path",
        "weather": "weather_path",
        "restaurants": "restaurants_path",
        "agent_name": "agent_name",
        "seed": "seed",
        "chat_threshold": "chat_threshold",
        "session_ttl": "session_ttl",
        "anchor_date": "anchor_date",
        "transcript_dir": "transcript_dir",
    }
    for flag, fieldname in flag_to_field.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[fieldname] = value
    if getattr(args, "pairs", None):
        overrides["pairs_paths"] = tuple(args.pairs)
    endpoints = {}
    for item in getattr(args, "remote", []):
        name, sep, url = item.partition("=")
        if not sep or not name or not url:
            raise ConfigError(f"--remote expects NAME=URL, got {item!r}")
        endpoints[name] = url
    if endpoints:
        overrides["remote_endpoints"] = endpoints
    return PortalConfig.shipped(**overrides)


def _cmd_repl(args: argparse.Namespace) -> int:
    portal = Portal(_build_config(args))
    created = portal.create_session()
    session_id = created["session_id"]
    print(f"[{created['active_agent']}] {created['reply']}")
    while True:
        try:
            line = input("> ")
        except (EOFError, KeyboardInterrupt):
            print()
            return 0
        if not line.strip():
            continue
        try:
            turn = portal.post_utterance(session_id, line)
        except PortalError as exc:
            print(f"error: {exc}", file=sys.stderr)
            continue
        print(f"[{turn.active_agent}] {turn.reply}")
        if turn.ended:
            return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    try:
        text = Path(args.script).read_text(encoding="utf-8")
        steps = parse_script(text)
    except (OSError, ScriptParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    portal = Portal(_build_config(args))
    failed = run_replay(steps, portal)
    return 1 if failed else 0


def _cmd_conformance(args: argparse.Namespace) -> int:
    connector = AgentConnector()
    if args.endpoint.startswith("local:"):
        # Host the reference agent in-process; handy for self-testing.
        from .agents import reference_remote_agent
        from .protocol.server import AgentHost

        connector.register_local(
            args.endpoint.partition(":")[2], AgentHost(reference_remote_agent())
        )
    try:
        results = run_conformance(args.endpoint, connector)
    except Unreachable as exc:
        print(f"error: endpoint unreachable: {exc}", file=sys.stderr)
        return 1
    print(format_results(results))
    return 0 if all(r.passed for r in results) else 1


def _cmd_serve(args: argparse.Namespace) -> int:
    from .http_api import serve

    portal = Portal(_build_config(args))
    print(f"serving on http://{args.host}:{args.port}", file=sys.stderr)
    serve(portal, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="parley", description="Multi-agent dialog portal harness."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    repl = sub.add_parser("repl", help="interactive conversation on stdin/stdout")
    _add_config_flags(repl)
    repl.set_defaults(func=_cmd_repl)

    replay = sub.add_parser("replay", help="run a script file with expectations")
    replay.add_argument("script", type=Path)
    _add_config_flags(replay)
    replay.set_defaults(func=_cmd_replay)

    conf = sub.add_parser("conformance", help="probe a remote agent endpoint")
    conf.add_argument("endpoint", help="http(s) URL or local:NAME")
    conf.set_defaults(func=_cmd_conformance)

    serve = sub.add_parser("serve", help="start the HTTP portal service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8080)
    _add_config_flags(serve)
    serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
