"""Remote-agent protocol conformance checks.

Four checks, each independently falsifiable against a live endpoint:
lifecycle (a session opens and reaches its end flag), report_on_end (the
final Next carries a usable report with recorded turns), closed_session
(Next after the end flag is rejected), and s0_skip (pre-filled initial
state changes the opening prompt). The default probe utterances are tuned
to end a slot-filling restaurant agent but can be overridden.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .client import AgentConnector
from .messages import AgentSession, InitialState, SessionUnknown, SlotValue

DEFAULT_PROBE = ("hello", "Pittsburgh", "thai", "cheap", "never mind")
DEFAULT_S0_SLOT = ("location", "Pittsburgh")

CHECK_NAMES = ("lifecycle", "report_on_end", "closed_session", "s0_skip")


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def run_conformance(
    endpoint: str,
    connector: Optional[AgentConnector] = None,
    probe_utterances: Sequence[str] = DEFAULT_PROBE,
    s0_slot: tuple[str, str] = DEFAULT_S0_SLOT,
    user_id: str = "conformance-probe",
) -> list[CheckResult]:
    connector = connector or AgentConnector()
    results: list[CheckResult] = []

    session, opening = connector.new_call(endpoint, user_id, InitialState(user_id))
    ended = False
    report = None
    turns_taken = 0
    for utterance in probe_utterances:
        reply, ended, report = connector.next(session, utterance)
        turns_taken += 1
        if not isinstance(reply, str) or not reply:
            break
        if ended:
            break

    if not session.session_token or not opening:
        results.append(CheckResult("lifecycle", False, "empty token or opening reply"))
    elif not ended:
        results.append(
            CheckResult("lifecycle", False, f"no end flag after {turns_taken} turns")
        )
    else:
        results.append(
            CheckResult("lifecycle", True, f"session ended after {turns_taken} turns")
        )

    if report is None:
        results.append(CheckResult("report_on_end", False, "final Next carried no report"))
    elif not report.turns:
        results.append(
            CheckResult(
                "report_on_end", False, f"report has no turns (outcome {report.outcome!r})"
            )
        )
    else:
        results.append(
            CheckResult(
                "report_on_end",
                True,
                f"outcome {report.outcome!r}, {len(report.turns)} turns",
            )
        )

    # Re-open the finished session on the wire, bypassing the client-side guard.
    reopened = AgentSession(
        agent_name=session.agent_name,
        endpoint=session.endpoint,
        session_token=session.session_token,
    )
    try:
        connector.next(reopened, "are you still there")
    except SessionUnknown:
        results.append(CheckResult("closed_session", True, "Next after end rejected"))
    except Exception as exc:
        results.append(
            CheckResult("closed_session", False, f"wrong rejection: {type(exc).__name__}")
        )
    else:
        results.append(CheckResult("closed_session", False, "Next after end accepted"))

    slot_name, slot_value = s0_slot
    prefilled = InitialState(
        user_id, known_slots={slot_name: SlotValue(slot_value, 0.9)}
    )
    bare_session, bare_opening = connector.new_call(endpoint, user_id, InitialState(user_id))
    full_session, full_opening = connector.new_call(endpoint, user_id, prefilled)
    if bare_opening != full_opening:
        results.append(
            CheckResult("s0_skip", True, f"pre-filled {slot_name!r} changed the opening")
        )
    else:
        results.append(
            CheckResult("s0_skip", False, f"opening ignores pre-filled {slot_name!r}")
        )
    for leftover in (bare_session, full_session):
        try:
            connector.next(leftover, "never mind")
        except Exception:
            pass

    return results


def format_results(results: Sequence[CheckResult]) -> str:
    lines = [
        f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}" for r in results
    ]
    passed = sum(r.passed for r in results)
    lines.append(f"{passed}/{len(results)} checks passed")
    return "\n".join(lines)
