"""Events, rule-based intent recognition, and the session goal stack.

Intent recognition is deliberately shallow: an ordered list of regex rules
declared in config maps utterances (or alert tags) to symbolic intents, with
capture groups feeding intent arguments. First match wins; no match yields
``unknown``. The goal stack gives digression for free -- a new request is
pushed on top, and finishing (or stopping) the top resumes whatever was
interrupted, in exact reverse push order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

EVENT_UTTERANCE = "utterance"
EVENT_ALERT = "alert"
EVENT_SYSTEM = "system"

INTENT_GOAL = "goal"
INTENT_WHY = "why"
INTENT_HOW = "how"
INTENT_CHAIN = "chain"
INTENT_SUMMARY = "summary"
INTENT_STOP = "stop"
INTENT_PROVIDE_VALUE = "provide_value"
INTENT_AUTHORIZE_RESPONSE = "authorize_response"
INTENT_UNKNOWN = "unknown"


@dataclass(frozen=True)
class Event:
    kind: str = EVENT_UTTERANCE
    text: str = ""
    payload: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind == EVENT_UTTERANCE and not self.text.strip():
            raise ValueError("utterance events require non-empty text")


@dataclass(frozen=True)
class Intent:
    kind: str
    elements: frozenset[str] = frozenset()  # goal intents
    element: str | None = None  # why / how / provide_value
    value: str | None = None  # provide_value
    skill_id: str | None = None  # authorize_response
    granted: bool | None = None  # authorize_response
    mode: str | None = None  # why: final | chain

    @classmethod
    def unknown(cls) -> "Intent":
        return cls(INTENT_UNKNOWN)


@dataclass(frozen=True)
class IntentRule:
    """pattern -> intent template; ``$1``/``$name`` in args pull capture groups."""

    pattern: str
    intent: str
    args: dict[str, Any] = field(default_factory=dict)
    event_kind: str = EVENT_UTTERANCE

    def compiled(self) -> re.Pattern[str]:
        return re.compile(self.pattern, re.IGNORECASE)


def _substitute(template: Any, match: re.Match[str]) -> Any:
    if isinstance(template, str) and template.startswith("$"):
        ref = template[1:]
        value = match.group(int(ref)) if ref.isdigit() else match.group(ref)
        return (value or "").strip()
    if isinstance(template, list):
        return [_substitute(t, match) for t in template]
    return template


def derive_goal(event: Event, intent_rules: Sequence[IntentRule]) -> Intent:
    """Map an event to an intent via the first matching rule; total function."""
    subject = event.text if event.kind == EVENT_UTTERANCE else event.payload.get("tag", event.text)
    for rule in intent_rules:
        if rule.event_kind != event.kind:
            continue
        m = rule.compiled().search(subject or "")
        if m is None:
            continue
        args = {k: _substitute(v, m) for k, v in rule.args.items()}
        return _intent_from_args(rule.intent, args)
    return Intent.unknown()


def _intent_from_args(kind: str, args: dict[str, Any]) -> Intent:
    if kind == INTENT_GOAL:
        elements = args.get("elements", [])
        if isinstance(elements, str):
            elements = [elements]
        return Intent(INTENT_GOAL, elements=frozenset(elements))
    if kind in (INTENT_WHY, INTENT_HOW, INTENT_CHAIN):
        return Intent(kind, element=args.get("element"), mode=args.get("mode"))
    if kind == INTENT_PROVIDE_VALUE:
        return Intent(kind, element=args.get("element"), value=args.get("value"))
    if kind == INTENT_AUTHORIZE_RESPONSE:
        return Intent(kind, skill_id=args.get("skill_id"), granted=bool(args.get("granted")))
    if kind in (INTENT_SUMMARY, INTENT_STOP, INTENT_UNKNOWN):
        return Intent(kind)
    return Intent.unknown()


def rules_from_config(raw: Iterable[dict[str, Any]]) -> list[IntentRule]:
    rules = []
    for entry in raw:
        rules.append(
            IntentRule(
                pattern=entry["pattern"],
                intent=entry["intent"],
                args=dict(entry.get("args", {})),
                event_kind=entry.get("event_kind", EVENT_UTTERANCE),
            )
        )
    return rules


# --------------------------------------------------------------------------
# Goal stack
# --------------------------------------------------------------------------

GOAL_ACTIVE = "active"
GOAL_COMPLETED = "completed"
GOAL_STOPPED = "stopped"


@dataclass
class GoalEntry:
    goal: frozenset[str]
    status: str = GOAL_ACTIVE
    # known-element snapshot at push time; explanation summaries recompile
    # from here rather than from the current memory.
    initial_known: frozenset[str] = frozenset()
    first_seq: int = 0  # history position when the goal was pushed
    pending: Any = None  # suspended question awaiting the user, if any
    plans: list[Any] = field(default_factory=list)

    def to_doc(self) -> dict[str, Any]:
        return {
            "goal": sorted(self.goal),
            "status": self.status,
            "pending": None if self.pending is None else self.pending.to_doc(),
        }


class GoalStack:
    """LIFO of goals; the top entry is the one being pursued."""

    def __init__(self):
        self.entries: list[GoalEntry] = []
        self.finished: list[GoalEntry] = []  # popped entries, most recent last

    def push_goal(
        self, goal: Iterable[str], initial_known: Iterable[str] = (), first_seq: int = 0
    ) -> GoalEntry:
        entry = GoalEntry(
            goal=frozenset(goal), initial_known=frozenset(initial_known), first_seq=first_seq
        )
        self.entries.append(entry)
        return entry

    def current(self) -> GoalEntry | None:
        return self.entries[-1] if self.entries else None

    def current_goal(self) -> frozenset[str] | None:
        cur = self.current()
        return None if cur is None else cur.goal

    def _pop(self, status: str) -> tuple[GoalEntry | None, GoalEntry | None]:
        if not self.entries:
            return None, None
        done = self.entries.pop()
        done.status = status
        self.finished.append(done)
        return done, (self.entries[-1] if self.entries else None)

    def complete_current(self) -> tuple[GoalEntry | None, GoalEntry | None]:
        """Pop the top goal as completed; returns (popped, resumed-or-None)."""
        return self._pop(GOAL_COMPLETED)

    def stop_current(self) -> tuple[GoalEntry | None, GoalEntry | None]:
        return self._pop(GOAL_STOPPED)

    def all_entries(self) -> list[GoalEntry]:
        """Finished then live entries, in lifecycle order."""
        return self.finished + self.entries

    def latest_entry_for(self, goal: frozenset[str] | None = None) -> GoalEntry | None:
        """Most recent entry matching the goal (or the most recent overall),
        preferring the live stack over finished goals."""
        pool = list(reversed(self.entries)) + list(reversed(self.finished))
        for entry in pool:
            if goal is None or entry.goal == goal:
                return entry
        return None

    def to_doc(self) -> list[dict[str, Any]]:
        return [e.to_doc() for e in self.entries]
