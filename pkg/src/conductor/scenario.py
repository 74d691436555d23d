"""Scripted-conversation runner.

A scenario file is an ordered list of steps, each sending one event and
asserting on the reply, the session state, or the trace. Scenarios double as
regression tests (CI runs every bundled one) and as executable documentation
of the conversations the assistant is meant to handle.

Step shape::

    {"send": "...", "expect": [ "substring",
                                {"known": ["email"]},
                                {"asked": "authorize"},
                                {"stack_depth": 0}, ... ]}

String expectations are case-insensitive substring matches against the
joined reply messages; dict expectations are structured asserts.
"""

from __future__ import annotations

import importlib.resources
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .compiler import pair_key
from .config import Config, new_session
from .goals import Event
from .orchestrator import Session, TurnOutput, handle_event


@dataclass
class StepResult:
    index: int
    send: str
    messages: list[str]
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


@dataclass
class ScenarioReport:
    name: str
    steps: list[StepResult]
    duration: float

    @property
    def passed(self) -> bool:
        return all(s.ok for s in self.steps)

    def to_doc(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "duration": self.duration,
            "steps": [
                {
                    "index": s.index,
                    "send": s.send,
                    "ok": s.ok,
                    "messages": s.messages,
                    "failures": s.failures,
                }
                for s in self.steps
            ],
        }


def _check(session: Session, out: TurnOutput, expectation: Any) -> str | None:
    """Returns a failure description, or None when the expectation holds."""
    joined = "\n".join(out.messages)
    if isinstance(expectation, str):
        if expectation.lower() in joined.lower():
            return None
        return f"expected reply to contain {expectation!r}; got {joined!r}"
    if not isinstance(expectation, dict):
        return f"unsupported expectation {expectation!r}"

    if "known" in expectation:
        missing = [e for e in expectation["known"] if e not in session.ltm]
        return f"elements not in memory: {missing}" if missing else None
    if "not_known" in expectation:
        present = [e for e in expectation["not_known"] if e in session.ltm]
        return f"elements unexpectedly in memory: {present}" if present else None
    if "value" in expectation:
        spec = expectation["value"]
        actual = session.ltm.value_of(spec["element"])
        if actual != spec.get("equals"):
            return f"{spec['element']} = {actual!r}, expected {spec.get('equals')!r}"
        return None
    if "asked" in expectation:
        want = expectation["asked"]
        got = None if out.asked is None else out.asked.ask_kind
        return None if got == want else f"asked = {got!r}, expected {want!r}"
    if "asked_target" in expectation:
        got = None if out.asked is None else out.asked.target
        want = expectation["asked_target"]
        return None if got == want else f"asked target = {got!r}, expected {want!r}"
    if "stack_depth" in expectation:
        depth = len(session.goal_stack.entries)
        want = expectation["stack_depth"]
        return None if depth == want else f"goal stack depth = {depth}, expected {want}"
    if "achieved" in expectation:
        want = set(expectation["achieved"])
        got = set(out.achieved or [])
        return None if want <= got else f"achieved = {sorted(got)}, expected to include {sorted(want)}"
    if "learned_contains" in expectation:
        spec = expectation["learned_contains"]
        key = pair_key(spec["skill_id"], spec["pair_id"]) if "skill_id" in spec else spec["pair"]
        hit = any(f.args == (key, spec["element"]) for f in session.learned)
        return None if hit else f"cannot_establish({key}, {spec['element']}) not learned"
    if "learned_count" in expectation:
        got = len(session.learned)
        want = expectation["learned_count"]
        return None if got == want else f"learned {got} facts, expected {want}"
    if "pruned_contains" in expectation:
        aid = expectation["pruned_contains"]
        return None if aid in session.pruned else f"{aid!r} not pruned ({sorted(session.pruned)})"
    if "counter" in expectation:
        spec = expectation["counter"]
        key = (spec["pair"], spec["element"])
        got = session.retry_counters.get(key, 0)
        return None if got == spec["equals"] else f"counter{key} = {got}, expected {spec['equals']}"
    if "trace_has" in expectation:
        spec = expectation["trace_has"]
        for rec in session.history:
            if spec.get("skill_id") is not None and rec.skill_id != spec["skill_id"]:
                continue
            if spec.get("pair_id") is not None and rec.pair_id != spec["pair_id"]:
                continue
            if spec.get("success") is not None and rec.success != spec["success"]:
                continue
            return None
        return f"no trace record matching {spec}"
    if "plan_has" in expectation:
        aid = expectation["plan_has"]
        steps = session.plan_snapshots[-1]["steps"] if session.plan_snapshots else []
        return None if aid in steps else f"{aid!r} not in latest plan {steps}"
    if "plan_lacks" in expectation:
        aid = expectation["plan_lacks"]
        steps = session.plan_snapshots[-1]["steps"] if session.plan_snapshots else []
        return None if aid not in steps else f"{aid!r} unexpectedly in latest plan"
    if "plan_starts_with" in expectation:
        aid = expectation["plan_starts_with"]
        steps = session.plan_snapshots[-1]["steps"] if session.plan_snapshots else []
        return None if steps and steps[0] == aid else f"latest plan {steps} does not start with {aid!r}"
    return f"unknown expectation key in {expectation!r}"


def run_scenario(doc: dict[str, Any], config: Config | None = None) -> ScenarioReport:
    t0 = time.perf_counter()
    config = config or Config.from_dict(dict(doc.get("config", {})))
    session = new_session(config, f"scenario-{doc.get('name', 'unnamed')}")
    results: list[StepResult] = []
    for i, step in enumerate(doc.get("steps", [])):
        event_doc = step.get("event")
        event = (
            Event(**event_doc)
            if event_doc
            else Event(kind="utterance", text=step.get("send", ""))
        )
        out = handle_event(session, event)
        result = StepResult(index=i, send=step.get("send", event.kind), messages=list(out.messages))
        for expectation in step.get("expect", []):
            failure = _check(session, out, expectation)
            if failure is not None:
                result.failures.append(failure)
        results.append(result)
        if result.failures:
            break  # fail fast: later steps would assert against a diverged state
    return ScenarioReport(
        name=str(doc.get("name", "unnamed")),
        steps=results,
        duration=time.perf_counter() - t0,
    )


def load_scenario(path: str | Path) -> dict[str, Any]:
    text = Path(path).read_text(encoding="utf-8")
    return yaml.safe_load(text)


def run_scenario_file(path: str | Path, config: Config | None = None) -> ScenarioReport:
    return run_scenario(load_scenario(path), config)


def bundled_scenario_names() -> list[str]:
    root = importlib.resources.files("conductor") / "scenarios"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def load_bundled_scenario(name: str) -> dict[str, Any]:
    root = importlib.resources.files("conductor") / "scenarios"
    return json.loads((root / name).read_text(encoding="utf-8"))
