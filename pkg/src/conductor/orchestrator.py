"""The session turn loop: derive goal, compile, plan, execute, learn, replan.

A turn starts from an event and runs until the assistant either achieves the
current goal, suspends on a question to the user (slot fill or authorization),
or gives up. Divergent skill outcomes still write their facts to memory, bump
per-(pair, element) retry counters, and trigger a replan; counters crossing a
skill's retry limit freeze a cannot_establish fact for the rest of the
session, and invalid invocations prune their grounded action outright. The
goal stack makes digression native: mid-goal requests are pushed on top and
the interrupted goal resumes, with a notification, once they finish.
"""

from __future__ import annotations

import logging
import re
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping

from . import compiler, explainer, planner
from .catalog import Catalog, Ontology
from .compiler import Fluent, GroundedAction, PlanningModel, cannot_establish, known_closure
from .goals import (
    EVENT_UTTERANCE,
    GOAL_ACTIVE,
    INTENT_AUTHORIZE_RESPONSE,
    INTENT_CHAIN,
    INTENT_GOAL,
    INTENT_HOW,
    INTENT_PROVIDE_VALUE,
    INTENT_STOP,
    INTENT_SUMMARY,
    INTENT_UNKNOWN,
    INTENT_WHY,
    Event,
    GoalEntry,
    GoalStack,
    Intent,
    IntentRule,
    derive_goal,
    rules_from_config,
)
from .memory import ExecutionRecord, History, LongTermMemory, Provenance
from .skills import (
    ASK_AUTHORIZE,
    ASK_SLOT,
    STATUS_FAILED,
    STATUS_INVALID,
    STATUS_NEEDS_USER,
    STATUS_OUTCOME,
    InvocationContext,
    SkillRuntime,
    SlotFillRuntime,
)

logger = logging.getLogger(__name__)

MODE_PLANNER = "planner"
MODE_S3 = "s3"

_YES = re.compile(r"^\s*(yes|y|yeah|yep|sure|ok|okay|authorize[d]?|allow|go ahead)\b", re.IGNORECASE)
_NO = re.compile(r"^\s*(no|n|nope|deny|denied|don't|do not|never)\b", re.IGNORECASE)


@dataclass
class PendingQuestion:
    ask_kind: str  # slot_fill | authorize
    target: str  # element id or skill id
    prompt: str
    action_id: str
    skill_id: str
    pair_id: str
    attempts: int = 0

    def to_doc(self) -> dict[str, Any]:
        return {
            "ask_kind": self.ask_kind,
            "target": self.target,
            "prompt": self.prompt,
            "action_id": self.action_id,
        }


@dataclass
class TurnOutput:
    messages: list[str] = field(default_factory=list)
    asked: PendingQuestion | None = None
    achieved: list[str] | None = None
    trace_delta: list[int] = field(default_factory=list)

    def to_doc(self) -> dict[str, Any]:
        return {
            "messages": list(self.messages),
            "asked": None if self.asked is None else self.asked.to_doc(),
            "achieved": self.achieved,
            "trace_delta": list(self.trace_delta),
        }


@dataclass
class SessionSettings:
    mode: str = MODE_PLANNER
    max_replans: int = 25
    slot_fill_cost: int = 2
    s3_delta: float = 0.5
    s3_k: int = 1


class Session:
    """All per-conversation state. Single-threaded within a turn."""

    def __init__(
        self,
        session_id: str,
        ontology: Ontology,
        catalog: Catalog,
        runtimes: Mapping[str, SkillRuntime],
        intent_rules: Iterable[IntentRule | dict],
        settings: SessionSettings | None = None,
        goal_extensions: Iterable[dict] = (),
    ):
        self.id = session_id
        self.ontology = ontology
        self.catalog = catalog
        self.runtimes = dict(runtimes)
        self.intent_rules: list[IntentRule] = [
            r if isinstance(r, IntentRule) else rules_from_config([r])[0] for r in intent_rules
        ]
        self.settings = settings or SessionSettings()
        self.goal_extensions = [dict(e) for e in goal_extensions]

        self.ltm = LongTermMemory(ontology)
        self.history = History()
        self.goal_stack = GoalStack()
        self.learned: set[Fluent] = set()
        self.pruned: set[str] = set()
        self.retry_counters: dict[tuple[str, str], int] = {}
        self.authorized: set[str] = set()
        self.plan_snapshots: list[dict[str, Any]] = []
        self.turn_count = 0

    # -- state helpers -----------------------------------------------------

    def live_state(self) -> frozenset[Fluent]:
        state = set(known_closure(self.ltm.known_set(), self.ontology))
        state.update(compiler.authorized(s) for s in self.authorized)
        return frozenset(state)

    def compile_model(self, goal: Iterable[str], *, initial_known: Iterable[str] | None = None) -> PlanningModel:
        return compiler.compile(
            self.catalog,
            self.ontology,
            self.ltm.known_set() if initial_known is None else initial_known,
            learned=self.learned,
            pruned=self.pruned,
            goal=goal,
            authorized_skills=self.authorized,
            slot_fill_cost=self.settings.slot_fill_cost,
        )

    def retry_limit(self, skill_id: str) -> int:
        skill = self.catalog.skills.get(skill_id)
        return skill.retry_limit if skill else 2

    def describe(self, elements: Iterable[str]) -> str:
        return " and ".join(self.ontology.display(e) for e in sorted(elements))

    def resolve_element(self, text: str | None) -> str | None:
        if not text:
            return None
        norm = text.strip().strip("?.!,").lower()
        if norm in self.ontology:
            return norm
        underscored = norm.replace(" ", "_")
        if underscored in self.ontology:
            return underscored
        for el in self.ontology.elements.values():
            if el.display_name.lower() == norm:
                return el.id
        return None

    def record(
        self,
        *,
        skill_id: str,
        pair_id: str,
        action_id: str,
        inputs: Iterable[str],
        desired_index: int,
        actual: Iterable[str],
        success: bool,
        invalid: bool = False,
    ) -> ExecutionRecord:
        rec = ExecutionRecord(
            seq=self.history.next_seq(),
            skill_id=skill_id,
            pair_id=pair_id,
            action_id=action_id,
            inputs_consumed=frozenset(inputs),
            desired_outcome_index=desired_index,
            actual_outcome=frozenset(actual),
            success=success,
            timestamp=time.time(),
            invalid_invocation=invalid,
        )
        self.history.append_record(rec)
        return rec

    def bump_counters(self, pair_key: str, skill_id: str, elements: Iterable[str]) -> list[Fluent]:
        """Count a failed attempt at establishing each element; returns any
        newly frozen cannot_establish facts."""
        frozen: list[Fluent] = []
        limit = self.retry_limit(skill_id)
        for element in sorted(elements):
            key = (pair_key, element)
            self.retry_counters[key] = self.retry_counters.get(key, 0) + 1
            fluent = cannot_establish(pair_key, element)
            if self.retry_counters[key] >= limit and fluent not in self.learned:
                self.learned.add(fluent)
                frozen.append(fluent)
        return frozen


def authorization_gate(session: Session, action: GroundedAction) -> str:
    """Runtime double-check of the compile-time authorization constraint.

    Returns "allow", or the authorize action id that must succeed first.
    This is also the single seam where a per-element authorization policy
    could be plugged in instead of the per-skill default.
    """
    skill = session.catalog.skills.get(action.skill_id)
    if skill is None or skill.internal:
        return "allow"  # built-ins talk to the user, not to external services
    try:
        pair = skill.pair(action.pair_id)
    except KeyError:
        return "allow"
    consumes_sensitive = any(
        e in session.ontology and session.ontology[e].sensitive for e in pair.inputs
    )
    if not consumes_sensitive:
        return "allow"
    if action.skill_id in session.authorized:
        return "allow"
    return compiler.authorize_action_id(action.skill_id, session.catalog)


# --------------------------------------------------------------------------
# Intent resolution (pending-aware)
# --------------------------------------------------------------------------


def _resolve_intent(session: Session, event: Event) -> Intent:
    entry = session.goal_stack.current()
    pending = entry.pending if entry else None
    if pending is not None and event.kind == EVENT_UTTERANCE:
        text = event.text
        if pending.ask_kind == ASK_AUTHORIZE:
            if _YES.search(text):
                return Intent(INTENT_AUTHORIZE_RESPONSE, skill_id=pending.target, granted=True)
            if _NO.search(text):
                return Intent(INTENT_AUTHORIZE_RESPONSE, skill_id=pending.target, granted=False)
            return derive_goal(event, session.intent_rules)
        if pending.ask_kind == ASK_SLOT:
            ruled = derive_goal(event, session.intent_rules)
            if ruled.kind != INTENT_UNKNOWN:
                return ruled  # digression or an explanation question wins
            return Intent(INTENT_PROVIDE_VALUE, element=pending.target, value=text)
    return derive_goal(event, session.intent_rules)


# --------------------------------------------------------------------------
# Turn loop
# --------------------------------------------------------------------------


def handle_event(session: Session, event: Event) -> TurnOutput:
    session.turn_count += 1
    if session.settings.mode == MODE_S3:
        return s3_orchestrate(session, event)

    out = TurnOutput()
    trace_start = session.history.next_seq()
    intent = _resolve_intent(session, event)

    if intent.kind == INTENT_GOAL:
        _on_goal(session, intent, out)
    elif intent.kind == INTENT_PROVIDE_VALUE:
        _on_provide_value(session, intent, out)
    elif intent.kind == INTENT_AUTHORIZE_RESPONSE:
        _on_authorize_response(session, intent, out)
    elif intent.kind in (INTENT_WHY, INTENT_HOW, INTENT_CHAIN, INTENT_SUMMARY):
        _on_explanation(session, intent, out)
        _reask_pending(session, out)
    elif intent.kind == INTENT_STOP:
        popped, resumed = session.goal_stack.stop_current()
        if popped is None:
            out.messages.append("There is nothing in progress to stop.")
        else:
            out.messages.append(f"Okay, I stopped working on {session.describe(popped.goal)}.")
            if resumed is not None:
                out.messages.append(f"Back to {session.describe(resumed.goal)}.")
                _run_goal_loop(session, out)
    else:
        out.messages.append("Sorry, I am not sure how to help with that.")
        _reask_pending(session, out)

    out.trace_delta = list(range(trace_start, session.history.next_seq()))
    if not out.messages:
        out.messages.append("Okay.")
    return out


def _reask_pending(session: Session, out: TurnOutput) -> None:
    entry = session.goal_stack.current()
    if entry is not None and entry.pending is not None:
        out.messages.append(entry.pending.prompt)
        out.asked = entry.pending


def _on_goal(session: Session, intent: Intent, out: TurnOutput) -> None:
    unknown = sorted(e for e in intent.elements if e not in session.ontology)
    if unknown:
        out.messages.append(f"I do not know how to establish {', '.join(unknown)}.")
        return
    interrupted = session.goal_stack.current()
    if interrupted is not None and interrupted.status == GOAL_ACTIVE:
        out.messages.append(f"Okay, switching to {session.describe(intent.elements)} first.")
    session.goal_stack.push_goal(
        intent.elements,
        initial_known=session.ltm.known_set(),
        first_seq=session.history.next_seq(),
    )
    _run_goal_loop(session, out)


def _on_provide_value(session: Session, intent: Intent, out: TurnOutput) -> None:
    entry = session.goal_stack.current()
    pending = entry.pending if entry else None
    if pending is None or pending.ask_kind != ASK_SLOT or pending.target != intent.element:
        out.messages.append("I was not waiting for that; tell me what you would like to do.")
        return
    runtime = session.runtimes.get(pending.skill_id)
    accepts = True
    if isinstance(runtime, SlotFillRuntime):
        accepts = runtime.accepts(intent.element, intent.value or "")
    element = intent.element
    pkey = compiler.pair_key(pending.skill_id, pending.pair_id)
    if accepts:
        session.record(
            skill_id=pending.skill_id,
            pair_id=pending.pair_id,
            action_id=pending.action_id,
            inputs=(),
            desired_index=0,
            actual={element},
            success=True,
        )
        session.ltm.put_fact(element, (intent.value or "").strip(), Provenance.user())
        entry.pending = None
        out.messages.append(f"Noted your {session.ontology.display(element)}.")
        _run_goal_loop(session, out)
        return
    pending.attempts += 1
    if pending.attempts >= session.retry_limit(pending.skill_id):
        session.record(
            skill_id=pending.skill_id,
            pair_id=pending.pair_id,
            action_id=pending.action_id,
            inputs=(),
            desired_index=0,
            actual=(),
            success=False,
        )
        session.learned.add(cannot_establish(pkey, element))
        entry.pending = None
        out.messages.append(
            f"I could not make sense of that {session.ontology.display(element)}; "
            "let me try another way."
        )
        _run_goal_loop(session, out)
    else:
        out.messages.append(
            f"That does not look like a valid {session.ontology.display(element)}. {pending.prompt}"
        )
        out.asked = pending


def _on_authorize_response(session: Session, intent: Intent, out: TurnOutput) -> None:
    entry = session.goal_stack.current()
    pending = entry.pending if entry else None
    if pending is None or pending.ask_kind != ASK_AUTHORIZE or pending.target != intent.skill_id:
        out.messages.append("There is no authorization pending.")
        return
    skill_id = intent.skill_id
    session.record(
        skill_id=pending.skill_id,
        pair_id=pending.pair_id,
        action_id=pending.action_id,
        inputs=(),
        desired_index=0,
        actual=(),
        success=bool(intent.granted),
    )
    entry.pending = None
    if intent.granted:
        session.authorized.add(skill_id)
        out.messages.append(f"Thanks, sharing with {skill_id} is authorized.")
    else:
        pkey = compiler.pair_key(pending.skill_id, pending.pair_id)
        session.learned.add(cannot_establish(pkey, skill_id))
        out.messages.append(f"Understood, I will not share sensitive information with {skill_id}.")
    _run_goal_loop(session, out)


def _on_explanation(session: Session, intent: Intent, out: TurnOutput) -> None:
    try:
        if intent.kind == INTENT_SUMMARY:
            entry = session.goal_stack.latest_entry_for(None)
            if entry is None:
                out.messages.append("Nothing has been worked on yet.")
                return
            summary = explainer.summarize(session, entry.goal)
            out.messages.extend(explainer.render_summary(summary))
            return
        element = session.resolve_element(intent.element)
        if element is None:
            out.messages.append(f"I do not know anything called {intent.element!r}.")
            return
        if intent.kind == INTENT_HOW:
            answer = explainer.explain_how(session, element)
            out.messages.append(explainer.render_how(session, answer))
        elif intent.kind == INTENT_WHY:
            entry = session.goal_stack.latest_entry_for(None)
            if entry is None:
                out.messages.append("I have not pursued any goal yet.")
                return
            justification = explainer.explain_why(
                session, entry.goal, element, mode=intent.mode or "chain"
            )
            out.messages.extend(explainer.render_why(session, element, justification))
        else:  # chain
            chain = explainer.explain_chain(session, concrete_element(session, element))
            out.messages.extend(explainer.render_chain(session, chain))
    except explainer.ExplanationError as exc:
        out.messages.append(str(exc))


def concrete_element(session: Session, element: str) -> str:
    """Map an abstract element to the concrete known descendant, if any."""
    if element in session.ltm:
        return element
    for fact_element in sorted(session.ltm.known_set()):
        if element in compiler.closure([fact_element], session.ontology):
            return fact_element
    return element


def _goal_value(session: Session, element: str) -> str | None:
    fact = session.ltm.get(element)
    if fact is not None:
        return fact.value
    concrete = concrete_element(session, element)
    fact = session.ltm.get(concrete)
    return None if fact is None else fact.value


def _run_goal_loop(session: Session, out: TurnOutput) -> None:
    """Compile / plan / execute until suspension, success, or give-up."""
    replans = 0
    while True:
        entry = session.goal_stack.current()
        if entry is None:
            return
        if entry.pending is not None:
            out.messages.append(entry.pending.prompt)
            out.asked = entry.pending
            return
        if replans >= session.settings.max_replans:
            out.messages.append(
                f"I am giving up on {session.describe(entry.goal)} after too many attempts."
            )
            session.goal_stack.stop_current()
            return
        replans += 1

        model = session.compile_model(entry.goal)
        result = planner.plan(model)
        snapshot = {
            "turn": session.turn_count,
            "goal": sorted(entry.goal),
            "status": result.status,
            "steps": list(result.plan.steps) if result.plan is not None else [],
            "stats": {"expanded": result.stats.expanded, "generated": result.stats.generated},
        }
        session.plan_snapshots.append(snapshot)
        entry.plans.append(snapshot)

        if not result.solved:
            blockers = planner.blocking_fluents(model)
            names = sorted(
                session.ontology.display(f.args[0])
                if f.kind == compiler.KNOWN
                else f"authorization for {f.args[0]}"
                for f in blockers
            )
            out.messages.append(
                f"I am sorry, I cannot achieve {session.describe(entry.goal)}: "
                f"I have no way to establish {', '.join(names) if names else 'a required fact'}."
            )
            _, resumed = session.goal_stack.stop_current()
            if resumed is not None:
                out.messages.append(f"Back to {session.describe(resumed.goal)}.")
            continue

        if len(result.plan) == 0:
            values = []
            for g in sorted(entry.goal):
                value = _goal_value(session, g)
                values.append(
                    f"{session.ontology.display(g)}: {value}" if value else session.ontology.display(g)
                )
            out.messages.append("Done. " + "; ".join(values))
            out.achieved = sorted(set(out.achieved or []) | entry.goal)
            popped, resumed = session.goal_stack.complete_current()
            for extension in session.goal_extensions:
                if set(extension.get("on_complete", [])) <= popped.goal:
                    out.messages.append(extension["prompt"])
            if resumed is not None:
                out.messages.append(f"Back to {session.describe(resumed.goal)}.")
            continue

        suspended = _execute_plan(session, model, result.plan, entry, out)
        if suspended:
            return


def _execute_plan(
    session: Session,
    model: PlanningModel,
    the_plan: compiler.Plan,
    entry: GoalEntry,
    out: TurnOutput,
) -> bool:
    """Execute plan steps in order; returns True when suspended on a user
    question. Any divergence (failure, undesired outcome, invalid invocation)
    breaks out so the loop replans with what was learned."""
    for action_id in the_plan:
        action = model.actions[action_id]
        state = session.live_state()
        if not action.positive_preconditions <= state:
            logger.debug("action %s no longer applicable; replanning", action_id)
            return False
        gate = authorization_gate(session, action)
        if gate != "allow":
            logger.debug("gate requires %s before %s; replanning", gate, action_id)
            return False

        result = _invoke(session, action)

        if result.status == STATUS_NEEDS_USER:
            entry.pending = PendingQuestion(
                ask_kind=result.ask_kind,
                target=result.target,
                prompt=result.prompt,
                action_id=action.action_id,
                skill_id=action.skill_id,
                pair_id=action.pair_id,
            )
            out.messages.append(result.prompt)
            out.asked = entry.pending
            return True

        skill = session.catalog.skills.get(action.skill_id)
        pair = skill.pair(action.pair_id) if skill else None
        desired = pair.outcomes[action.outcome_index] if pair and pair.outcomes else frozenset()
        inputs = sorted(pair.inputs) if pair else []

        if result.status == STATUS_OUTCOME:
            success = result.outcome_index == action.outcome_index
            rec = session.record(
                skill_id=action.skill_id,
                pair_id=action.pair_id,
                action_id=action.action_id,
                inputs=inputs,
                desired_index=action.outcome_index,
                actual=result.outputs.keys(),
                success=success,
            )
            for element, value in sorted(result.outputs.items()):
                session.ltm.put_fact(element, value, Provenance.skill(rec.seq))
            if success:
                continue
            session.bump_counters(action.pair_key, action.skill_id, desired)
            return False

        if result.status == STATUS_FAILED:
            session.record(
                skill_id=action.skill_id,
                pair_id=action.pair_id,
                action_id=action.action_id,
                inputs=inputs,
                desired_index=action.outcome_index,
                actual=(),
                success=False,
            )
            if result.message:
                out.messages.append(f"({action.skill_id}: {result.message})")
            session.bump_counters(action.pair_key, action.skill_id, desired)
            return False

        if result.status == STATUS_INVALID:
            session.record(
                skill_id=action.skill_id,
                pair_id=action.pair_id,
                action_id=action.action_id,
                inputs=inputs,
                desired_index=action.outcome_index,
                actual=(),
                success=False,
                invalid=True,
            )
            session.pruned.add(action.action_id)
            logger.debug("pruned %s after invalid invocation", action.action_id)
            return False

        raise RuntimeError(f"unknown invocation status {result.status!r}")
    return False


def _invoke(session: Session, action: GroundedAction):
    runtime = session.runtimes.get(action.skill_id)
    if runtime is None:
        from .skills import InvocationResult

        return InvocationResult.failed(f"no runtime registered for {action.skill_id}")
    skill = session.catalog.skills.get(action.skill_id)
    pair = None
    if skill is not None:
        try:
            pair = skill.pair(action.pair_id)
        except KeyError:
            pair = None
    inputs = {}
    if pair is not None:
        inputs = {e: session.ltm.value_of(e) or "" for e in sorted(pair.inputs)}
    context = InvocationContext(
        skill=skill,
        pair=pair,
        desired_outcome_index=action.outcome_index,
        ontology=session.ontology,
        target=action.target,
    )
    return runtime.execute(inputs, action.pair_id, context)


# --------------------------------------------------------------------------
# S3 baseline
# --------------------------------------------------------------------------


def s3_select(scores: Mapping[str, float], delta: float, k: int) -> list[str]:
    """Top-k skills scoring at least delta, highest first; no excluded skill
    ever strictly outscores an included one."""
    eligible = [(s, score) for s, score in scores.items() if score >= delta]
    eligible.sort(key=lambda item: (-item[1], item[0]))
    return [s for s, _ in eligible[: max(k, 0)]]


def s3_orchestrate(
    session: Session,
    event: Event,
    scorer: Callable[[float], float] | None = None,
    selector: Callable[[Mapping[str, float]], list[str]] | None = None,
    sequencer: Callable[[list[str]], list[str]] | None = None,
) -> TurnOutput:
    """Stateless score-select-sequence baseline: broadcast a preview of the
    event to every skill, execute the best-scoring ones in score order."""
    out = TurnOutput()
    trace_start = session.history.next_seq()
    scorer = scorer or (lambda p: p)
    selector = selector or (
        lambda scores: s3_select(scores, session.settings.s3_delta, session.settings.s3_k)
    )
    sequencer = sequencer or (lambda selected: list(selected))

    scores: dict[str, float] = {}
    for skill_id in sorted(session.runtimes):
        preview = session.runtimes[skill_id].preview(event)
        scores[skill_id] = scorer(preview) if preview is not None else 0.0

    ordered = sequencer(selector(scores))
    if not ordered:
        out.messages.append("No skill is confident it can handle that.")
    for skill_id in ordered:
        skill = session.catalog.skills.get(skill_id)
        if skill is None or not skill.pairs:
            out.messages.append(f"{skill_id}: nothing to execute.")
            continue
        pair = skill.pairs[0]
        missing = sorted(e for e in pair.inputs if e not in session.ltm)
        if missing:
            out.messages.append(
                f"{skill_id} needs {session.describe(missing)} before it can run."
            )
            continue
        inputs = {e: session.ltm.value_of(e) or "" for e in sorted(pair.inputs)}
        context = InvocationContext(
            skill=skill, pair=pair, desired_outcome_index=0, ontology=session.ontology
        )
        result = session.runtimes[skill_id].execute(inputs, pair.pair_id, context)
        if result.status == STATUS_OUTCOME:
            rec = session.record(
                skill_id=skill_id,
                pair_id=pair.pair_id,
                action_id=f"{skill_id}/{pair.pair_id}/o{result.outcome_index}",
                inputs=sorted(pair.inputs),
                desired_index=result.outcome_index or 0,
                actual=result.outputs.keys(),
                success=True,
            )
            for element, value in sorted(result.outputs.items()):
                session.ltm.put_fact(element, value, Provenance.skill(rec.seq))
            rendered = "; ".join(f"{k}: {v}" for k, v in sorted(result.outputs.items()))
            out.messages.append(f"{skill_id}: {rendered}")
        else:
            out.messages.append(f"{skill_id}: {result.message or result.status}")
    out.trace_delta = list(range(trace_start, session.history.next_seq()))
    if not out.messages:
        out.messages.append("Okay.")
    return out
