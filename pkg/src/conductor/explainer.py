"""What / how / why answers over session state.

* "What happened?" -- recompile the goal's planning model from the initial
  state it was pursued from, but keeping everything learned since (frozen
  cannot_establish facts, pruned actions), then report the fact landmarks in
  topological order: the information that every way of reaching the goal had
  to collect, regardless of which plan actually ran.
* "How did you get X?" -- the most recent execution record that established
  X, with the skill's catalog description and the inputs it consumed (so the
  user can chain further back); user-provided facts short-circuit.
* "Why did you need X?" -- regress the goal backwards through the execution
  history, replacing each contributing record's outputs with its inputs and
  skipping missteps, until a contributing record consumed X.
* Attribution chains -- follow each skill's highest-weight input attribution
  backwards across establishing records until hitting user-provided
  information or a skill that offers no attribution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable

from . import planner
from .compiler import closure
from .memory import ExecutionRecord


class ExplanationError(Exception):
    pass


# --------------------------------------------------------------------------
# Summaries ("what?")
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SummaryItem:
    element: str
    sentence: str
    source: str  # user | skill | goal | needed


@dataclass(frozen=True)
class Summary:
    goal: tuple[str, ...]
    items: tuple[SummaryItem, ...]
    omitted: int
    achievable: bool = True

    def to_doc(self) -> dict[str, Any]:
        return {
            "goal": list(self.goal),
            "items": [
                {"element": i.element, "sentence": i.sentence, "source": i.source} for i in self.items
            ],
            "omitted": self.omitted,
            "achievable": self.achievable,
        }


def summarize(session, goal: Iterable[str]) -> Summary:
    goal = frozenset(goal)
    entry = session.goal_stack.latest_entry_for(goal)
    if entry is None:
        raise ExplanationError(f"I never worked on {session.describe(goal)}.")

    achievable = True
    model = session.compile_model(goal, initial_known=entry.initial_known)
    try:
        graph = planner.extract_landmarks(model)
    except ValueError:
        # what was learned this session makes the goal unreachable from its
        # original initial state; summarize the pre-learning view instead
        achievable = False
        from . import compiler as _compiler

        fallback = _compiler.compile(
            session.catalog,
            session.ontology,
            entry.initial_known,
            goal=goal,
            authorized_skills=session.authorized,
            slot_fill_cost=session.settings.slot_fill_cost,
        )
        try:
            graph = planner.extract_landmarks(fallback)
        except ValueError:
            raise ExplanationError(
                f"I never had a way to reach {session.describe(goal)}."
            ) from None

    items: list[SummaryItem] = []
    landmark_elements: set[str] = set()
    for fluent in graph.topological_order():
        element = fluent.args[0]
        landmark_elements.add(element)
        fact = session.ltm.get(element)
        if fact is None:
            concrete = _known_descendant(session, element)
            fact = session.ltm.get(concrete) if concrete else None
        display = session.ontology.display(element)
        if fact is None:
            items.append(SummaryItem(element, f"I still need the {display}.", "needed"))
        elif fact.provenance.kind == "user":
            items.append(SummaryItem(element, f"You provided the {display}.", "user"))
        else:
            rec = session.history.last_establishing(fact.element)
            skill = session.catalog.skills.get(rec.skill_id) if rec else None
            via = f" ({skill.description})" if skill else ""
            items.append(SummaryItem(element, f"I established the {display}{via}.", "skill"))

    omitted = 0
    for rec in session.history:
        if rec.seq < entry.first_seq:
            continue
        produced = closure(rec.actual_outcome, session.ontology)
        if not produced & landmark_elements:
            omitted += 1
    return Summary(goal=tuple(sorted(goal)), items=tuple(items), omitted=omitted, achievable=achievable)


def render_summary(summary: Summary) -> list[str]:
    lines = [f"Here is what getting to the goal took ({', '.join(summary.goal)}):"]
    lines.extend(f"- {item.sentence}" for item in summary.items)
    if summary.omitted:
        lines.append(f"(I also took {summary.omitted} step(s) that did not end up mattering.)")
    if not summary.achievable:
        lines.append("(With what I have learned since, this goal is no longer achievable that way.)")
    return lines


def _known_descendant(session, element: str) -> str | None:
    for fact_element in sorted(session.ltm.known_set()):
        if element in closure([fact_element], session.ontology):
            return fact_element
    return None


# --------------------------------------------------------------------------
# "How?"
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class HowAnswer:
    element: str
    source: str  # user | seed | skill
    skill_id: str | None = None
    description: str | None = None
    inputs: tuple[str, ...] = ()
    record_seq: int | None = None

    def to_doc(self) -> dict[str, Any]:
        return {
            "element": self.element,
            "source": self.source,
            "skill_id": self.skill_id,
            "description": self.description,
            "inputs": list(self.inputs),
            "record_seq": self.record_seq,
        }


def explain_how(session, element: str) -> HowAnswer:
    fact = session.ltm.get(element)
    if fact is None:
        concrete = _known_descendant(session, element)
        fact = session.ltm.get(concrete) if concrete else None
        if fact is None:
            raise ExplanationError(
                f"I have not established the {session.ontology.display(element)} yet."
            )
        element = fact.element
    if fact.provenance.kind in ("user", "seed"):
        return HowAnswer(element=element, source=fact.provenance.kind)
    rec = session.history.last_establishing(element)
    if rec is None:
        return HowAnswer(element=element, source="seed")
    skill = session.catalog.skills.get(rec.skill_id)
    return HowAnswer(
        element=element,
        source="skill",
        skill_id=rec.skill_id,
        description=skill.description if skill else None,
        inputs=tuple(sorted(rec.inputs_consumed)),
        record_seq=rec.seq,
    )


def render_how(session, answer: HowAnswer) -> str:
    display = session.ontology.display(answer.element)
    if answer.source in ("user", "seed"):
        return f"You provided the {display} yourself."
    used = ", ".join(session.ontology.display(e) for e in answer.inputs) or "no inputs"
    return f"I got the {display} from {answer.skill_id} ({answer.description}), using: {used}."


# --------------------------------------------------------------------------
# "Why?" (goal regression)
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class JustificationLink:
    skill_id: str
    consumed: tuple[str, ...]
    produced: tuple[str, ...]
    record_seq: int

    def to_doc(self) -> dict[str, Any]:
        return {
            "skill_id": self.skill_id,
            "consumed": list(self.consumed),
            "produced": list(self.produced),
            "record_seq": self.record_seq,
        }


@dataclass(frozen=True)
class Justification:
    mode: str  # final | chain
    links: tuple[JustificationLink, ...]
    goal: tuple[str, ...]

    def to_doc(self) -> dict[str, Any]:
        return {
            "mode": self.mode,
            "links": [l.to_doc() for l in self.links],
            "goal": list(self.goal),
        }


@dataclass(frozen=True)
class DidNotContribute:
    element: str

    def to_doc(self) -> dict[str, Any]:
        return {"did_not_contribute": self.element}


def _link(rec: ExecutionRecord) -> JustificationLink:
    return JustificationLink(
        skill_id=rec.skill_id,
        consumed=tuple(sorted(rec.inputs_consumed)),
        produced=tuple(sorted(rec.actual_outcome)),
        record_seq=rec.seq,
    )


def explain_why(session, goal: Iterable[str], element: str, mode: str = "chain") -> Justification | DidNotContribute:
    goal = frozenset(goal)
    entry = session.goal_stack.latest_entry_for(goal)
    if entry is None:
        raise ExplanationError(f"I never worked on {session.describe(goal)}.")
    consumed_somewhere = any(element in rec.inputs_consumed for rec in session.history)
    known_now = element in closure(session.ltm.known_set(), session.ontology)
    if not consumed_somewhere and not known_now:
        raise ExplanationError(f"The {session.ontology.display(element)} never came up.")

    # the queried element may itself be (subsumed by) the goal
    if element in goal or closure([element], session.ontology) & goal:
        for rec in reversed(session.history.records):
            if closure(rec.actual_outcome, session.ontology) & goal:
                return Justification(mode=mode, links=(_link(rec),), goal=tuple(sorted(goal)))
        return DidNotContribute(element)

    regressed = set(goal)
    collected: list[ExecutionRecord] = []  # latest-first
    for rec in reversed(session.history.records):
        produced = closure(rec.actual_outcome, session.ontology)
        if not produced & regressed:
            continue  # misstep with respect to the goal; skip
        collected.append(rec)
        regressed = (regressed - produced) | set(rec.inputs_consumed)
        if element in rec.inputs_consumed:
            if mode == "final":
                return Justification(mode="final", links=(_link(rec),), goal=tuple(sorted(goal)))
            links = tuple(_link(r) for r in reversed(collected))
            return Justification(mode="chain", links=links, goal=tuple(sorted(goal)))
    return DidNotContribute(element)


def render_why(session, element: str, justification: Justification | DidNotContribute) -> list[str]:
    display = session.ontology.display(element)
    if isinstance(justification, DidNotContribute):
        return [f"As it turned out, the {display} did not contribute to that goal."]
    lines = [f"The {display} mattered for reaching {', '.join(justification.goal)}:"]
    for link in justification.links:
        consumed = ", ".join(session.ontology.display(e) for e in link.consumed) or "nothing"
        produced = ", ".join(session.ontology.display(e) for e in link.produced)
        lines.append(f"- {link.skill_id} used {consumed} to establish {produced}.")
    return lines


# --------------------------------------------------------------------------
# Attribution chaining
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ChainStep:
    skill_id: str
    focus: str
    attribution: tuple[str, float] | None

    def to_doc(self) -> dict[str, Any]:
        return {
            "skill_id": self.skill_id,
            "focus": self.focus,
            "attribution": None
            if self.attribution is None
            else {"element": self.attribution[0], "weight": self.attribution[1]},
        }


@dataclass(frozen=True)
class ChainExplanation:
    steps: tuple[ChainStep, ...]
    terminal_kind: str  # user_provided | opaque
    terminal: str  # element id or skill id

    def to_doc(self) -> dict[str, Any]:
        return {
            "steps": [s.to_doc() for s in self.steps],
            "terminal_kind": self.terminal_kind,
            "terminal": self.terminal,
        }


def explain_chain(session, element: str) -> ChainExplanation:
    if element not in session.ltm:
        raise ExplanationError(
            f"I have not established the {session.ontology.display(element)} yet."
        )
    steps: list[ChainStep] = []
    focus = element
    for _ in range(len(session.history) + 1):
        fact = session.ltm.get(focus)
        if fact is None or fact.provenance.kind in ("user", "seed"):
            return ChainExplanation(tuple(steps), "user_provided", focus)
        rec = session.history.last_establishing(focus)
        if rec is None:
            return ChainExplanation(tuple(steps), "user_provided", focus)
        runtime = session.runtimes.get(rec.skill_id)
        attributions = runtime.explain(focus) if runtime is not None else None
        usable = [
            (e, w) for e, w in (attributions or []) if e in rec.inputs_consumed
        ]
        if not usable:
            steps.append(ChainStep(rec.skill_id, focus, None))
            return ChainExplanation(tuple(steps), "opaque", rec.skill_id)
        usable.sort(key=lambda ew: (-ew[1], ew[0]))
        top = usable[0]
        steps.append(ChainStep(rec.skill_id, focus, top))
        focus = top[0]
    return ChainExplanation(tuple(steps), "opaque", focus)


def render_chain(session, chain: ChainExplanation) -> list[str]:
    lines = []
    for step in chain.steps:
        focus = session.ontology.display(step.focus)
        if step.attribution is None:
            lines.append(f"{step.skill_id} produced the {focus} but offers no explanation.")
        else:
            source = session.ontology.display(step.attribution[0])
            lines.append(
                f"{step.skill_id} attributes the {focus} mostly to the {source} "
                f"(weight {step.attribution[1]:.2f})."
            )
    if chain.terminal_kind == "user_provided":
        lines.append(f"The {session.ontology.display(chain.terminal)} came from you.")
    else:
        lines.append(f"The trail ends at {chain.terminal}, which cannot explain itself further.")
    return lines
